//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use qeilab_core::fock::FockTruncation;
use qeilab_core::modular::{random_algebra_element, random_unitary, tomita_objects, CyclicSeparatingPair};
use qeilab_core::operator::{CMatrix, RVector, C64};
use qeilab_core::qei::{
    default_lambda_grid, domain_divergence_scan, lattice_bound_verify, LatticeBoundSetup, PreparedState, RegionNest,
    Verdict,
};
use qeilab_core::scalar::{
    coherent_scaling_sequence, energy_density_form, hamiltonian_form, local_squeezer, region_modular_energies,
    weyl_map, BogoliubovMap, CauchyDatum, LatticeModel, ScalingSettings, SmearingFunction,
};
use qeilab_core::search::{coherent_min_closed_form, minimize_energy, SearchBudget, SearchProblem, StateFamily};
use qeilab_core::toy::{build_toy_model, local_bound_evaluate, modular_chain_check};
use qeilab_oracles::covariance_modular_energies_dd;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn op_norm(m: &CMatrix) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

fn lift(x: &CMatrix) -> CMatrix {
    x.kronecker(&CMatrix::identity(x.nrows(), x.nrows()))
}

fn defining_property() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let k = 2 + (seed as usize % 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let md = tomita_objects(&CyclicSeparatingPair::random(k, &mut rng));
        for _ in 0..20 {
            let a = random_algebra_element(k, &mut rng);
            worst = worst.max(md.defining_property_residual(&a));
        }
    }
    ensure(worst <= 1e-9, || format!("max residual {worst:e}"))?;
    Ok(format!("max residual {worst:.2e} over 200 elements"))
}

fn region_spectra() -> Check {
    let cases: [(usize, f64, Vec<usize>); 5] = [
        (8, 0.25, (2..6).collect()),
        (16, 0.125, (4..12).collect()),
        (32, 0.0625, (0..8).collect()),
        (32, 0.0625, (0..12).collect()),
        (64, 0.03125, (0..6).collect()),
    ];
    let mut worst: f64 = 0.0;
    for (n, a, region) in cases {
        let model = LatticeModel::new(n, a, 1.0).map_err(|e| e.to_string())?;
        let ours = region_modular_energies(&model, &region).map_err(|e| e.to_string())?;
        let oracle = covariance_modular_energies_dd(n, a, 1.0, &region);
        ensure(ours.len() == oracle.len(), || format!("N={n}: spectrum sizes differ"))?;
        for (x, y) in ours.iter().zip(&oracle) {
            worst = worst.max((x - y).abs() / y.abs());
        }
    }
    ensure(worst <= 1e-6, || format!("max relative error {worst:e}"))?;
    Ok(format!("5 regions, max relative error {worst:.2e}"))
}

fn simple_bound() -> Check {
    let mut violations = 0;
    let mut min_positive = f64::INFINITY;
    let mut cases = 0;
    for model_seed in 0..10u64 {
        let k = 2 + (model_seed as usize % 3);
        let m = build_toy_model(model_seed, k).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(500 + model_seed);
        for case in 0..100 {
            let a = if case % 2 == 0 {
                lift(&random_unitary(k, &mut rng))
            } else {
                random_algebra_element(k, &mut rng)
            };
            let r = op_norm(&a) / (&a * m.omega()).norm() * rng.random_range(1.0..3.0);
            let b = local_bound_evaluate(&m, &a, r).map_err(|e| e.to_string())?;
            cases += 1;
            if b.report.lhs - b.report.rhs < -1e-10 {
                violations += 1;
            }
            min_positive = min_positive.min(b.positive_part);
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    ensure(min_positive >= -1e-12, || format!("(AΩ,HAΩ) reached {min_positive:e}"))?;
    Ok(format!("{cases} cases, 0 violations, min (AΩ,HAΩ) {min_positive:.2e}"))
}

fn chain() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let k = 2 + (i as usize % 3);
        let m = build_toy_model(i / 10, k).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + i);
        let y = random_algebra_element(k, &mut rng);
        let y = &y / C64::new(op_norm(&y) * rng.random_range(1.0..2.0), 0.0);
        let a = random_algebra_element(k, &mut rng);
        let lambda = rng.random_range(0.1..1.0);
        let c = modular_chain_check(&m, &y, &a, lambda).map_err(|e| e.to_string())?;
        ensure(c.max_discrepancy <= 1e-8f64.max(c.quadrature_tail), || {
            format!("triple {i}: discrepancy {:e}, tail {:e}", c.max_discrepancy, c.quadrature_tail)
        })?;
        worst = worst.max(c.max_discrepancy);
    }
    Ok(format!("100 triples, max discrepancy {worst:.2e}"))
}

fn coherent_scaling() -> Check {
    let n = 16;
    let model = LatticeModel::new(n, 0.125, 1.0).map_err(|e| e.to_string())?;
    let g = SmearingFunction::plateau(n, &[7, 8], 1, 0.0, 0.1).map_err(|e| e.to_string())?;
    let mut u = RVector::zeros(n);
    let mut v = RVector::zeros(n);
    for x in 6..10 {
        u[x] = 1.0 - 0.2 * (x as f64 - 7.5).abs();
        v[x] = 0.3;
    }
    let rep = coherent_scaling_sequence(&model, &g, &CauchyDatum::new(u, v), &ScalingSettings::default())
        .map_err(|e| e.to_string())?;
    ensure(rep.slope_rel_error <= 1e-6, || format!("slope error {:e}", rep.slope_rel_error))?;
    let remainder = rep.rows.iter().map(|r| r.remainder.abs()).fold(0.0, f64::max);
    ensure(remainder.is_finite() && remainder <= 1e-8, || format!("remainder {remainder:e}"))?;
    ensure(rep.rows.iter().all(|r| r.within_epsilon), || "norm bound above 1 + ε".into())?;
    Ok(format!("slope error {:.2e}, max |remainder| {remainder:.2e}", rep.slope_rel_error))
}

fn modular_bound() -> Check {
    let n = 16;
    let model = LatticeModel::new(n, 0.125, 1.0).map_err(|e| e.to_string())?;
    let nest = RegionNest::default_for(n, 0.1).map_err(|e| e.to_string())?;
    let g = SmearingFunction::plateau(n, &nest.o, 0, 0.0, 0.1).map_err(|e| e.to_string())?;
    let setup = LatticeBoundSetup::new(model.clone(), g, nest.clone()).map_err(|e| e.to_string())?;
    let grid = default_lambda_grid();
    let vacuum = PreparedState {
        label: "vacuum".into(),
        map: BogoliubovMap::identity(n),
        support: nest.o_flat.clone(),
    };
    let r = lattice_bound_verify(&setup, &vacuum, 1e-2, &grid, 1).map_err(|e| e.to_string())?;
    ensure(r.rows.iter().all(|x| x.verdict == Verdict::Holds), || "vacuum violates the bound".into())?;
    let flat = nest.o_flat.clone();
    let mut states = Vec::new();
    for (i, &x) in flat.iter().enumerate() {
        states.push(PreparedState {
            label: format!("coherent@{x}"),
            map: weyl_map(&model, &CauchyDatum::site(n, x, 1.0, 0.5), 3.0),
            support: vec![x],
        });
        let mut profile = vec![0.0; n];
        profile[x] = 1.0;
        if i + 1 < flat.len() {
            profile[flat[i + 1]] = 0.5;
        }
        states.push(PreparedState {
            label: format!("squeezed@{x}"),
            map: local_squeezer(&model, &profile, 0.4),
            support: flat.clone(),
        });
    }
    states.truncate(10);
    let mut max_defect: f64 = 0.0;
    for s in &states {
        let r = lattice_bound_verify(&setup, s, 1e-2, &grid, 1).map_err(|e| e.to_string())?;
        let l0 = r.lambda0.ok_or_else(|| format!("{}: no passing prefix", s.label))?;
        for row in r.rows.iter().filter(|row| row.lambda.is_some_and(|l| l <= l0)) {
            ensure(row.lhs >= row.rhs - row.defect_slack, || format!("{} fails inside its prefix", s.label))?;
        }
        max_defect = max_defect.max(r.rows[0].commutator_defect);
    }
    Ok(format!(
        "vacuum holds at all {} λ, {} states with passing prefixes, max commutator defect {max_defect:.2e}",
        grid.len(),
        states.len()
    ))
}

fn divergence_scan() -> Check {
    let setups: Vec<LatticeBoundSetup> = [8usize, 16, 32]
        .iter()
        .map(|&n| {
            let model = LatticeModel::new(n, 2.0 / n as f64, 1.0).unwrap();
            let g = SmearingFunction::plateau(n, &(3 * n / 8..5 * n / 8).collect::<Vec<_>>(), 0, 0.0, 0.1).unwrap();
            LatticeBoundSetup::for_region(model, g, (n / 4..3 * n / 4).collect()).unwrap()
        })
        .collect();
    let grid = [0.4, 0.2, 0.1, 0.05, 0.025];
    let rows = domain_divergence_scan(&setups, &grid).map_err(|e| e.to_string())?;
    for n in [8, 16, 32] {
        let norms: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.norm).collect();
        ensure(norms.windows(2).all(|w| w[1] >= w[0]), || format!("N={n} not monotone: {norms:?}"))?;
    }
    let at = |n: usize| rows.iter().find(|r| r.n == n && r.lambda == 0.05).map(|r| r.norm).unwrap_or(f64::NAN);
    let (a, b, c) = (at(8), at(16), at(32));
    ensure(a < b && b < c, || format!("not increasing at λ=0.05: {a:e} {b:e} {c:e}"))?;
    Ok(format!("λ=0.05 norms N=8 {a:.3e}, N=16 {b:.3e}, N=32 {c:.3e}"))
}

fn worst_case_search() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 + (seed as usize % 2);
        let model = LatticeModel::new(n, rng.random_range(0.3..1.0), rng.random_range(0.5..2.0)).map_err(|e| e.to_string())?;
        let site = rng.random_range(0..n);
        let g = SmearingFunction::plateau(n, &[site], 1, 0.0, rng.random_range(0.05..0.5)).map_err(|e| e.to_string())?;
        let problem = SearchProblem::new(energy_density_form(&model, &g), hamiltonian_form(&model), FockTruncation::new(n, 12))
            .map_err(|e| e.to_string())?;
        let radius = 0.7;
        let exact = coherent_min_closed_form(&problem.form, Some(radius)).map_err(|e| e.to_string())?.value();
        let budget = SearchBudget::default();
        let coherent = minimize_energy(&problem, StateFamily::Coherent { radius }, budget, seed).map_err(|e| e.to_string())?;
        let err = (coherent.best_value - exact).abs();
        ensure(err <= 1e-6, || format!("seed {seed}: closed-form error {err:e}"))?;
        worst = worst.max(err);
        let squeezed = minimize_energy(&problem, StateFamily::SqueezedCoherent { radius, max_squeeze: 0.3 }, budget, seed)
            .map_err(|e| e.to_string())?;
        ensure(squeezed.best_value <= coherent.best_value + 1e-8, || format!("seed {seed}: squeezed above coherent"))?;
        let r1 = minimize_energy(&problem, StateFamily::LowRankFock { rank: 1 }, budget, seed).map_err(|e| e.to_string())?;
        let r3 = minimize_energy(&problem, StateFamily::LowRankFock { rank: 3 }, budget, seed).map_err(|e| e.to_string())?;
        ensure(r3.best_value <= r1.best_value + 1e-8, || format!("seed {seed}: rank 3 above rank 1"))?;
    }
    Ok(format!("20 models, max closed-form error {worst:.2e}, nesting holds"))
}

fn reproducibility() -> Check {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for sub in ["modular-check", "toy-check", "lattice-run", "qei-sweep", "opt-search"] {
        let config = root.join(format!("{sub}.toml"));
        for (dir, jobs) in [(a.path(), "1"), (b.path(), "4")] {
            let status = Command::new(env!("CARGO_BIN_EXE_qeilab"))
                .args([sub, "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--jobs", jobs])
                .env_remove("QEILAB_SEED")
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.code() == Some(0), || format!("{sub} exited with {:?}", status.status.code()))?;
        }
        let mut names: Vec<_> = fs::read_dir(a.path().join(sub))
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.file_name()))
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        names.sort();
        for name in names {
            let x = fs::read(a.path().join(sub).join(&name)).map_err(|e| e.to_string())?;
            let y = fs::read(b.path().join(sub).join(&name)).map_err(|e| e.to_string())?;
            ensure(x == y, || format!("{sub}/{} differs", name.to_string_lossy()))?;
            files += 1;
        }
    }
    Ok(format!("{files} CSV files byte-identical across two runs"))
}

fn main() {
    let criteria: [(&str, f64, fn() -> Check); 9] = [
        ("modular defining property", 5.0, defining_property),
        ("region spectra vs covariance oracle", 30.0, region_spectra),
        ("local bound over 1000 cases", 60.0, simple_bound),
        ("modular rewriting chain", 60.0, chain),
        ("coherent energy scaling", 120.0, coherent_scaling),
        ("lattice modular bound", 600.0, modular_bound),
        ("refinement divergence scan", 600.0, divergence_scan),
        ("worst-case search", 300.0, worst_case_search),
        ("reproducible CSV output", f64::INFINITY, reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let result = result.and_then(|detail| {
            if secs < *limit {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {secs:.1}s, limit {limit}s"))
            }
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail} ({secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why} ({secs:.2}s)", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
