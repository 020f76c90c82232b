use qeilab_core::modular::{random_algebra_element, random_unitary, CyclicSeparatingPair, tomita_objects};
use qeilab_core::operator::{CMatrix, CVector, C64};
use qeilab_core::qei::default_lambda_grid;
use qeilab_core::toy::{
    build_toy_model, check_assumptions, local_bound_evaluate, minimal_preparation, modular_chain_check,
    toy_bound_verify, AssumptionStatus, ToyError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn op_norm(m: &CMatrix) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

fn lift(x: &CMatrix) -> CMatrix {
    x.kronecker(&CMatrix::identity(x.nrows(), x.nrows()))
}

#[test]
fn model_invariants_hold() {
    for seed in 0..6u64 {
        let k = 2 + (seed as usize % 3);
        let m = build_toy_model(seed, k).unwrap();
        assert!(m.h.min_eigenvalue() >= -1e-10);
        assert!((m.h.entries() * m.omega()).norm() <= 1e-12);
        assert!(m.generator_residual_units() <= 1e-12, "seed {seed}");
        let v = m.omega().dotc(&m.rho_omega()).re;
        assert!((-1.0..=1.0).contains(&v));
        assert!(m.pair.schmidt_coefficients().iter().all(|&s| s > 0.0));
    }
}

#[test]
fn factor_size_one_is_rejected() {
    assert!(matches!(build_toy_model(0, 1), Err(ToyError::FactorTooSmall(1))));
}

#[test]
fn same_seed_same_model() {
    let a = build_toy_model(42, 3).unwrap();
    let b = build_toy_model(42, 3).unwrap();
    assert_eq!(a.rho_g.entries(), b.rho_g.entries());
}

#[test]
fn assumption_report_structure() {
    let m = build_toy_model(5, 3).unwrap();
    let r = check_assumptions(&m, m.omega());
    assert!(!r.any_failed());
    for name in ["isotony", "locality", "ground_state", "energy_density", "affiliation", "generator"] {
        assert!(matches!(r.get(name), Some(AssumptionStatus::ExactPass { .. })), "{name}");
    }
    for name in ["distribution", "polynomial_bound"] {
        assert!(matches!(r.get(name), Some(AssumptionStatus::AutoPass { .. })), "{name}");
    }
    match r.get("reeh_schlieder") {
        Some(AssumptionStatus::NotRealizable { reason }) => assert!(reason.starts_with("not-realizable(finite-dim)")),
        other => panic!("{other:?}"),
    }
    match r.get("local_preparability") {
        Some(AssumptionStatus::Diagnostic { value, .. }) => assert!((value - 1.0).abs() < 1e-10),
        other => panic!("{other:?}"),
    }
}

#[test]
fn preparation_for_maximally_entangled_vacuum_is_identity() {
    let base = build_toy_model(3, 2).unwrap();
    let pair = CyclicSeparatingPair::maximally_entangled(2);
    let m = qeilab_core::toy::ToyModel {
        modular: tomita_objects(&pair),
        pair,
        ..base
    };
    let prep = minimal_preparation(&m, m.omega());
    assert!((prep.norm - 1.0).abs() < 1e-12);
    assert!((prep.y.clone() - CMatrix::identity(4, 4)).norm() < 1e-10);
}

#[test]
fn near_product_vacuum_needs_a_large_preparation() {
    let pair = CyclicSeparatingPair::from_schmidt(&[1.0 - 1e-6, 1e-6]).unwrap();
    let base = build_toy_model(3, 2).unwrap();
    let m = qeilab_core::toy::ToyModel {
        modular: tomita_objects(&pair),
        pair,
        ..base
    };
    // ψ puts equal weight on both Schmidt directions of the first factor.
    let mut psi = CVector::zeros(4);
    psi[0] = C64::new(0.5f64.sqrt(), 0.0);
    psi[3] = C64::new(0.5f64.sqrt(), 0.0);
    let prep = minimal_preparation(&m, &psi);
    assert!(prep.norm > 100.0, "{}", prep.norm);
    // Least-squares oracle: Y₁ solving Y₁ ρ_Ω Y₁⁺ = ρ_ψ reproduces the reduced state.
    let y_omega = &prep.y * m.omega();
    let red = |v: &CVector| {
        let c = CMatrix::from_fn(2, 2, |a, b| v[a * 2 + b]);
        &c * c.adjoint()
    };
    assert!((red(&y_omega) - red(&psi)).norm() < 1e-9);
}

#[test]
fn preparation_reproduces_restriction_and_is_minimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for seed in 0..5u64 {
        let m = build_toy_model(seed, 3).unwrap();
        let v = CVector::from_fn(9, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let psi = &v / C64::new(v.norm(), 0.0);
        let prep = minimal_preparation(&m, &psi);
        let y_omega = &prep.y * m.omega();
        for _ in 0..5 {
            let a = random_algebra_element(3, &mut rng);
            let lhs = y_omega.dotc(&(&a * &y_omega));
            let rhs = psi.dotc(&(&a * &psi));
            assert!((lhs - rhs).norm() < 1e-9 * a.norm());
        }
        assert!((op_norm(&prep.y) - prep.norm).abs() < 1e-9 * prep.norm);
        // Any other solution Y₁ W-rotated on the Ω side is no smaller.
        let w = random_unitary(3, &mut rng);
        let c_omega = CMatrix::from_fn(3, 3, |a, b| m.omega()[a * 3 + b]);
        let c_psi = CMatrix::from_fn(3, 3, |a, b| psi[a * 3 + b]);
        let rho_o = &c_omega * c_omega.adjoint();
        let rho_p = &c_psi * c_psi.adjoint();
        let sqrt_p = qeilab_core::operator::HermitianOperator::new(rho_p).unwrap().func_calc(|x| x.max(0.0).sqrt()).unwrap();
        let isqrt_o = qeilab_core::operator::HermitianOperator::new(rho_o).unwrap().func_calc(|x| 1.0 / x.sqrt()).unwrap();
        let other = sqrt_p.entries() * w * isqrt_o.entries();
        assert!(op_norm(&other) >= prep.norm * (1.0 - 1e-9));
    }
}

#[test]
fn local_bound_over_many_cases() {
    let mut violations = 0;
    let mut worst_positive = f64::INFINITY;
    let mut cases = 0;
    for model_seed in 0..10u64 {
        let k = 2 + (model_seed as usize % 3);
        let m = build_toy_model(model_seed, k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(500 + model_seed);
        for case in 0..100 {
            let a = if case % 2 == 0 { lift(&random_unitary(k, &mut rng)) } else { random_algebra_element(k, &mut rng) };
            let scaled_norm = op_norm(&a) / (&a * m.omega()).norm();
            let r = scaled_norm * rng.random_range(1.0..3.0);
            let out = local_bound_evaluate(&m, &a, r).unwrap();
            cases += 1;
            if out.report.lhs - out.report.rhs < -1e-10 {
                violations += 1;
            }
            worst_positive = worst_positive.min(out.positive_part);
            assert!((out.positive_part + out.remainder - out.report.lhs).abs() < 1e-10 * out.report.lhs.abs().max(1.0));
        }
    }
    assert_eq!(cases, 1000);
    assert_eq!(violations, 0);
    assert!(worst_positive >= -1e-12);
}

#[test]
fn local_bound_identity_case() {
    let m = build_toy_model(4, 2).unwrap();
    let out = local_bound_evaluate(&m, &CMatrix::identity(4, 4), 1.0).unwrap();
    assert!((out.report.lhs - m.omega().dotc(&m.rho_omega()).re).abs() < 1e-12);
    assert!((out.report.rhs + m.rho_omega().norm()).abs() < 1e-12);
    assert!(out.report.verdict.passes());
}

#[test]
fn local_bound_rejects_large_operators() {
    let m = build_toy_model(4, 2).unwrap();
    let a = lift(&CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(3.0, 0.0), C64::new(0.1, 0.0)])));
    assert!(matches!(local_bound_evaluate(&m, &a, 0.5), Err(ToyError::NormExceeded { .. })));
}

#[test]
fn nonnegative_case_without_commutant_part() {
    let m = build_toy_model(8, 2).unwrap().with_commutant_factor(&CMatrix::zeros(2, 2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let a = random_algebra_element(2, &mut rng);
        let psi = &a * m.omega();
        assert!(m.rho_g.expectation(&(&psi / C64::new(psi.norm(), 0.0))) >= -1e-12);
    }
}

#[test]
fn commutant_check_rejects_algebra_elements() {
    let m = build_toy_model(8, 2).unwrap();
    let a = lift(&CMatrix::from_fn(2, 2, |i, j| C64::new((i + j) as f64, 0.0)));
    assert!(matches!(m.with_commutant(&a), Err(ToyError::NotInCommutant(_))));
}

fn contraction<R: Rng>(k: usize, rng: &mut R) -> CMatrix {
    let a = random_algebra_element(k, rng);
    let n = op_norm(&a);
    a / C64::new(n * rng.random_range(1.0..2.0), 0.0)
}

#[test]
fn chain_terms_agree() {
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let k = 2 + (i as usize % 3);
        let m = build_toy_model(i / 10, k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + i);
        let y = contraction(k, &mut rng);
        let a = random_algebra_element(k, &mut rng);
        let lambda = rng.random_range(0.1..1.0);
        let c = modular_chain_check(&m, &y, &a, lambda).unwrap();
        assert!(c.max_discrepancy <= 1e-8f64.max(c.quadrature_tail), "triple {i}: {:e}", c.max_discrepancy);
        assert!(c.within_bound);
        worst = worst.max(c.max_discrepancy);
    }
    assert!(worst < 1e-8);
}

#[test]
fn chain_with_identities_reduces_to_one_term() {
    let m = build_toy_model(2, 3).unwrap();
    let id = CMatrix::identity(9, 9);
    let c = modular_chain_check(&m, &id, &id, 0.5).unwrap();
    let kernel = qeilab_core::qei::GaussianKernel::new(0.5).unwrap();
    let direct = m
        .omega()
        .dotc(&m.modular.k.apply_fn(|e| C64::new(kernel.ft(e), 0.0), &m.rho_omega()).unwrap());
    for t in c.terms() {
        assert!((t - direct).norm() < 1e-10);
    }
}

#[test]
fn chain_large_lambda_limit_is_kernel_projection() {
    let m = build_toy_model(6, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let y = contraction(2, &mut rng);
    let a = random_algebra_element(2, &mut rng);
    let c = modular_chain_check(&m, &y, &a, 200.0).unwrap();
    // Projector onto ker K from the eigenvectors of K.
    let eig = m.modular.k.eig();
    let mut p = CMatrix::zeros(4, 4);
    for (i, &l) in m.modular.k.eigenvalues().iter().enumerate() {
        if l.abs() < 1e-9 {
            let v = eig.vectors.column(i);
            p += &v * v.adjoint();
        }
    }
    let j_ya = m.modular.j.apply(&(y.adjoint() * (&a * m.omega())));
    let limit = j_ya.dotc(&(&p * m.rho_omega())) * (2.0 * std::f64::consts::PI).sqrt();
    assert!((c.conjugated - limit).norm() < 1e-6 * limit.norm().max(1e-3));
}

#[test]
fn toy_bound_sweep_passes_below_threshold() {
    for seed in 0..5u64 {
        let m = build_toy_model(seed, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 40);
        let y = lift(&random_unitary(3, &mut rng));
        let sweep = toy_bound_verify(&m, &y, 1e-2, &default_lambda_grid()).unwrap();
        let l0 = sweep.lambda0.expect("passing prefix");
        for row in &sweep.rows {
            if row.lambda.unwrap() <= l0 {
                assert!(row.lhs - row.rhs >= -1e-8 - row.defect_slack);
            }
            assert!(row.preparability >= 0.0);
        }
        for n in &sweep.norms {
            assert!(n.relative_gap() < 1e-12);
        }
    }
}

#[test]
fn vacuum_sweep_always_holds() {
    // (Ω, ϱΩ) = (Ω, Δ^{-1/2} f̂_λ(K) ϱΩ)/√(2π) because KΩ = 0, so Cauchy-Schwarz gives the bound at every λ.
    for seed in 0..5u64 {
        let m = build_toy_model(seed, 2 + seed as usize % 3);
        let m = m.unwrap();
        let d = m.dim();
        let sweep = toy_bound_verify(&m, &CMatrix::identity(d, d), 1e-2, &default_lambda_grid()).unwrap();
        assert!(sweep.rows.iter().all(|r| r.verdict == qeilab_core::qei::Verdict::Holds));
        assert_eq!(sweep.lambda0, Some(4.0));
    }
}
