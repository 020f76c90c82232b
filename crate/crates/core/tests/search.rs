use std::time::Instant;

use qeilab_core::fock::FockTruncation;
use qeilab_core::operator::{CMatrix, CVector, C64};
use qeilab_core::scalar::{energy_density_form, hamiltonian_form, BogoliubovMap, LatticeModel, QuadraticForm, SmearingFunction};
use qeilab_core::search::{
    coherent_form_matrix, coherent_min_closed_form, gaussian_truncation_loss, low_rank_fock_min, minimize_energy,
    CoherentMinimum, SearchBudget, SearchError, SearchProblem, StateFamily,
};
use qeilab_oracles::poisson;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_form(modes: usize, seed: u64) -> QuadraticForm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let a = CMatrix::from_fn(modes, modes, |_, _| c());
    let b = CMatrix::from_fn(modes, modes, |_, _| c());
    let mut z = QuadraticForm::zero(modes);
    z.pair = (&a + a.transpose()) * C64::new(0.25, 0.0);
    z.number = (&b + b.adjoint()) * C64::new(0.5, 0.0);
    z.constant = 0.3;
    z
}

fn problem_for(form: QuadraticForm, n_max: usize) -> SearchProblem {
    let m = form.modes();
    let h = QuadraticForm::number_diagonal(&vec![1.0; m]);
    SearchProblem::new(form, h, FockTruncation::new(m, n_max)).unwrap()
}

fn lattice_problem(seed: u64) -> SearchProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 + (seed as usize % 2);
    let model = LatticeModel::new(n, rng.random_range(0.3..1.0), rng.random_range(0.5..2.0)).unwrap();
    let site = rng.random_range(0..n);
    let g = SmearingFunction::plateau(n, &[site], 1, 0.0, rng.random_range(0.05..0.5)).unwrap();
    SearchProblem::new(energy_density_form(&model, &g), hamiltonian_form(&model), FockTruncation::new(n, 12)).unwrap()
}

#[test]
fn coherent_matrix_reproduces_gaussian_expectation() {
    let z = random_form(3, 1);
    let m = coherent_form_matrix(&z).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let beta = CVector::from_fn(3, |k, _| C64::new(x[k], x[3 + k]));
        let xv = qeilab_core::operator::RVector::from_vec(x);
        let closed = z.constant + xv.dot(&(&m * &xv));
        let direct = z.gaussian_expectation(&BogoliubovMap::displacement(beta));
        assert!((closed - direct).abs() < 1e-12);
    }
}

#[test]
fn positive_forms_have_zero_coherent_minimum() {
    let zero = QuadraticForm::zero(2);
    assert_eq!(coherent_min_closed_form(&zero, None).unwrap().value(), 0.0);
    let single = QuadraticForm::number_diagonal(&[2.5]);
    match coherent_min_closed_form(&single, None).unwrap() {
        CoherentMinimum::Bounded { value, amplitude } => {
            assert_eq!(value, 0.0);
            assert_eq!(amplitude.norm(), 0.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn indefinite_form_is_unbounded_without_radius() {
    let mut z = QuadraticForm::zero(1);
    z.number[(0, 0)] = C64::new(1.0, 0.0);
    z.pair[(0, 0)] = C64::new(1.0, 0.0);
    match coherent_min_closed_form(&z, None).unwrap() {
        CoherentMinimum::UnboundedBelow { lambda_min, direction } => {
            assert!((lambda_min + 1.0).abs() < 1e-12);
            assert!((direction.norm() - 1.0).abs() < 1e-12);
        }
        other => panic!("{other:?}"),
    }
    let bounded = coherent_min_closed_form(&z, Some(0.5)).unwrap();
    assert!((bounded.value() + 0.25).abs() < 1e-12);
    let mut linear = z.clone();
    linear.linear[0] = C64::new(1.0, 0.0);
    assert!(matches!(coherent_form_matrix(&linear), Err(SearchError::Invalid { .. })));
}

#[test]
fn coherent_truncation_loss_is_poisson_tail() {
    for (modes, n_max, beta) in [(1, 10, 1.5), (2, 8, 0.9), (3, 6, 0.5)] {
        let trunc = FockTruncation::new(modes, n_max);
        let b = CVector::from_fn(modes, |k, _| C64::from_polar(beta / (modes as f64).sqrt(), 0.4 * k as f64));
        let loss = gaussian_truncation_loss(&trunc, &BogoliubovMap::displacement(b));
        let kept: f64 = poisson(beta * beta, n_max).iter().sum();
        assert!((loss - (1.0 - kept)).abs() < 1e-12, "{loss:e} vs {:e}", 1.0 - kept);
    }
}

#[test]
fn squeezed_truncation_loss_matches_even_series() {
    let (r, phi) = (0.6_f64, 0.3);
    let t = r.tanh();
    let n_max = 12;
    let mut kept = 0.0;
    let mut p = (1.0 - t * t).sqrt();
    for n in 0..=n_max / 2 {
        if n > 0 {
            let nf = n as f64;
            p *= t * t * (2.0 * nf) * (2.0 * nf - 1.0) / (4.0 * nf * nf);
        }
        kept += p;
    }
    let loss = gaussian_truncation_loss(&FockTruncation::new(1, n_max), &BogoliubovMap::squeezing(&[r], &[phi]));
    assert!((loss - (1.0 - kept)).abs() < 1e-12, "{loss:e} vs {:e}", 1.0 - kept);
}

#[test]
fn optimizer_matches_closed_form_on_indefinite_forms() {
    for seed in 0..4u64 {
        let z = random_form(2, 100 + seed);
        let radius = 0.8;
        let problem = problem_for(z.clone(), 14);
        let exact = coherent_min_closed_form(&z, Some(radius)).unwrap().value();
        let found = minimize_energy(&problem, StateFamily::Coherent { radius }, SearchBudget::default(), seed).unwrap();
        assert!((found.best_value - exact).abs() <= 1e-6, "seed {seed}: {} vs {exact}", found.best_value);
        assert!(found.truncation_loss <= 1e-8);
    }
}

#[test]
fn low_rank_family() {
    let problem = problem_for(random_form(2, 7), 4);
    let rank1 = minimize_energy(&problem, StateFamily::LowRankFock { rank: 1 }, SearchBudget::default(), 3).unwrap();
    assert!((rank1.best_value - 0.3).abs() < 1e-12);
    let lattice = lattice_problem(5);
    let vac = minimize_energy(&lattice, StateFamily::LowRankFock { rank: 1 }, SearchBudget::default(), 3).unwrap();
    assert!(vac.best_value.abs() < 1e-14);
    let mut previous = rank1.best_value;
    for rank in 2..=4 {
        let r = minimize_energy(&problem, StateFamily::LowRankFock { rank }, SearchBudget::default(), 3).unwrap();
        let oracle = low_rank_fock_min(&problem, rank).unwrap();
        assert!((r.best_value - oracle).abs() < 1e-6, "rank {rank}: {} vs {oracle}", r.best_value);
        assert!(r.best_value <= previous + 1e-8);
        previous = r.best_value;
    }
    assert!(matches!(
        minimize_energy(&problem, StateFamily::LowRankFock { rank: 0 }, SearchBudget::default(), 3),
        Err(SearchError::Invalid { field: "rank", .. })
    ));
}

#[test]
fn inadequate_radius_and_bad_problems_are_rejected() {
    let problem = problem_for(random_form(2, 1), 3);
    assert!(matches!(
        minimize_energy(&problem, StateFamily::Coherent { radius: 2.0 }, SearchBudget::default(), 0),
        Err(SearchError::RadiusInadequate { .. })
    ));
    let h = QuadraticForm::number_diagonal(&[1.0]);
    assert!(matches!(
        SearchProblem::new(random_form(2, 1), h, FockTruncation::new(2, 3)),
        Err(SearchError::Dimension(_))
    ));
}

#[test]
fn search_is_deterministic() {
    let problem = problem_for(random_form(2, 11), 12);
    let family = StateFamily::SqueezedCoherent { radius: 0.6, max_squeeze: 0.2 };
    let budget = SearchBudget { max_iters: 2000, tolerance: 1e-12 };
    let a = minimize_energy(&problem, family, budget, 9).unwrap();
    let b = minimize_energy(&problem, family, budget, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lattice_models_match_closed_form_and_nest() {
    let start = Instant::now();
    for seed in 0..20u64 {
        let problem = lattice_problem(seed);
        let radius = 0.7;
        let exact = coherent_min_closed_form(&problem.form, Some(radius)).unwrap().value();
        let coherent = minimize_energy(&problem, StateFamily::Coherent { radius }, SearchBudget::default(), seed).unwrap();
        assert!((coherent.best_value - exact).abs() <= 1e-6, "seed {seed}: {} vs {exact}", coherent.best_value);
        assert_eq!(coherent.bound_consistent, Some(true));
        let squeezed = minimize_energy(
            &problem,
            StateFamily::SqueezedCoherent { radius, max_squeeze: 0.3 },
            SearchBudget::default(),
            seed,
        )
        .unwrap();
        assert!(squeezed.best_value <= coherent.best_value + 1e-8, "seed {seed}");
        assert_eq!(squeezed.bound_consistent, Some(true), "seed {seed}");
        assert!(squeezed.truncation_loss <= 1e-8);
    }
    println!("lattice search: {:.1}s", start.elapsed().as_secs_f64());
    assert!(start.elapsed().as_secs_f64() < 300.0);
}

#[test]
fn passive_mixing_preserves_truncation_loss() {
    let (c, s) = (0.8_f64, 0.6_f64);
    let rotation = BogoliubovMap {
        u: CMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(0.0, -s), C64::new(0.0, -s), C64::new(c, 0.0)]),
        v: CMatrix::zeros(2, 2),
        beta: CVector::zeros(2),
    };
    let beta = CVector::from_vec(vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.0)]);
    let local = BogoliubovMap::displacement(beta).compose(&BogoliubovMap::squeezing(&[0.5, 0.2], &[0.0, 1.0]));
    let mixed = rotation.compose(&local);
    assert!(mixed.v[(0, 1)].norm() > 0.1);
    let trunc = FockTruncation::new(2, 9);
    let a = gaussian_truncation_loss(&trunc, &local);
    let b = gaussian_truncation_loss(&trunc, &mixed);
    assert!(a > 1e-6);
    assert!((a - b).abs() < 1e-12, "{a:e} vs {b:e}");
}
