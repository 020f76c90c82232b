use num_complex::Complex64;
use proptest::prelude::*;
use qeilab_core::modular::{
    modular_flow, one_particle_modular, random_algebra_element, tomita_objects, CyclicSeparatingPair, ModularError,
};
use qeilab_core::operator::{CMatrix, CVector, C64};
use qeilab_oracles::{delta_from_reduced, hermitian_eigenvalues, realified_delta_spectrum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair(seed: u64, k: usize) -> CyclicSeparatingPair {
    CyclicSeparatingPair::random(k, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn defining_property_on_random_pairs() {
    for seed in 0..10u64 {
        let k = 2 + (seed as usize % 3);
        let p = pair(seed, k);
        let md = tomita_objects(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for _ in 0..20 {
            let a = random_algebra_element(k, &mut rng);
            let r = md.defining_property_residual(&a);
            assert!(r <= 1e-9 * a.norm().max(1.0), "seed {seed}: {r:e}");
        }
    }
}

#[test]
fn delta_matches_reduced_density_oracle() {
    for seed in 0..6u64 {
        let k = 2 + (seed as usize % 3);
        let p = pair(seed, k);
        let md = tomita_objects(&p);
        let omega: Vec<Complex64> = p.omega().iter().copied().collect();
        let oracle = delta_from_reduced(&omega, k);
        let ours = md.delta_power(1.0);
        let err = (&ours - &oracle).norm() / oracle.norm();
        assert!(err < 1e-10, "seed {seed}: {err:e}");
    }
}

#[test]
fn maximally_entangled_vector_is_tracial() {
    let p = CyclicSeparatingPair::maximally_entangled(3);
    let md = tomita_objects(&p);
    let id = CMatrix::identity(9, 9);
    assert!((md.delta_power(1.0) - &id).norm() < 1e-12);
    assert!(md.k.operator_norm() < 1e-12);
}

#[test]
fn j_delta_intertwining() {
    let md = tomita_objects(&pair(7, 3));
    assert!(md.intertwining_defect() < 1e-10);
}

#[test]
fn modular_flow_stays_in_the_algebra_and_fixes_omega() {
    let k = 3;
    let md = tomita_objects(&pair(3, k));
    let a = random_algebra_element(k, &mut ChaCha8Rng::seed_from_u64(9));
    for s in [-1.3, 0.4, 2.0] {
        let flowed = modular_flow(&md, &a, k, s).unwrap();
        assert!(qeilab_core::modular::membership_defect(&flowed, k) < 1e-10);
        let u = md.flow_unitary(s);
        assert!((&u * &md.omega - &md.omega).norm() < 1e-12);
    }
}

#[test]
fn kms_condition_for_the_flow() {
    // (Ω, A σ_{-i}(B) Ω) = (Ω, B A Ω) with σ_{-i}(B) = Δ B Δ⁻¹.
    let k = 2;
    let md = tomita_objects(&pair(11, k));
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = random_algebra_element(k, &mut rng);
    let b = random_algebra_element(k, &mut rng);
    let shifted = md.delta_power(1.0) * &b * md.delta_power(-1.0);
    let lhs = md.omega.dotc(&(&a * &shifted * &md.omega));
    let rhs = md.omega.dotc(&(&b * &a * &md.omega));
    assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0));
}

#[test]
fn rejects_elements_outside_the_algebra() {
    let k = 2;
    let md = tomita_objects(&pair(1, k));
    let outside = CMatrix::identity(k, k).kronecker(&CMatrix::from_fn(k, k, |i, j| C64::new((i + 2 * j) as f64, 0.0)));
    assert!(matches!(modular_flow(&md, &outside, k, 0.5), Err(ModularError::NotInAlgebra { .. })));
}

#[test]
fn product_vector_is_not_separating() {
    let mut v = CVector::zeros(4);
    v[0] = C64::new(1.0, 0.0);
    assert!(matches!(CyclicSeparatingPair::new(2, v), Err(ModularError::NotSeparating { .. })));
}

#[test]
fn delta_spectrum_from_schmidt_ratios() {
    let p = CyclicSeparatingPair::from_schmidt(&[0.7, 0.2, 0.1]).unwrap();
    let md = tomita_objects(&p);
    let mut ev: Vec<f64> = md.delta.eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let probs = [0.7, 0.2, 0.1];
    let mut expected: Vec<f64> = probs.iter().flat_map(|a| probs.iter().map(move |b| a / b)).collect();
    expected.sort_by(f64::total_cmp);
    for (x, y) in ev.iter().zip(&expected) {
        assert!((x - y).abs() < 1e-12 * y.max(1.0));
    }
    let oracle = hermitian_eigenvalues(&md.delta_power(1.0));
    for (x, y) in oracle.iter().zip(&expected) {
        assert!((x - y).abs() < 1e-10 * y.max(1.0));
    }
}

fn random_real_basis(n: usize, seed: u64) -> Vec<CVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = qeilab_core::modular::random_gaussian_matrix(n, n, &mut rng);
    (0..n).map(|j| g.column(j).into_owned()).collect()
}

#[test]
fn one_particle_spectrum_matches_realified_oracle() {
    for seed in 0..5 {
        let basis = random_real_basis(4, seed);
        let op = one_particle_modular(&basis).unwrap();
        let mut ours: Vec<f64> = op.log_delta1.eigenvalues().iter().map(|l| l.exp()).collect();
        ours.sort_by(f64::total_cmp);
        let oracle_basis: Vec<_> = basis.iter().map(|v| nalgebra::DVector::from_iterator(v.len(), v.iter().copied())).collect();
        let oracle = realified_delta_spectrum(&oracle_basis);
        for (x, y) in ours.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-8 * y.max(1.0), "seed {seed}: {x} vs {y}");
        }
        assert!(op.tomita_residual() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn defining_property_holds_for_any_seed(seed in any::<u64>(), k in 2usize..5) {
        let p = pair(seed, k);
        let md = tomita_objects(&p);
        let a = random_algebra_element(k, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        prop_assert!(md.defining_property_residual(&a) <= 1e-8 * a.norm().max(1.0));
    }
}
