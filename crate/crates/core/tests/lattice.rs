use std::time::Instant;

use qeilab_core::fock::FockTruncation;
use qeilab_core::modular::{second_quantized_modular, ModularError};
use qeilab_core::operator::{CVector, RVector, C64};
use qeilab_core::qei::{modular_norm, LatticeBoundSetup};
use qeilab_core::scalar::{
    bump_hat, coherent_scaling_sequence, coherent_vector, commutator_defect, energy_damping, energy_density_form,
    hamiltonian, hamiltonian_form, local_squeezer, region_modular, region_modular_energies, weyl_map, BogoliubovMap,
    CauchyDatum, LatticeModel, ScalingSettings, SmearingFunction,
};
use qeilab_oracles::{bump_transform, chain_q, covariance_modular_energies, covariance_modular_energies_dd};

#[test]
fn q_matches_the_stencil() {
    let m = LatticeModel::new(7, 0.3, 1.7).unwrap();
    let oracle = chain_q(7, 0.3, 1.7);
    let ours = m.q().entries().map(|z| z.re);
    assert!((ours - &oracle).norm() < 1e-10 * oracle.norm());
    // ω_k² are the eigenvalues of Q.
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(oracle).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    for (w, e) in m.omega().iter().zip(&ev) {
        assert!((w * w - e).abs() < 1e-10 * e);
    }
}

#[test]
fn modes_are_orthonormal() {
    let m = LatticeModel::new(12, 0.5, 1.0).unwrap();
    let g = m.modes().transpose() * m.modes();
    assert!((g - nalgebra::DMatrix::<f64>::identity(12, 12)).norm() < 1e-12);
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(LatticeModel::new(0, 1.0, 1.0).is_err());
    assert!(LatticeModel::new(4, -1.0, 1.0).is_err());
    assert!(LatticeModel::new(4, 1.0, 0.0).is_err());
}

#[test]
fn region_spectrum_matches_covariance_oracle() {
    let start = Instant::now();
    let cases: [(usize, f64, Vec<usize>); 5] = [
        (8, 0.25, (2..6).collect()),
        (16, 0.125, (4..12).collect()),
        (32, 0.0625, (0..8).collect()),
        (32, 0.0625, (0..12).collect()),
        (64, 0.03125, (0..6).collect()),
    ];
    for (n, a, region) in cases {
        let m = LatticeModel::new(n, a, 1.0).unwrap();
        let ours = region_modular_energies(&m, &region).unwrap();
        let oracle = covariance_modular_energies_dd(n, a, 1.0, &region);
        assert_eq!(ours.len(), oracle.len());
        for (x, y) in ours.iter().zip(&oracle) {
            assert!((x - y).abs() <= 1e-6 * y.abs(), "N={n} region {region:?}: {x} vs {y}");
        }
    }
    assert!(start.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn f64_oracle_agrees_on_small_regions() {
    let m = LatticeModel::new(10, 0.4, 2.0).unwrap();
    let region = [3, 4, 5];
    let ours = region_modular_energies(&m, &region).unwrap();
    let oracle = covariance_modular_energies(10, 0.4, 2.0, &region);
    for (x, y) in ours.iter().zip(&oracle) {
        assert!((x - y).abs() <= 1e-8 * y.abs());
    }
}

#[test]
fn half_chain_modular_objects() {
    let m = LatticeModel::new(16, 0.125, 1.0).unwrap();
    let op = region_modular(&m, &(4..12).collect::<Vec<_>>()).unwrap();
    assert_eq!(op.flagged_count(), 0);
    assert!(op.tomita_residual() < 1e-8, "{:e}", op.tomita_residual());
    let u = &op.eigenvectors;
    let id = qeilab_core::operator::CMatrix::identity(16, 16);
    assert!((u.adjoint() * u - id).norm() < 1e-10);
    let sum: f64 = op.eigen_logs.iter().sum();
    assert!(sum.abs() < 1e-8);
}

#[test]
fn region_errors() {
    let m = LatticeModel::new(8, 0.25, 1.0).unwrap();
    assert!(matches!(region_modular_energies(&m, &[]), Err(ModularError::InvalidRegion { .. })));
    assert!(matches!(region_modular_energies(&m, &[1, 1]), Err(ModularError::InvalidRegion { .. })));
    assert!(matches!(region_modular_energies(&m, &[9]), Err(ModularError::InvalidRegion { .. })));
    assert!(matches!(
        region_modular_energies(&m, &[0, 1, 2, 3, 4]),
        Err(ModularError::SubspaceNotSeparating { .. })
    ));
    assert!(matches!(region_modular(&m, &[0, 1, 2]), Err(ModularError::NotCyclic { .. })));
}

fn setup(n: usize, lambda_region: Vec<usize>, support: Vec<usize>) -> LatticeBoundSetup {
    let model = LatticeModel::new(n, 2.0 / n as f64, 1.0).unwrap();
    let g = SmearingFunction::plateau(n, &support, 0, 0.0, 0.1).unwrap();
    LatticeBoundSetup::for_region(model, g, lambda_region).unwrap()
}

#[test]
fn spectral_norm_matches_second_quantized_route() {
    let s = setup(8, (2..6).collect(), vec![3, 4]);
    let trunc = FockTruncation::new(8, 2);
    let fock = second_quantized_modular(&s.modular, &trunc).unwrap();
    let rho_omega = s.rho.vacuum_image(&trunc);
    for lambda in [4.0, 1.0, 0.5, 0.25] {
        let spectral = s.modular_norm(lambda).unwrap();
        let fock_norm = modular_norm(&fock.data, &rho_omega, lambda).unwrap();
        let rel = (spectral.norm - fock_norm.norm).abs() / fock_norm.norm;
        assert!(rel < 1e-9, "λ={lambda}: {} vs {}", spectral.norm, fock_norm.norm);
        assert!(spectral.relative_gap() < 1e-12);
    }
}

#[test]
fn full_chain_density_is_the_hamiltonian() {
    let m = LatticeModel::new(9, 0.4, 1.3).unwrap();
    let g = SmearingFunction::new(0.0, 0.2, vec![1.0; 9], (0..9).collect()).unwrap();
    let z = energy_density_form(&m, &g);
    let h = hamiltonian_form(&m);
    assert!((&z.number - &h.number).norm() < 1e-9);
    assert!(z.pair.norm() < 1e-9);
    assert_eq!(z.vacuum_expectation(), 0.0);
}

#[test]
fn coherent_hamiltonian_expectation_is_classical_energy() {
    let m = LatticeModel::new(10, 0.3, 1.0).unwrap();
    let datum = CauchyDatum::new(
        RVector::from_fn(10, |i, _| (i as f64 * 0.7).sin()),
        RVector::from_fn(10, |i, _| (i as f64 * 0.3).cos()),
    );
    for mult in [0.5, 1.0, 2.0] {
        let e = hamiltonian_form(&m).gaussian_expectation(&weyl_map(&m, &datum, mult));
        let c = mult * mult * m.classical_energy(&datum);
        assert!((e - c).abs() < 1e-10 * c);
    }
}

#[test]
fn gaussian_expectation_matches_truncated_fock_vector() {
    let m = LatticeModel::new(3, 0.5, 1.0).unwrap();
    let g = SmearingFunction::plateau(3, &[1], 0, 0.0, 0.3).unwrap();
    let z = energy_density_form(&m, &g);
    let trunc = FockTruncation::new(3, 14);
    let beta = CVector::from_vec(vec![C64::new(0.4, 0.1), C64::new(-0.2, 0.3), C64::new(0.05, -0.1)]);
    let v = coherent_vector(&trunc, &beta).unwrap();
    let direct = v.dotc(&(z.to_matrix(&trunc) * &v)).re;
    let exact = z.gaussian_expectation(&BogoliubovMap::displacement(beta));
    assert!((direct - exact).abs() < 1e-9 * exact.abs().max(1.0), "{direct} vs {exact}");
}

#[test]
fn hamiltonian_on_truncation_is_diagonal_in_modes() {
    let m = LatticeModel::new(4, 0.5, 1.0).unwrap();
    let trunc = FockTruncation::new(4, 3);
    let h = hamiltonian(&m, &trunc).unwrap();
    assert!(h.min_eigenvalue().abs() < 1e-12);
    assert!((h.expectation(&trunc.vacuum())).abs() < 1e-14);
}

#[test]
fn squeezer_is_symplectic_and_defect_vanishes_for_identity() {
    let m = LatticeModel::new(8, 0.25, 1.0).unwrap();
    let mut profile = vec![0.0; 8];
    profile[3] = 1.0;
    profile[4] = 0.5;
    let s = local_squeezer(&m, &profile, 0.3);
    assert!(s.symplectic_defect() < 1e-10);
    let g = SmearingFunction::plateau(8, &[3, 4], 1, 0.0, 0.1).unwrap();
    let rho = energy_density_form(&m, &g);
    let h = hamiltonian_form(&m);
    assert_eq!(commutator_defect(&rho, &h, &BogoliubovMap::identity(8)).absolute, 0.0);
    assert!(commutator_defect(&rho, &h, &s).absolute.is_finite());
}

#[test]
fn time_profile_normalization_and_transform() {
    let g = SmearingFunction::plateau(4, &[1], 0, 0.3, 0.25).unwrap();
    assert!((g.g0_integral() - 1.0).abs() < 1e-12);
    for k in [0.0, 0.5, 3.0, 17.0, 40.0] {
        let centered = g.g0_hat(k) * C64::from_polar(1.0, -k * 0.3);
        assert!(centered.im.abs() < 1e-12);
        assert!((centered.re - bump_transform(k * 0.25)).abs() < 1e-10, "k={k}: {} vs {}", centered.re, bump_transform(k * 0.25));
    }
}

#[test]
fn damping_kernel_properties() {
    assert_eq!(bump_hat(0.0), 1.0);
    for k in [0.1, 1.0, 5.0, 30.0] {
        assert!(bump_hat(k).abs() <= 1.0);
    }
    let h = qeilab_core::operator::HermitianOperator::diagonal(&[0.0, 1.0, 4.0]);
    let xi = CVector::from_vec(vec![C64::new(1.0, 0.0); 3]);
    let d = energy_damping(&h, &xi, 1e-6, 1.0);
    assert!(d.residual < 1e-9);
}

#[test]
fn coherent_energy_scales_quadratically() {
    let start = Instant::now();
    let n = 16;
    let m = LatticeModel::new(n, 0.125, 1.0).unwrap();
    let g = SmearingFunction::plateau(n, &[7, 8], 1, 0.0, 0.1).unwrap();
    let mut u = RVector::zeros(n);
    let mut v = RVector::zeros(n);
    for x in 6..10 {
        u[x] = 1.0 - 0.2 * (x as f64 - 7.5).abs();
        v[x] = 0.3;
    }
    let datum = CauchyDatum::new(u, v);
    let report = coherent_scaling_sequence(&m, &g, &datum, &ScalingSettings::default()).unwrap();
    assert!(report.slope_rel_error <= 1e-6, "{:e}", report.slope_rel_error);
    let bound = report.rows.iter().map(|r| r.remainder.abs()).fold(0.0, f64::max);
    assert!(bound.is_finite() && bound < 1e-6 * report.rows.last().unwrap().energy.max(1.0));
    for r in &report.rows {
        assert!(r.truncated_norm >= 1.0 - 1e-8);
        assert!(r.norm_bound >= 1.0);
        assert!(r.within_epsilon);
    }
    assert!(start.elapsed().as_secs_f64() < 120.0);
}
