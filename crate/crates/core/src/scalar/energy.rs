//! Hamiltonian, smeared energy density, coherent states and the divergent
//! coherent sequence.

use std::sync::OnceLock;

use crate::fock::{FockTruncation, TruncationError};
use crate::operator::{CMatrix, CVector, HermitianOperator, RMatrix, C64};
use crate::quadrature::adaptive_legendre;

use super::{BogoliubovMap, CauchyDatum, LatticeModel, QuadraticForm, SmearingFunction};

/// States must keep at least `1 - ADEQUACY_TOL` of their norm inside the truncation.
pub const ADEQUACY_TOL: f64 = 1e-8;

fn check_modes(model: &LatticeModel, trunc: &FockTruncation) -> Result<(), TruncationError> {
    if trunc.mode_basis().nrows() != model.n() {
        return Err(TruncationError::ModeMismatch {
            rows: trunc.mode_basis().nrows(),
            expected: model.n(),
        });
    }
    Ok(())
}

/// `H = Σ ω_k a⁺_k a_k` as a quadratic form.
pub fn hamiltonian_form(model: &LatticeModel) -> QuadraticForm {
    QuadraticForm::number_diagonal(model.omega())
}

/// `H = dΓ(Q^{1/2})` compressed to the truncation.
pub fn hamiltonian(model: &LatticeModel, trunc: &FockTruncation) -> Result<HermitianOperator, TruncationError> {
    check_modes(model, trunc)?;
    let c = trunc.mode_basis();
    if *c == CMatrix::identity(model.n(), model.n()) {
        return Ok(HermitianOperator::diagonal(&trunc.energy_diagonal(model.omega())));
    }
    let h1 = c.adjoint() * hamiltonian_form(model).number * c;
    Ok(HermitianOperator::new(trunc.dgamma(&h1)).expect("dΓ of a Hermitian matrix is Hermitian"))
}

/// Normal-ordered `ϱ(G)` for the density `½π² + ¼((∇⁺φ)² + (∇⁻φ)²) + ½μφ²` smeared with `G`.
pub fn energy_density_form(model: &LatticeModel, g: &SmearingFunction) -> QuadraticForm {
    let n = model.n();
    let mut z = QuadraticForm::zero(n);
    let fields: Vec<CVector> = (0..n).map(|x| model.field_coefficients(x)).collect();
    let inv_a = 1.0 / model.a();
    for (x, &gx) in g.weights().iter().enumerate() {
        if gx == 0.0 {
            continue;
        }
        let w = model.a() * gx;
        let next = (x + 1) % n;
        let prev = (x + n - 1) % n;
        let mut terms = vec![(model.momentum_coefficients(x), 0.5), (&fields[x] * C64::new(1.0, 0.0), 0.5 * model.mu())];
        if n > 1 {
            terms.push(((&fields[next] - &fields[x]) * C64::new(inv_a, 0.0), 0.25));
            terms.push(((&fields[x] - &fields[prev]) * C64::new(inv_a, 0.0), 0.25));
        }
        for (coef, wt) in terms {
            let bar = coef.map(|c| c.conj());
            let s = C64::new(w * wt, 0.0);
            z.pair += &bar * bar.transpose() * s;
            z.number += &bar * coef.transpose() * (s * 2.0);
        }
    }
    let omega = model.omega();
    for k in 0..n {
        for l in 0..n {
            z.pair[(k, l)] *= g.g0_hat(omega[k] + omega[l]);
            z.number[(k, l)] *= g.g0_hat(omega[k] - omega[l]);
        }
    }
    z
}

/// `ϱ(G)` on the truncation together with its quadratic-form coefficients.
pub fn energy_density_operator(
    model: &LatticeModel,
    trunc: &FockTruncation,
    g: &SmearingFunction,
) -> Result<(HermitianOperator, QuadraticForm), TruncationError> {
    check_modes(model, trunc)?;
    if g.weights().len() != model.n() {
        return Err(TruncationError::ModeMismatch {
            rows: g.weights().len(),
            expected: model.n(),
        });
    }
    let form = energy_density_form(model, g);
    let m = form.to_matrix(trunc);
    let sym = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    Ok((HermitianOperator::new(sym).expect("symmetrized"), form))
}

/// Displacement amplitudes `β = i m α / √2` of `W(m(u⊕v))`.
pub fn weyl_amplitudes(model: &LatticeModel, datum: &CauchyDatum, m: f64) -> CVector {
    let alpha = model.datum_amplitudes(datum).expect("datum length checked by caller");
    alpha * C64::new(0.0, m / std::f64::consts::SQRT_2)
}

/// Heisenberg map of the Weyl operator `W(m(u⊕v))`.
pub fn weyl_map(model: &LatticeModel, datum: &CauchyDatum, m: f64) -> BogoliubovMap {
    BogoliubovMap::displacement(weyl_amplitudes(model, datum, m))
}

/// Truncated coherent vector `D(β)Ω` for amplitudes `β` in full mode coordinates.
///
/// Amplitude components outside the retained modes count as lost norm.
pub fn coherent_vector(trunc: &FockTruncation, beta: &CVector) -> Result<CVector, TruncationError> {
    let local = trunc.mode_basis().adjoint() * beta;
    let prefactor = (-0.5 * beta.norm_squared()).exp();
    let mut v = CVector::zeros(trunc.dim());
    for i in 0..trunc.dim() {
        let mut c = C64::new(prefactor, 0.0);
        for (k, &nk) in trunc.occupation(i).iter().enumerate() {
            for q in 1..=nk as usize {
                c *= local[k] / (q as f64).sqrt();
            }
        }
        v[i] = c;
    }
    let achieved = v.norm();
    if !(achieved >= 1.0 - ADEQUACY_TOL) {
        return Err(TruncationError::Inadequate {
            achieved,
            tolerance: ADEQUACY_TOL,
        });
    }
    Ok(v / C64::new(achieved, 0.0))
}

/// Normalized truncated `W(m(u⊕v))Ω`.
pub fn coherent_state(
    model: &LatticeModel,
    trunc: &FockTruncation,
    datum: &CauchyDatum,
    m: f64,
) -> Result<CVector, TruncationError> {
    check_modes(model, trunc)?;
    coherent_vector(trunc, &weyl_amplitudes(model, datum, m))
}

/// Matrix of `D(β) = exp(β·a⁺ − β̄·a)` on the truncation, with `β` in truncation mode coordinates.
pub fn displacement_matrix(trunc: &FockTruncation, beta: &CVector) -> CMatrix {
    // D(β) = exp(-i X) with X = i(β a⁺ − β̄ a) Hermitian.
    let mut gen = QuadraticForm::zero(trunc.n_modes());
    gen.linear = beta * C64::new(0.0, 1.0);
    let m = gen.local_matrix(trunc);
    let h = HermitianOperator::new((&m + m.adjoint()) * C64::new(0.5, 0.0)).expect("symmetrized");
    h.unitary_group(-1.0)
}

/// Relative energy-commutator defect `‖[ϱ, A]Ω − H A Ω‖ / ‖H A Ω‖` for explicit matrices
/// (absolute when the denominator is below 1e-12).
pub fn commutator_defect_matrix(rho: &CMatrix, h: &CMatrix, a: &CMatrix, omega: &CVector) -> f64 {
    let a_omega = a * omega;
    let lhs = rho * &a_omega - a * (rho * omega);
    let ha = h * &a_omega;
    let num = (lhs - &ha).norm();
    let den = ha.norm();
    if den < 1e-12 {
        num
    } else {
        num / den
    }
}

/// Energy-commutator defect of a Gaussian unitary `S`, computed exactly from quadratic forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDefect {
    /// `‖[ϱ, S]Ω − H S Ω‖`.
    pub absolute: f64,
    /// `‖H S Ω‖`.
    pub scale: f64,
}

impl GaussianDefect {
    pub fn relative(&self) -> f64 {
        if self.scale < 1e-12 {
            self.absolute
        } else {
            self.absolute / self.scale
        }
    }
}

/// Exact defect for `A = S`: `‖(S⁺(ϱ − H)S − (ϱ − H))Ω‖`, scaled by `‖S⁺HSΩ‖`.
pub fn commutator_defect(rho: &QuadraticForm, h: &QuadraticForm, map: &BogoliubovMap) -> GaussianDefect {
    let z = rho.sub(h);
    GaussianDefect {
        absolute: z.transform(map).sub(&z).vacuum_image_norm(),
        scale: h.transform(map).vacuum_image_norm(),
    }
}

/// Phase-space map of the local squeezer `φ(f) -> e^θ φ(f)`, `π(f) -> e^{-θ} π(f)` for a
/// profile with `a Σ f² = 1`; returns the Heisenberg map.
pub fn local_squeezer(model: &LatticeModel, profile: &[f64], theta: f64) -> BogoliubovMap {
    let n = model.n();
    let norm = (model.a() * profile.iter().map(|f| f * f).sum::<f64>()).sqrt();
    let f: Vec<f64> = profile.iter().map(|x| x / norm).collect();
    let mut e = RMatrix::identity(2 * n, 2 * n);
    let (up, down) = (theta.exp() - 1.0, (-theta).exp() - 1.0);
    for x in 0..n {
        for y in 0..n {
            let p = model.a() * f[x] * f[y];
            e[(x, y)] += up * p;
            e[(n + x, n + y)] += down * p;
        }
    }
    let e = e.map(|v| C64::new(v, 0.0));
    BogoliubovMap::from_phase_space(&model.annihilation_map(), &model.phase_space_map(), &e, &CVector::zeros(2 * n))
}

fn bump_norm() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| 2.0 * adaptive_legendre(bump_profile, 0.0, 1.0, 1e-15).value)
}

fn bump_profile(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Smooth bump `h(t) ∝ exp(-1/(1 - t²))` on `[-1, 1]` with unit integral.
pub fn bump(t: f64) -> f64 {
    bump_profile(t) / bump_norm()
}

/// `ĥ(k) = ∫ h(t) e^{ikt} dt` (real since `h` is even); `ĥ(0) = 1`, `|ĥ| ≤ 1`.
pub fn bump_hat(k: f64) -> f64 {
    if k == 0.0 {
        return 1.0;
    }
    2.0 * adaptive_legendre(|t| bump_profile(t) * (k * t).cos(), 0.0, 1.0, 1e-14).value / bump_norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DampingResult {
    pub damped: CVector,
    /// `‖(1 + H)^ν (ξ − ĥ(κH) ξ)‖`.
    pub residual: f64,
}

/// `ĥ(κH)ξ` and the energy-weighted residual.
pub fn energy_damping(h: &HermitianOperator, xi: &CVector, kappa: f64, nu: f64) -> DampingResult {
    let damped = h
        .apply_fn(|e| C64::new(bump_hat(kappa * e), 0.0), xi)
        .expect("bounded function");
    let diff = xi - &damped;
    let weighted = h
        .apply_fn(|e| C64::new((1.0 + e.max(0.0)).powf(nu), 0.0), &diff)
        .expect("finite on a nonnegative spectrum");
    DampingResult {
        damped,
        residual: weighted.norm(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSettings {
    pub m_list: Vec<f64>,
    /// Allowed `‖B_m‖ − 1`.
    pub epsilon: f64,
    /// Damping scale numerator; `κ_m = kappa0 / (1 + m² E)`.
    pub kappa0: f64,
    /// Relative change under doubling `n_max` below which a truncation is accepted.
    pub doubling_tol: f64,
    pub max_n_max: usize,
}

impl Default for ScalingSettings {
    fn default() -> Self {
        Self {
            m_list: (1..=6).map(f64::from).collect(),
            epsilon: 1e-2,
            kappa0: 1e-4,
            doubling_tol: 1e-6,
            max_n_max: 1 << 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub m: f64,
    /// `(B_mΩ, H B_mΩ)`.
    pub energy: f64,
    /// `½ m² (⟨u,Qu⟩ + ⟨v,v⟩)`.
    pub classical: f64,
    /// `(A_mΩ, ϱ(G) A_mΩ)` in the exact Gaussian state.
    pub rho_expectation: f64,
    /// `(A_m⁺A_mΩ, ϱ(G)Ω)` with the truncated Weyl matrix.
    pub remainder: f64,
    /// `‖ĥ(κH)A_mΩ‖` before normalization.
    pub damped_norm: f64,
    /// Bound on `‖B_m‖` from `‖ĥ(κH)‖ ≤ 1`: `1 / damped_norm`.
    pub norm_bound: f64,
    pub kappa: f64,
    pub n_max: usize,
    pub truncated_norm: f64,
    /// Relative energy-commutator defect of `A_m`.
    pub defect: f64,
    /// `norm_bound ≤ 1 + ε`.
    pub within_epsilon: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub fitted_slope: f64,
    pub expected_slope: f64,
    pub slope_rel_error: f64,
}

struct ModeRun {
    energy: f64,
    damped_norm: f64,
    truncated_norm: f64,
    remainder: f64,
}

fn single_mode_run(
    trunc: &FockTruncation,
    omega_bar: f64,
    amplitude: f64,
    kappa: f64,
    rho: &QuadraticForm,
) -> Result<ModeRun, TruncationError> {
    let beta = CVector::from_element(1, C64::new(amplitude, 0.0));
    let prefactor = (-0.5 * amplitude * amplitude).exp();
    let mut raw = CVector::zeros(trunc.dim());
    let mut c = prefactor;
    for n in 0..trunc.dim() {
        if n > 0 {
            c *= amplitude / (n as f64).sqrt();
        }
        raw[n] = C64::new(c, 0.0);
    }
    let truncated_norm = raw.norm();
    let h = HermitianOperator::diagonal(&trunc.energy_diagonal(&[omega_bar]));
    let state = &raw / C64::new(truncated_norm, 0.0);
    let damped = energy_damping(&h, &state, kappa, 0.0).damped;
    let damped_norm = damped.norm();
    let b = &damped / C64::new(damped_norm, 0.0);
    let energy = h.expectation(&b);
    let remainder = if trunc.n_max() >= 2 {
        let w = displacement_matrix(trunc, &beta);
        let wtw_omega = w.adjoint() * (&w * trunc.vacuum());
        let rho_omega = rho.vacuum_image(trunc);
        wtw_omega.dotc(&rho_omega).re
    } else {
        0.0
    };
    Ok(ModeRun {
        energy,
        damped_norm,
        truncated_norm,
        remainder,
    })
}

/// Coherent sequence `A_m = W(m(u⊕v))`, damped as `B_mΩ ∝ ĥ(κ_m H)A_mΩ`.
///
/// The coherent vector lives in the single mode `b = a(β̂)`, so the truncation is that
/// mode with an adaptive cutoff, doubled until the energy changes by less than
/// `doubling_tol` and the truncated norm reaches `1 - ADEQUACY_TOL`.
pub fn coherent_scaling_sequence(
    model: &LatticeModel,
    g: &SmearingFunction,
    datum: &CauchyDatum,
    settings: &ScalingSettings,
) -> Result<ScalingReport, TruncationError> {
    let rho = energy_density_form(model, g);
    let h = hamiltonian_form(model);
    let unit = weyl_amplitudes(model, datum, 1.0);
    let unit_norm = unit.norm();
    let e1 = model.classical_energy(datum);
    let mut rows = Vec::with_capacity(settings.m_list.len());
    for (index, &m) in settings.m_list.iter().enumerate() {
        let amplitude = m.abs() * unit_norm;
        let classical = m * m * e1;
        let kappa = settings.kappa0 / (1.0 + m * m * e1);
        let map = weyl_map(model, datum, m);
        let rho_expectation = rho.gaussian_expectation(&map);
        let defect = commutator_defect(&rho, &h, &map).relative();
        if amplitude == 0.0 {
            rows.push(ScalingRow {
                m,
                energy: 0.0,
                classical,
                rho_expectation,
                remainder: 0.0,
                damped_norm: 1.0,
                norm_bound: 1.0,
                kappa,
                n_max: 0,
                truncated_norm: 1.0,
                defect,
                within_epsilon: true,
            });
            continue;
        }
        let mode = unit.map(|z| z / unit_norm);
        let omega_bar: f64 = mode
            .iter()
            .zip(model.omega())
            .map(|(z, w)| z.norm_sqr() * w)
            .sum();
        let mode_basis = CMatrix::from_column_slice(model.n(), 1, mode.as_slice());
        let mut n_max = ((amplitude * amplitude + 10.0 * amplitude + 10.0).ceil() as usize).max(8);
        let mut previous: Option<ModeRun> = None;
        loop {
            if n_max > settings.max_n_max {
                let achieved = previous.map(|p| p.truncated_norm).unwrap_or(0.0);
                return Err(TruncationError::InadequateAt { index, achieved });
            }
            let trunc = FockTruncation::with_modes(mode_basis.clone(), n_max);
            let run = single_mode_run(&trunc, omega_bar, amplitude, kappa, &rho)?;
            if let Some(prev) = &previous {
                let change = (run.energy - prev.energy).abs() / run.energy.abs().max(1e-300);
                if change < settings.doubling_tol && run.truncated_norm >= 1.0 - ADEQUACY_TOL {
                    rows.push(ScalingRow {
                        m,
                        energy: run.energy,
                        classical,
                        rho_expectation,
                        remainder: run.remainder,
                        damped_norm: run.damped_norm,
                        norm_bound: 1.0 / run.damped_norm,
                        kappa,
                        n_max,
                        truncated_norm: run.truncated_norm,
                        defect,
                        within_epsilon: 1.0 / run.damped_norm <= 1.0 + settings.epsilon,
                    });
                    break;
                }
            }
            previous = Some(run);
            n_max *= 2;
        }
    }
    let (num, den) = rows
        .iter()
        .fold((0.0, 0.0), |(n, d), r| (n + r.m * r.m * r.energy, d + r.m.powi(4)));
    let fitted_slope = if den > 0.0 { num / den } else { 0.0 };
    let expected_slope = e1;
    let slope_rel_error = if expected_slope != 0.0 {
        (fitted_slope - expected_slope).abs() / expected_slope.abs()
    } else {
        fitted_slope.abs()
    };
    Ok(ScalingReport {
        rows,
        fitted_slope,
        expected_slope,
        slope_rel_error,
    })
}
