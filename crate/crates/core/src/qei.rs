//! Both sides of the energy bounds, λ sweeps, and the domain divergence scan.
//!
//! The bound under test is
//! `(ψ, ϱ(G)ψ) ≥ −ε − ‖Δ^{−1/2} f̂_λ(K) ϱ(G)Ω‖` for small λ, where `f̂_λ(k) =
//! √(2π) e^{−(λk)²/2}` and `Δ`, `K = log Δ` belong to a region containing the
//! smearing support.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::modular::{ModularData, ModularError, OneParticleModular};
use crate::operator::{CMatrix, CVector, C64};
use crate::quadrature::adaptive_legendre;
use crate::scalar::{
    commutator_defect, energy_density_form, hamiltonian_form, region_modular, BogoliubovMap, LatticeModel,
    QuadraticForm, SmearingFunction,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Modular(#[from] ModularError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> BoundError {
    BoundError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// `f_λ(s) = e^{−(s/λ)²/2}/λ` and its transform `f̂_λ(k) = √(2π) e^{−(λk)²/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernel {
    lambda: f64,
}

impl GaussianKernel {
    pub fn new(lambda: f64) -> Result<Self, BoundError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be positive and finite, got {lambda}")));
        }
        let kernel = Self { lambda };
        debug_assert!((kernel.eval(0.0) * lambda - 1.0).abs() < 1e-15);
        debug_assert!((kernel.ft(0.0) - (2.0 * PI).sqrt()).abs() < 1e-15);
        Ok(kernel)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eval(&self, s: f64) -> f64 {
        let x = s / self.lambda;
        (-0.5 * x * x).exp() / self.lambda
    }

    pub fn ft(&self, k: f64) -> f64 {
        let x = self.lambda * k;
        (2.0 * PI).sqrt() * (-0.5 * x * x).exp()
    }

    /// `∫ f_λ(s) cos(sk) ds` by adaptive quadrature over `|s| ≤ 40λ`.
    pub fn ft_by_quadrature(&self, k: f64) -> f64 {
        let cut = 40.0 * self.lambda;
        2.0 * adaptive_legendre(|s| self.eval(s) * (s * k).cos(), 0.0, cut, 1e-13).value
    }
}

pub fn gaussian_kernel_eval(lambda: f64, s: f64) -> Result<f64, BoundError> {
    Ok(GaussianKernel::new(lambda)?.eval(s))
}

pub fn gaussian_kernel_ft(lambda: f64, k: f64) -> Result<f64, BoundError> {
    Ok(GaussianKernel::new(lambda)?.ft(k))
}

/// Dyadic grid `{2^{-j} : j = -2..=10}`, largest first.
pub fn default_lambda_grid() -> Vec<f64> {
    (-2..=10).map(|j| 2f64.powi(-j)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    HoldsWithinSlack,
    Violated,
}

impl Verdict {
    pub fn from_sides(lhs: f64, rhs: f64, slack: f64) -> Self {
        if lhs >= rhs {
            Verdict::Holds
        } else if lhs >= rhs - slack {
            Verdict::HoldsWithinSlack
        } else {
            Verdict::Violated
        }
    }

    pub fn passes(self) -> bool {
        self != Verdict::Violated
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::HoldsWithinSlack => "holds-within-slack",
            Verdict::Violated => "violated",
        }
    }
}

/// One evaluation of an energy bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub epsilon: f64,
    /// `None` for bounds without a modular kernel.
    pub lambda: Option<f64>,
    /// Commutator defect plus preparability surrogate.
    pub defect_slack: f64,
    pub commutator_defect: f64,
    pub preparability: f64,
    pub verdict: Verdict,
    pub model_id: String,
    pub region_ids: String,
    pub seed: u64,
}

impl BoundReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lhs: f64,
        rhs: f64,
        epsilon: f64,
        lambda: Option<f64>,
        commutator_defect: f64,
        preparability: f64,
        model_id: impl Into<String>,
        region_ids: impl Into<String>,
        seed: u64,
    ) -> Self {
        let defect_slack = commutator_defect + preparability;
        Self {
            lhs,
            rhs,
            epsilon,
            lambda,
            defect_slack,
            commutator_defect,
            preparability,
            verdict: Verdict::from_sides(lhs, rhs, defect_slack),
            model_id: model_id.into(),
            region_ids: region_ids.into(),
            seed,
        }
    }
}

/// `‖Δ^{−1/2} f̂_λ(K) ϱ(G)Ω‖` written two ways: kernel then `Δ^{−1/2}`, and
/// `√(2π) e^{−(λK)²/2}` applied after `Δ^{−1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularNorm {
    pub norm: f64,
    pub alternate: f64,
}

impl ModularNorm {
    pub fn relative_gap(&self) -> f64 {
        (self.norm - self.alternate).abs() / self.norm.abs().max(f64::MIN_POSITIVE)
    }
}

/// Norm on a finite-dimensional pair from `K` and `Δ` as separate operators.
pub fn modular_norm(md: &ModularData, rho_omega: &CVector, lambda: f64) -> Result<ModularNorm, BoundError> {
    let kernel = GaussianKernel::new(lambda)?;
    if rho_omega.len() != md.k.dim() {
        return Err(BoundError::Dimension(format!(
            "vector of length {} for a modular operator of dimension {}",
            rho_omega.len(),
            md.k.dim()
        )));
    }
    let smoothed = md.k.apply_fn(|x| C64::new(kernel.ft(x), 0.0), rho_omega).expect("bounded");
    let norm = md
        .delta
        .apply_fn(|d| C64::new(d.powf(-0.5), 0.0), &smoothed)
        .map_err(|e| BoundError::Modular(e.into()))?
        .norm();
    let inverse_root = md
        .delta
        .apply_fn(|d| C64::new(d.powf(-0.5), 0.0), rho_omega)
        .map_err(|e| BoundError::Modular(e.into()))?;
    let alternate = (2.0 * PI).sqrt()
        * md.k
            .apply_fn(|x| C64::new((-0.5 * (lambda * x).powi(2)).exp(), 0.0), &inverse_root)
            .expect("bounded")
            .norm();
    Ok(ModularNorm { norm, alternate })
}

/// `−ε − ‖Δ^{−1/2} f̂_λ(K) ϱ(G)Ω‖`.
pub fn modular_bound_rhs(md: &ModularData, rho_omega: &CVector, lambda: f64, epsilon: f64) -> Result<f64, BoundError> {
    Ok(-epsilon - modular_norm(md, rho_omega, lambda)?.norm)
}

/// Nested site sets `O ⊂ O× ⊂ O♭ ⊂ O♯` on a periodic chain, with the time half-width of `O`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionNest {
    pub n: usize,
    pub o: Vec<usize>,
    pub o_cross: Vec<usize>,
    pub o_flat: Vec<usize>,
    pub o_sharp: Vec<usize>,
    pub time_extent: f64,
}

fn ring_distance(n: usize, x: usize, y: usize) -> usize {
    let d = x.abs_diff(y);
    d.min(n - d)
}

/// Number of buffer sites between `inner` and the complement of `outer`; 0 when they touch
/// or `inner` leaves `outer`.
fn margin(n: usize, inner: &[usize], outer: &[usize]) -> usize {
    if inner.iter().any(|x| !outer.contains(x)) {
        return 0;
    }
    let outside: Vec<usize> = (0..n).filter(|x| !outer.contains(x)).collect();
    inner
        .iter()
        .flat_map(|&x| outside.iter().map(move |&y| ring_distance(n, x, y)))
        .min()
        .map_or(n, |d| d - 1)
}

fn centered(n: usize, len: usize) -> Vec<usize> {
    let start = (n - len) / 2;
    (start..start + len).collect()
}

impl RegionNest {
    pub fn new(
        n: usize,
        o: Vec<usize>,
        o_cross: Vec<usize>,
        o_flat: Vec<usize>,
        o_sharp: Vec<usize>,
        time_extent: f64,
    ) -> Result<Self, BoundError> {
        let nest = Self {
            n,
            o,
            o_cross,
            o_flat,
            o_sharp,
            time_extent,
        };
        for (name, set) in nest.named() {
            if set.is_empty() {
                return Err(invalid("regions", format!("{name} is empty")));
            }
            if let Some(x) = set.iter().find(|&&x| x >= n) {
                return Err(invalid("regions", format!("{name} contains site {x} outside 0..{n}")));
            }
        }
        let levels = nest.named();
        for w in levels.windows(2) {
            let (inner_name, inner) = w[0];
            let (outer_name, outer) = w[1];
            if margin(n, inner, outer) == 0 {
                return Err(invalid(
                    "regions",
                    format!("{inner_name} must lie strictly inside {outer_name} with a positive margin"),
                ));
            }
        }
        if nest.o_sharp.len() >= n {
            return Err(invalid("regions", "o_sharp needs a nonempty complement"));
        }
        if !(time_extent > 0.0) {
            return Err(invalid("regions", "time_extent must be positive"));
        }
        Ok(nest)
    }

    /// `O♯` the middle half of the chain, margins of `max(1, N/16)` sites inward, and `O`
    /// the middle `max(1, N/8)` sites.
    pub fn default_for(n: usize, time_extent: f64) -> Result<Self, BoundError> {
        if n < 8 || n % 2 != 0 {
            return Err(invalid("model.n", format!("default regions need an even chain of at least 8 sites, got {n}")));
        }
        let m = (n / 16).max(1);
        let sharp = centered(n, n / 2);
        let flat = centered(n, n / 2 - 2 * m);
        let cross = centered(n, n / 2 - 4 * m);
        let o = centered(n, (n / 8).max(1).min(cross.len().saturating_sub(2 * m)).max(1));
        Self::new(n, o, cross, flat, sharp, time_extent)
    }

    fn named(&self) -> [(&'static str, &[usize]); 4] {
        [
            ("o", &self.o),
            ("o_cross", &self.o_cross),
            ("o_flat", &self.o_flat),
            ("o_sharp", &self.o_sharp),
        ]
    }

    /// Margins `O→O×`, `O×→O♭`, `O♭→O♯` in sites.
    pub fn margins(&self) -> [usize; 3] {
        [
            margin(self.n, &self.o, &self.o_cross),
            margin(self.n, &self.o_cross, &self.o_flat),
            margin(self.n, &self.o_flat, &self.o_sharp),
        ]
    }

    /// Compact label such as `o=7-8;cross=6-9;flat=5-10;sharp=4-11`.
    pub fn label(&self) -> String {
        let span = |s: &[usize]| match (s.iter().min(), s.iter().max()) {
            (Some(a), Some(b)) if b - a + 1 == s.len() => format!("{a}-{b}"),
            _ => s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("."),
        };
        format!(
            "o={};cross={};flat={};sharp={}",
            span(&self.o),
            span(&self.o_cross),
            span(&self.o_flat),
            span(&self.o_sharp)
        )
    }
}

/// Modular data of `O♯` together with `ϱ(G)` for one lattice configuration.
#[derive(Debug, Clone)]
pub struct LatticeBoundSetup {
    pub model: LatticeModel,
    pub smearing: SmearingFunction,
    /// Present for bound verification; the divergence scan only needs `O♯`.
    pub nest: Option<RegionNest>,
    pub o_sharp: Vec<usize>,
    pub modular: OneParticleModular,
    /// Unclipped `log δ` per modular eigenvector; directions past the matrix clip keep
    /// their double-double value because the spectral route never forms `Δ`.
    pub spectral_logs: Vec<f64>,
    pub rho: QuadraticForm,
    pub hamiltonian: QuadraticForm,
    /// `ϱ(G)Ω = Σ X_ij a⁺(u_i) a⁺(u_j)Ω` in the modular eigenbasis `u_i`.
    pair_in_modular_basis: CMatrix,
}

impl LatticeBoundSetup {
    pub fn new(model: LatticeModel, smearing: SmearingFunction, nest: RegionNest) -> Result<Self, BoundError> {
        if nest.n != model.n() {
            return Err(BoundError::Dimension(format!(
                "regions for {} sites on a chain of {}",
                nest.n,
                model.n()
            )));
        }
        if let Some(x) = smearing.support().iter().find(|x| !nest.o_cross.contains(x)) {
            return Err(invalid("smearing", format!("support site {x} lies outside o_cross")));
        }
        let o_sharp = nest.o_sharp.clone();
        Self::build(model, smearing, Some(nest), o_sharp)
    }

    /// Setup for the divergence scan: only `O♯ ⊃ supp G` is needed.
    pub fn for_region(model: LatticeModel, smearing: SmearingFunction, o_sharp: Vec<usize>) -> Result<Self, BoundError> {
        if let Some(x) = smearing.support().iter().find(|x| !o_sharp.contains(x)) {
            return Err(invalid("smearing", format!("support site {x} lies outside o_sharp")));
        }
        Self::build(model, smearing, None, o_sharp)
    }

    fn build(
        model: LatticeModel,
        smearing: SmearingFunction,
        nest: Option<RegionNest>,
        o_sharp: Vec<usize>,
    ) -> Result<Self, BoundError> {
        if smearing.weights().len() != model.n() {
            return Err(BoundError::Dimension(format!(
                "smearing for {} sites on a chain of {}",
                smearing.weights().len(),
                model.n()
            )));
        }
        let modular = region_modular(&model, &o_sharp)?;
        let rho = energy_density_form(&model, &smearing);
        let hamiltonian = hamiltonian_form(&model);
        let u = &modular.eigenvectors;
        let pair_in_modular_basis = u.adjoint() * &rho.pair * u.map(|z| z.conj());
        let spectral_logs = modular
            .blocks
            .iter()
            .flat_map(|b| [b.unclipped, -b.unclipped])
            .collect();
        Ok(Self {
            model,
            smearing,
            nest,
            o_sharp,
            modular,
            spectral_logs,
            rho,
            hamiltonian,
            pair_in_modular_basis,
        })
    }

    pub fn flagged_blocks(&self) -> usize {
        self.modular.flagged_count()
    }

    fn weighted_norm<F: Fn(f64) -> f64>(&self, weight: F) -> f64 {
        let logs = &self.spectral_logs;
        let x = &self.pair_in_modular_basis;
        let mut sum = 0.0;
        for i in 0..logs.len() {
            for j in 0..logs.len() {
                let w = weight(logs[i] + logs[j]);
                sum += x[(i, j)].norm_sqr() * w * w;
            }
        }
        (2.0 * sum).sqrt()
    }

    /// `‖Δ^{−1/2} f̂_λ(K) ϱ(G)Ω‖` from the two-particle weights `X_ij` and `l_i + l_j`.
    pub fn modular_norm(&self, lambda: f64) -> Result<ModularNorm, BoundError> {
        let kernel = GaussianKernel::new(lambda)?;
        let norm = self.weighted_norm(|l| kernel.ft(l) * (-0.5 * l).exp());
        let alternate =
            (2.0 * PI).sqrt() * self.weighted_norm(|l| (-0.5 * (lambda * l).powi(2) - 0.5 * l).exp());
        Ok(ModularNorm { norm, alternate })
    }

    /// `‖P_ker K Δ^{−1/2} ϱ(G)Ω‖` (here `Δ = 1` on the kernel).
    pub fn kernel_component(&self) -> f64 {
        self.weighted_norm(|l| if l.abs() < 1e-9 { 1.0 } else { 0.0 })
    }

    /// Norm of the part of `ϱ(G)Ω` that touches a direction past the matrix clip,
    /// where `log δ` is only as good as the double-double construction.
    pub fn flagged_weight(&self) -> f64 {
        let flags = &self.modular.eigen_flagged;
        let x = &self.pair_in_modular_basis;
        let mut sum = 0.0;
        for i in 0..flags.len() {
            for j in 0..flags.len() {
                if flags[i] || flags[j] {
                    sum += x[(i, j)].norm_sqr();
                }
            }
        }
        (2.0 * sum).sqrt()
    }

    pub fn model_id(&self) -> String {
        format!("lattice:n={},a={:e},mu={:e}", self.model.n(), self.model.a(), self.model.mu())
    }
}

/// A test state `ψ = YΩ` prepared by a Gaussian unitary `Y` generated on `support`.
#[derive(Debug, Clone)]
pub struct PreparedState {
    pub label: String,
    pub map: BogoliubovMap,
    pub support: Vec<usize>,
}

/// Outcome of a λ sweep.
#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Largest grid λ such that every grid point at or below it passes.
    pub lambda0: Option<f64>,
    pub rows: Vec<BoundReport>,
    pub norms: Vec<ModularNorm>,
}

pub(crate) fn lambda0_of(rows: &[BoundReport]) -> Option<f64> {
    let mut ordered: Vec<(f64, bool)> = rows
        .iter()
        .filter_map(|r| r.lambda.map(|l| (l, r.verdict.passes())))
        .collect();
    ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = None;
    for (l, ok) in ordered {
        if !ok {
            break;
        }
        best = Some(l);
    }
    best
}

pub(crate) fn check_grid(grid: &[f64], epsilon: f64) -> Result<(), BoundError> {
    if grid.is_empty() {
        return Err(invalid("lambda_grid", "must not be empty"));
    }
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    Ok(())
}

/// Sweeps λ for a lattice state prepared inside `O♭`.
///
/// `lhs` is the exact Gaussian expectation; the slack is the measured energy-commutator
/// defect `‖[ϱ,Y]Ω − HYΩ‖` of the preparing unitary plus the preparability surrogate,
/// which vanishes because `Y` is unitary (`‖Y‖ = 1`) and localized in `O♭`.
pub fn lattice_bound_verify(
    setup: &LatticeBoundSetup,
    state: &PreparedState,
    epsilon: f64,
    lambda_grid: &[f64],
    seed: u64,
) -> Result<SweepResult, BoundError> {
    check_grid(lambda_grid, epsilon)?;
    let nest = setup
        .nest
        .as_ref()
        .ok_or_else(|| invalid("regions", "bound verification needs the full region nest"))?;
    if let Some(x) = state.support.iter().find(|x| !nest.o_flat.contains(x)) {
        return Err(invalid("state", format!("{} is generated at site {x} outside o_flat", state.label)));
    }
    let lhs = setup.rho.gaussian_expectation(&state.map);
    let defect = commutator_defect(&setup.rho, &setup.hamiltonian, &state.map).absolute;
    let y_norm_excess = 0.0;
    let mut rows = Vec::with_capacity(lambda_grid.len());
    let mut norms = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let norm = setup.modular_norm(lambda)?;
        rows.push(BoundReport::new(
            lhs,
            -epsilon - norm.norm,
            epsilon,
            Some(lambda),
            defect,
            y_norm_excess * norm.norm,
            setup.model_id(),
            format!("{};state={}", nest.label(), state.label),
            seed,
        ));
        norms.push(norm);
    }
    Ok(SweepResult {
        lambda0: lambda0_of(&rows),
        rows,
        norms,
    })
}

/// One row of the domain divergence scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceRow {
    pub n: usize,
    pub lambda: f64,
    pub norm: f64,
    pub alternate: f64,
    pub kernel_component: f64,
    pub flagged_blocks: usize,
    pub flagged_weight: f64,
    pub max_log_delta: f64,
}

/// `‖Δ^{−1/2} f̂_λ(K) ϱ(G)Ω‖` over `(refinement, λ)` in the given order.
pub fn domain_divergence_scan(setups: &[LatticeBoundSetup], lambda_grid: &[f64]) -> Result<Vec<DivergenceRow>, BoundError> {
    if lambda_grid.is_empty() {
        return Err(invalid("lambda_grid", "must not be empty"));
    }
    let mut rows = Vec::new();
    for s in setups {
        let kernel_component = s.kernel_component();
        let flagged_weight = s.flagged_weight();
        let max_log_delta = s.spectral_logs.iter().fold(0.0_f64, |m, &l| m.max(l));
        for &lambda in lambda_grid {
            let m = s.modular_norm(lambda)?;
            rows.push(DivergenceRow {
                n: s.model.n(),
                lambda,
                norm: m.norm,
                alternate: m.alternate,
                kernel_component,
                flagged_blocks: s.flagged_blocks(),
                flagged_weight,
                max_log_delta,
            });
        }
    }
    Ok(rows)
}
