//! Worst-case search for the smeared energy over parametric state families.
//!
//! Gaussian families are evaluated exactly through `QuadraticForm::gaussian_expectation`;
//! the Fock truncation only decides whether a parameter point is admissible.

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::FockTruncation;
use crate::operator::{CMatrix, CVector, HermitianOperator, RMatrix, RVector, C64};
use crate::scalar::{commutator_defect, BogoliubovMap, QuadraticForm, ADEQUACY_TOL};

pub const RESTARTS: usize = 8;
const PENALTY: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("radius {radius:e} loses {loss:e} of the norm to the truncation")]
    RadiusInadequate { radius: f64, loss: f64 },
    #[error("optimizer failure: {0}")]
    Optimizer(String),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SearchError {
    SearchError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateFamily {
    /// `D(β)Ω` with `‖β‖ ≤ radius`.
    Coherent { radius: f64 },
    /// `D(β)S(r, φ)Ω` with per-mode squeezing `r_k ≤ max_squeeze`.
    SqueezedCoherent { radius: f64, max_squeeze: f64 },
    /// Unit vectors in the span of the first `rank` truncation basis states.
    LowRankFock { rank: usize },
}

impl StateFamily {
    pub fn parameter_dim(&self, modes: usize) -> usize {
        match *self {
            StateFamily::Coherent { .. } => 2 * modes,
            StateFamily::SqueezedCoherent { .. } => 4 * modes,
            StateFamily::LowRankFock { rank } => 2 * rank,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            StateFamily::Coherent { radius } => format!("coherent(radius={radius:e})"),
            StateFamily::SqueezedCoherent { radius, max_squeeze } => {
                format!("squeezed-coherent(radius={radius:e},max_squeeze={max_squeeze:e})")
            }
            StateFamily::LowRankFock { rank } => format!("low-rank-fock(rank={rank})"),
        }
    }
}

/// The energy form to minimize, the Hamiltonian for defect bookkeeping, and the truncation
/// that decides admissibility. Modes are the coordinate modes of the truncation.
#[derive(Debug, Clone)]
pub struct SearchProblem {
    pub form: QuadraticForm,
    pub hamiltonian: QuadraticForm,
    pub trunc: FockTruncation,
}

impl SearchProblem {
    pub fn new(form: QuadraticForm, hamiltonian: QuadraticForm, trunc: FockTruncation) -> Result<Self, SearchError> {
        let m = form.modes();
        if hamiltonian.modes() != m || trunc.n_modes() != m {
            return Err(SearchError::Dimension(format!(
                "form has {m} modes, hamiltonian {}, truncation {}",
                hamiltonian.modes(),
                trunc.n_modes()
            )));
        }
        if !trunc.retains_all_modes() || (trunc.mode_basis() - CMatrix::identity(m, m)).norm() > 0.0 {
            return Err(invalid("truncation", "must retain every coordinate mode"));
        }
        Ok(Self { form, hamiltonian, trunc })
    }

    pub fn modes(&self) -> usize {
        self.form.modes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchBudget {
    /// Nelder-Mead iterations per restart.
    pub max_iters: u64,
    /// Standard deviation of simplex values at which a restart stops.
    pub tolerance: f64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tolerance: 1e-13,
        }
    }
}

/// `β = x[..m] + i x[m..]`.
fn complex_from_real(x: &[f64], m: usize) -> CVector {
    CVector::from_fn(m, |k, _| C64::new(x[k], x[m + k]))
}

/// Real `2m × 2m` matrix `M` with `(D(β)Ω, Z D(β)Ω) = c + xᵀ M x`, `x = (Re β, Im β)`.
///
/// With `⟨a_k⟩ = β_k` the expectation is `2 Re(β̄ᵀ A β̄) + β⁺ B β + c`.
pub fn coherent_form_matrix(form: &QuadraticForm) -> Result<RMatrix, SearchError> {
    if form.linear.norm() > 0.0 {
        return Err(invalid("form", "closed form needs a form without linear terms"));
    }
    let m = form.modes();
    let ar = form.pair.map(|z| z.re);
    let ai = form.pair.map(|z| z.im);
    let br = form.number.map(|z| z.re);
    let bi = form.number.map(|z| z.im);
    let mut out = RMatrix::zeros(2 * m, 2 * m);
    out.view_mut((0, 0), (m, m)).copy_from(&(&br + &ar * 2.0));
    out.view_mut((0, m), (m, m)).copy_from(&(-&bi + &ai * 2.0));
    out.view_mut((m, 0), (m, m)).copy_from(&(&bi + &ai * 2.0));
    out.view_mut((m, m), (m, m)).copy_from(&(&br - &ar * 2.0));
    Ok((&out + out.transpose()) * 0.5)
}

/// Exact coherent-family minimum.
#[derive(Debug, Clone, PartialEq)]
pub enum CoherentMinimum {
    Bounded { value: f64, amplitude: CVector },
    /// Negative direction with no radius to stop it: a finding, not an error.
    UnboundedBelow { lambda_min: f64, direction: CVector },
}

impl CoherentMinimum {
    pub fn value(&self) -> f64 {
        match self {
            CoherentMinimum::Bounded { value, .. } => *value,
            CoherentMinimum::UnboundedBelow { .. } => f64::NEG_INFINITY,
        }
    }
}

/// Minimum of `c + xᵀMx` over `‖x‖ ≤ radius` (`None` for the whole space).
pub fn coherent_min_closed_form(form: &QuadraticForm, radius: Option<f64>) -> Result<CoherentMinimum, SearchError> {
    let m = form.modes();
    let mat = coherent_form_matrix(form)?;
    let eig = mat.symmetric_eigen();
    let (imin, &lambda_min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .ok_or_else(|| SearchError::Dimension("form has no modes".into()))?;
    let mut v: RVector = eig.eigenvectors.column(imin).into_owned();
    // Fix the sign so the reported direction is deterministic.
    if let Some(&lead) = v.iter().find(|x| x.abs() > 1e-12) {
        if lead < 0.0 {
            v = -v;
        }
    }
    let c = form.constant;
    if lambda_min >= 0.0 {
        return Ok(CoherentMinimum::Bounded {
            value: c,
            amplitude: CVector::zeros(m),
        });
    }
    match radius {
        None => Ok(CoherentMinimum::UnboundedBelow {
            lambda_min,
            direction: complex_from_real(v.as_slice(), m),
        }),
        Some(r) => Ok(CoherentMinimum::Bounded {
            value: c + r * r * lambda_min,
            amplitude: complex_from_real((v * r).as_slice(), m),
        }),
    }
}

/// Norm lost by truncating the Gaussian vector `SΩ` to at most `n_max` particles.
///
/// `SΩ ∝ exp(½ a⁺ᵀ W a⁺ + γᵀ a⁺)Ω` with `W = U^{−⁺}Vᵀ`, `γ = β − Wβ̄`. The truncated
/// part is built by the exponential series (raising only), and the full norm is the
/// Gaussian integral `2^m det(A)^{−1/2} exp(½ bᵀA⁻¹b)` of the Bargmann representation.
pub fn gaussian_truncation_loss(trunc: &FockTruncation, map: &BogoliubovMap) -> f64 {
    let m = trunc.n_modes();
    let Some(u_inv_adj) = map.u.adjoint().try_inverse() else {
        return 1.0;
    };
    let w = &u_inv_adj * map.v.transpose();
    let w = (&w + w.transpose()) * C64::new(0.5, 0.0);
    let gamma = &map.beta - &w * map.beta.map(|z| z.conj());

    let mut a = RMatrix::zeros(2 * m, 2 * m);
    let wr = w.map(|z| z.re);
    let wi = w.map(|z| z.im);
    let id = RMatrix::identity(m, m);
    a.view_mut((0, 0), (m, m)).copy_from(&((&id - &wr) * 2.0));
    a.view_mut((0, m), (m, m)).copy_from(&(&wi * -2.0));
    a.view_mut((m, 0), (m, m)).copy_from(&(&wi * -2.0));
    a.view_mut((m, m), (m, m)).copy_from(&((&id + &wr) * 2.0));
    let b = RVector::from_fn(2 * m, |i, _| 2.0 * if i < m { gamma[i].re } else { gamma[i - m].im });
    let Some(chol) = a.clone().cholesky() else {
        return 1.0;
    };
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let quad = b.dot(&chol.solve(&b));
    let log_full = m as f64 * std::f64::consts::LN_2 - 0.5 * log_det + 0.5 * quad;

    let diagonal = (0..m).all(|k| (0..m).all(|l| k == l || w[(k, l)] == C64::new(0.0, 0.0)));
    if diagonal {
        return product_truncation_loss(trunc.n_max(), &w, &gamma, log_full);
    }

    let mut term = trunc.vacuum();
    let mut series = term.clone();
    for n in 1..=trunc.n_max() {
        let raised: Vec<CVector> = (0..m).map(|l| trunc.create(l, &term)).collect();
        let mut next = CVector::zeros(trunc.dim());
        for k in 0..m {
            let mut inner = &term * gamma[k];
            for l in 0..m {
                if w[(k, l)] != C64::new(0.0, 0.0) {
                    inner += &raised[l] * (w[(k, l)] * 0.5);
                }
            }
            next += trunc.create(k, &inner);
        }
        term = next / C64::new(n as f64, 0.0);
        series += &term;
    }
    // Raising never lowers the particle number, so terms beyond n_max cannot reach the kept levels.
    (-(series.norm_squared().ln() - log_full).exp_m1()).clamp(0.0, 1.0)
}

/// Mode-diagonal `W`: the vector is a product over modes, so the kept weight is the
/// convolution of the single-mode number distributions from `h_n = (γ h_{n−1} + w h_{n−2})/n`.
fn product_truncation_loss(n_max: usize, w: &CMatrix, gamma: &CVector, log_full: f64) -> f64 {
    let mut total = vec![0.0; n_max + 1];
    total[0] = 1.0;
    for k in 0..gamma.len() {
        let mut h = vec![C64::new(0.0, 0.0); n_max + 1];
        h[0] = C64::new(1.0, 0.0);
        let mut probs = vec![1.0; n_max + 1];
        let mut factorial = 1.0;
        for n in 1..=n_max {
            let prev2 = if n >= 2 { h[n - 2] * w[(k, k)] } else { C64::new(0.0, 0.0) };
            h[n] = (h[n - 1] * gamma[k] + prev2) / n as f64;
            factorial *= n as f64;
            probs[n] = h[n].norm_sqr() * factorial;
        }
        let mut next = vec![0.0; n_max + 1];
        for (i, &a) in total.iter().enumerate() {
            for (j, &b) in probs.iter().enumerate().take(n_max + 1 - i) {
                next[i + j] += a * b;
            }
        }
        total = next;
    }
    let kept: f64 = total.iter().sum();
    (-(kept.ln() - log_full).exp_m1()).clamp(0.0, 1.0)
}

/// Result of a restarted simplex search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptResult {
    pub family: String,
    pub best_value: f64,
    pub best_params: Vec<f64>,
    /// Sum of iterations over all restarts.
    pub iterations: u64,
    /// Every restart stopped on the tolerance rather than the iteration budget.
    pub converged: bool,
    /// Best value of each restart, in restart order.
    pub restart_values: Vec<f64>,
    /// Norm lost to the truncation at the best point.
    pub truncation_loss: f64,
    /// `−‖ϱ(G)Ω‖`, the local bound with `r = 1`, for unitary families.
    pub local_bound_rhs: Option<f64>,
    /// Measured `‖[ϱ,S]Ω − HSΩ‖` of the best unitary.
    pub commutator_defect: Option<f64>,
    /// `best_value ≥ local_bound_rhs − commutator_defect` when applicable.
    pub bound_consistent: Option<bool>,
}

struct Objective<'a> {
    problem: &'a SearchProblem,
    family: StateFamily,
    fock_matrix: Option<CMatrix>,
}

impl Objective<'_> {
    fn map(&self, x: &[f64]) -> Option<BogoliubovMap> {
        let m = self.problem.modes();
        match self.family {
            StateFamily::Coherent { radius } => Some(BogoliubovMap::displacement(project(complex_from_real(x, m), radius))),
            StateFamily::SqueezedCoherent { radius, max_squeeze } => {
                let beta = project(complex_from_real(&x[..2 * m], m), radius);
                let r: Vec<f64> = x[2 * m..3 * m].iter().map(|p| max_squeeze * p.tanh()).collect();
                let phi = &x[3 * m..4 * m];
                Some(BogoliubovMap::displacement(beta).compose(&BogoliubovMap::squeezing(&r, phi)))
            }
            StateFamily::LowRankFock { .. } => None,
        }
    }

    fn evaluate(&self, x: &[f64]) -> (f64, f64) {
        match self.family {
            StateFamily::LowRankFock { rank } => {
                let z = self.fock_matrix.as_ref().expect("matrix for fock family");
                let psi = fock_vector(x, rank, self.problem.trunc.dim());
                let norm2 = psi.norm_squared();
                if norm2 == 0.0 {
                    return (PENALTY, 0.0);
                }
                (psi.dotc(&(z * &psi)).re / norm2, 0.0)
            }
            _ => {
                let map = self.map(x).expect("gaussian family");
                let loss = gaussian_truncation_loss(&self.problem.trunc, &map);
                if loss > ADEQUACY_TOL {
                    return (PENALTY * (1.0 + loss), loss);
                }
                (self.problem.form.gaussian_expectation(&map), loss)
            }
        }
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> Result<f64, argmin::core::Error> {
        Ok(self.evaluate(x).0)
    }
}

fn project(beta: CVector, radius: f64) -> CVector {
    let n = beta.norm();
    if n > radius {
        beta * C64::new(radius / n, 0.0)
    } else {
        beta
    }
}

fn fock_vector(x: &[f64], rank: usize, dim: usize) -> CVector {
    let mut psi = CVector::zeros(dim);
    for i in 0..rank {
        psi[i] = C64::new(x[i], x[rank + i]);
    }
    psi
}

struct RestartOutcome {
    value: f64,
    params: Vec<f64>,
    iterations: u64,
    converged: bool,
}

fn run_simplex(objective: Objective<'_>, start: Vec<f64>, step: f64, budget: SearchBudget) -> Result<RestartOutcome, SearchError> {
    let mut simplex = vec![start.clone()];
    for i in 0..start.len() {
        let mut p = start.clone();
        p[i] += step;
        simplex.push(p);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(budget.tolerance)
        .map_err(|e| SearchError::Optimizer(e.to_string()))?;
    let res = Executor::new(objective, solver)
        .configure(|s| s.max_iters(budget.max_iters))
        .run()
        .map_err(|e| SearchError::Optimizer(e.to_string()))?;
    let state = res.state();
    let converged = matches!(
        state.get_termination_status(),
        TerminationStatus::Terminated(TerminationReason::SolverConverged)
    );
    Ok(RestartOutcome {
        value: state.get_best_cost(),
        params: state.get_best_param().cloned().unwrap_or(start),
        iterations: state.get_iter(),
        converged,
    })
}

fn validate_family(problem: &SearchProblem, family: StateFamily) -> Result<(), SearchError> {
    let m = problem.modes();
    let check_radius = |radius: f64| -> Result<(), SearchError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", format!("must be positive and finite, got {radius}")));
        }
        let mut beta = CVector::zeros(m);
        beta[0] = C64::new(radius, 0.0);
        let loss = gaussian_truncation_loss(&problem.trunc, &BogoliubovMap::displacement(beta));
        if loss > ADEQUACY_TOL {
            return Err(SearchError::RadiusInadequate { radius, loss });
        }
        Ok(())
    };
    match family {
        StateFamily::Coherent { radius } => check_radius(radius),
        StateFamily::SqueezedCoherent { radius, max_squeeze } => {
            check_radius(radius)?;
            if !(max_squeeze >= 0.0 && max_squeeze.is_finite()) {
                return Err(invalid("max_squeeze", format!("must be nonnegative and finite, got {max_squeeze}")));
            }
            Ok(())
        }
        StateFamily::LowRankFock { rank } => {
            if rank == 0 || rank > problem.trunc.dim() {
                return Err(invalid(
                    "rank",
                    format!("must be in 1..={}, got {rank}", problem.trunc.dim()),
                ));
            }
            Ok(())
        }
    }
}

/// Restarted Nelder-Mead search (`RESTARTS` seeded starts, run in parallel, reduced
/// by `(value, restart index)`).
///
/// Restart 0 starts from the best point of the next smaller family (coherent for
/// squeezed-coherent, rank − 1 for low-rank Fock), so enlarging a family never
/// raises the reported minimum.
pub fn minimize_energy(
    problem: &SearchProblem,
    family: StateFamily,
    budget: SearchBudget,
    seed: u64,
) -> Result<OptResult, SearchError> {
    validate_family(problem, family)?;
    let m = problem.modes();
    let dim = family.parameter_dim(m);
    let warm: Vec<f64> = match family {
        StateFamily::Coherent { .. } => vec![0.0; dim],
        StateFamily::SqueezedCoherent { radius, .. } => {
            let inner = minimize_energy(problem, StateFamily::Coherent { radius }, budget, seed)?;
            let mut x = inner.best_params;
            x.resize(dim, 0.0);
            x
        }
        StateFamily::LowRankFock { rank } => {
            let mut x = vec![0.0; dim];
            if rank == 1 {
                x[0] = 1.0;
            } else {
                let inner = minimize_energy(problem, StateFamily::LowRankFock { rank: rank - 1 }, budget, seed)?;
                x[..rank - 1].copy_from_slice(&inner.best_params[..rank - 1]);
                x[rank..2 * rank - 1].copy_from_slice(&inner.best_params[rank - 1..]);
            }
            x
        }
    };
    let fock_matrix = match family {
        StateFamily::LowRankFock { .. } => Some(problem.form.to_matrix(&problem.trunc)),
        _ => None,
    };
    let scale = match family {
        StateFamily::Coherent { radius } | StateFamily::SqueezedCoherent { radius, .. } => radius / (dim as f64).sqrt(),
        StateFamily::LowRankFock { .. } => 0.5,
    };
    let starts: Vec<Vec<f64>> = (0..RESTARTS)
        .map(|i| {
            if i == 0 {
                return warm.clone();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut x: Vec<f64> = (0..dim).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
            if let StateFamily::SqueezedCoherent { .. } = family {
                for v in &mut x[2 * m..] {
                    *v = 0.1 * rng.random_range(-1.0..1.0);
                }
            }
            if let StateFamily::LowRankFock { .. } = family {
                x[0] += 1.0;
            }
            x
        })
        .collect();
    let outcomes: Vec<RestartOutcome> = starts
        .into_par_iter()
        .map(|start| {
            let objective = Objective {
                problem,
                family,
                fock_matrix: fock_matrix.clone(),
            };
            run_simplex(objective, start, scale.max(1e-3), budget)
        })
        .collect::<Result<_, _>>()?;
    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .map(|(_, o)| o)
        .expect("at least one restart");
    let objective = Objective {
        problem,
        family,
        fock_matrix,
    };
    let (_, loss) = objective.evaluate(&best.params);
    let (local_bound_rhs, defect) = match objective.map(&best.params) {
        Some(map) => {
            let d = commutator_defect(&problem.form, &problem.hamiltonian, &map).absolute;
            (Some(-problem.form.vacuum_image_norm()), Some(d))
        }
        None => (None, None),
    };
    let bound_consistent = local_bound_rhs.zip(defect).map(|(rhs, d)| best.value >= rhs - d);
    Ok(OptResult {
        family: family.label(),
        best_value: best.value,
        best_params: best.params.clone(),
        iterations: outcomes.iter().map(|o| o.iterations).sum(),
        converged: outcomes.iter().all(|o| o.converged),
        restart_values: outcomes.iter().map(|o| o.value).collect(),
        truncation_loss: loss,
        local_bound_rhs,
        commutator_defect: defect,
        bound_consistent,
    })
}

/// Lowest eigenvalue of the form on the span of the first `rank` truncation basis states.
pub fn low_rank_fock_min(problem: &SearchProblem, rank: usize) -> Result<f64, SearchError> {
    validate_family(problem, StateFamily::LowRankFock { rank })?;
    let z = problem.form.to_matrix(&problem.trunc);
    let block = z.view((0, 0), (rank, rank)).into_owned();
    let h = HermitianOperator::new((&block + block.adjoint()) * C64::new(0.5, 0.0)).map_err(|e| invalid("form", e.to_string()))?;
    Ok(h.min_eigenvalue())
}
