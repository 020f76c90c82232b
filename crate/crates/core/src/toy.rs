//! Matrix models `M_k ⊗ 1` on `C^k ⊗ C^k` that satisfy the structural axioms exactly.
//!
//! `ϱ(G) = H + R` with `R` in the commutant `1 ⊗ M_k`, so `[ϱ(G), A]Ω = [H, A]Ω = HAΩ`
//! holds for every `A` in the algebra because `HΩ = 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::modular::{
    membership_defect, random_gaussian_matrix, tomita_objects, CyclicSeparatingPair, ModularData, ModularError,
    MEMBERSHIP_TOL,
};
use crate::operator::{CMatrix, CVector, HermitianOperator, OperatorError, C64};
use crate::qei::{check_grid, lambda0_of, modular_norm, BoundError, BoundReport, GaussianKernel, SweepResult};
use crate::quadrature::{hermite_doubling, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToyError {
    #[error("factor size must be at least 2, got {0}")]
    FactorTooSmall(usize),
    #[error("operator norm {norm:.6e} exceeds r = {r:.6e}")]
    NormExceeded { norm: f64, r: f64 },
    #[error("AΩ vanishes, so it cannot be normalized")]
    Annihilates,
    #[error("operator is not in the commutant: defect {0:e}")]
    NotInCommutant(f64),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Modular(#[from] ModularError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Bound(#[from] BoundError),
}

/// A finite-dimensional structure with Hamiltonian, vacuum, algebra and `ϱ(G) = H + R`.
#[derive(Debug, Clone)]
pub struct ToyModel {
    pub k: usize,
    pub seed: u64,
    pub pair: CyclicSeparatingPair,
    pub h: HermitianOperator,
    /// `R = 1 ⊗ X` in the commutant.
    pub r: HermitianOperator,
    pub rho_g: HermitianOperator,
    pub modular: ModularData,
}

fn commutant_defect(m: &CMatrix, k: usize) -> f64 {
    // Elements of 1 ⊗ M_k commute with every E_ij ⊗ 1.
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let mut e = CMatrix::zeros(k, k);
            e[(i, j)] = C64::new(1.0, 0.0);
            let g = e.kronecker(&CMatrix::identity(k, k));
            worst = worst.max((m * &g - &g * m).norm());
        }
    }
    worst / m.norm().max(1.0)
}

fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let g = random_gaussian_matrix(n, n, rng);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// Seeded model: `H = P⊥ G⁺G P⊥ / k²`, `R = 1 ⊗ X` shifted so that `(Ω, ϱ(G)Ω)` is a
/// seeded value in `[−1, 1]`.
pub fn build_toy_model(seed: u64, k: usize) -> Result<ToyModel, ToyError> {
    if k < 2 {
        return Err(ToyError::FactorTooSmall(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pair = CyclicSeparatingPair::random(k, &mut rng);
    let d = k * k;
    let omega = pair.omega().clone();
    let p_perp = CMatrix::identity(d, d) - &omega * omega.adjoint();
    let g = random_gaussian_matrix(d, d, &mut rng);
    let h = &p_perp * g.adjoint() * &g * &p_perp / C64::new(d as f64, 0.0);
    let h = HermitianOperator::new((&h + h.adjoint()) * C64::new(0.5, 0.0))?;
    let target: f64 = rng.random_range(-1.0..1.0);
    let x = random_hermitian(k, &mut rng);
    let model = ToyModel::assemble(seed, pair, h, x, Some(target))?;
    Ok(model)
}

impl ToyModel {
    fn assemble(
        seed: u64,
        pair: CyclicSeparatingPair,
        h: HermitianOperator,
        x: CMatrix,
        vacuum_value: Option<f64>,
    ) -> Result<Self, ToyError> {
        let k = pair.k();
        let mut r = CMatrix::identity(k, k).kronecker(&x);
        if let Some(target) = vacuum_value {
            let shift = target - (pair.omega().adjoint() * &r * pair.omega())[(0, 0)].re;
            r += CMatrix::identity(k * k, k * k) * C64::new(shift, 0.0);
        }
        let r = HermitianOperator::new(r)?;
        let rho_g = h.add(&r)?;
        let modular = tomita_objects(&pair);
        Ok(Self {
            k,
            seed,
            pair,
            h,
            r,
            rho_g,
            modular,
        })
    }

    /// Same pair and Hamiltonian with `R = 1 ⊗ x`.
    pub fn with_commutant_factor(&self, x: &CMatrix) -> Result<Self, ToyError> {
        Self::assemble(self.seed, self.pair.clone(), self.h.clone(), x.clone(), None)
    }

    /// Same pair and Hamiltonian with an arbitrary `R`, which must lie in the commutant.
    pub fn with_commutant(&self, r: &CMatrix) -> Result<Self, ToyError> {
        let defect = commutant_defect(r, self.k);
        if defect > MEMBERSHIP_TOL {
            return Err(ToyError::NotInCommutant(defect));
        }
        let r = HermitianOperator::new(r.clone())?;
        let rho_g = self.h.add(&r)?;
        Ok(Self {
            r,
            rho_g,
            ..self.clone()
        })
    }

    pub fn omega(&self) -> &CVector {
        self.pair.omega()
    }

    pub fn dim(&self) -> usize {
        self.k * self.k
    }

    pub fn rho_omega(&self) -> CVector {
        self.rho_g.apply(self.omega())
    }

    /// `‖[ϱ(G), A]Ω − HAΩ‖`.
    pub fn generator_residual(&self, a: &CMatrix) -> f64 {
        let rho = self.rho_g.entries();
        let omega = self.omega();
        let comm = rho * (a * omega) - a * (rho * omega);
        (comm - self.h.entries() * (a * omega)).norm()
    }

    /// Largest generator residual over the matrix units `E_ij ⊗ 1`.
    pub fn generator_residual_units(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.k {
            for j in 0..self.k {
                let mut e = CMatrix::zeros(self.k, self.k);
                e[(i, j)] = C64::new(1.0, 0.0);
                worst = worst.max(self.generator_residual(&e.kronecker(&CMatrix::identity(self.k, self.k))));
            }
        }
        worst
    }

    pub fn id(&self) -> String {
        format!("toy:k={},seed={}", self.k, self.seed)
    }
}

/// Status of one structural assumption on a model.
#[derive(Debug, Clone, PartialEq)]
pub enum AssumptionStatus {
    /// Holds, with the measured residual (0 when structural).
    ExactPass { residual: f64 },
    /// Holds vacuously because all operators are bounded matrices.
    AutoPass { reason: &'static str },
    /// A surrogate value is reported instead of a pass/fail.
    Diagnostic { value: f64, meaning: &'static str },
    NotRealizable { reason: &'static str },
    Failed { residual: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionEntry {
    pub name: &'static str,
    pub status: AssumptionStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn get(&self, name: &str) -> Option<&AssumptionStatus> {
        self.entries.iter().find(|e| e.name == name).map(|e| &e.status)
    }

    pub fn any_failed(&self) -> bool {
        self.entries.iter().any(|e| matches!(e.status, AssumptionStatus::Failed { .. }))
    }
}

/// Minimal-norm `Y = Y₁ ⊗ 1` with `(YΩ, A YΩ) = (ψ, Aψ)` for all `A ∈ M_k ⊗ 1`.
///
/// With reduced densities `ρ_ψ = U diag(p) U⁺` and `ρ_Ω = V diag(q) V⁺` (both descending),
/// `Y₁ = U diag(√(p/q)) V⁺` and `‖Y‖ = max √(p_i/q_i)`, which is the least possible
/// value over all solutions.
#[derive(Debug, Clone)]
pub struct Preparation {
    pub y: CMatrix,
    pub norm: f64,
}

fn reduced_first(v: &CVector, k: usize) -> CMatrix {
    let psi = CMatrix::from_fn(k, k, |a, b| v[a * k + b]);
    &psi * psi.adjoint()
}

fn descending_eig(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let herm = HermitianOperator::new((m + m.adjoint()) * C64::new(0.5, 0.0)).expect("density matrix is Hermitian");
    let n = herm.dim();
    let values: Vec<f64> = (0..n).rev().map(|i| herm.eigenvalues()[i].max(0.0)).collect();
    let vecs = herm.eig().vectors.clone();
    let vectors = CMatrix::from_fn(n, n, |r, c| vecs[(r, n - 1 - c)]);
    (values, vectors)
}

pub fn minimal_preparation(model: &ToyModel, psi: &CVector) -> Preparation {
    let k = model.k;
    let (p, u) = descending_eig(&reduced_first(psi, k));
    let (q, v) = descending_eig(&reduced_first(model.omega(), k));
    let ratios: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (a / b).sqrt()).collect();
    let d = CMatrix::from_diagonal(&CVector::from_iterator(k, ratios.iter().map(|&x| C64::new(x, 0.0))));
    let y1 = &u * d * v.adjoint();
    Preparation {
        y: y1.kronecker(&CMatrix::identity(k, k)),
        norm: ratios.iter().fold(0.0, |m: f64, &x| m.max(x)),
    }
}

/// Per-assumption report; `psi` is the state used for the preparability surrogate.
pub fn check_assumptions(model: &ToyModel, psi: &CVector) -> AssumptionReport {
    let k = model.k;
    let omega = model.omega();
    let h_omega = (model.h.entries() * omega).norm();
    let min_h = model.h.min_eigenvalue();
    let ground = if min_h >= -1e-10 && h_omega <= 1e-12 {
        AssumptionStatus::ExactPass { residual: h_omega.max((-min_h).max(0.0)) }
    } else {
        AssumptionStatus::Failed { residual: h_omega.max(-min_h) }
    };
    let commutant = commutant_defect(model.r.entries(), k);
    let locality = if commutant <= MEMBERSHIP_TOL {
        AssumptionStatus::ExactPass { residual: commutant }
    } else {
        AssumptionStatus::Failed { residual: commutant }
    };
    let generator = model.generator_residual_units();
    let generator_status = if generator <= 1e-12 {
        AssumptionStatus::ExactPass { residual: generator }
    } else {
        AssumptionStatus::Failed { residual: generator }
    };
    let prep = minimal_preparation(model, psi);
    let entries = vec![
        ("isotony", AssumptionStatus::ExactPass { residual: 0.0 }),
        ("locality", locality),
        (
            "covariance",
            AssumptionStatus::NotRealizable {
                reason: "a fixed matrix factor has no nontrivial translation covariance",
            },
        ),
        ("ground_state", ground),
        (
            "reeh_schlieder",
            AssumptionStatus::NotRealizable {
                reason: "not-realizable(finite-dim): density of M Ω is exact here, locality refinement absent",
            },
        ),
        (
            "local_preparability",
            AssumptionStatus::Diagnostic {
                value: prep.norm,
                meaning: "minimal ‖Y‖ reproducing the restriction of ψ",
            },
        ),
        ("energy_density", AssumptionStatus::ExactPass { residual: 0.0 }),
        (
            "distribution",
            AssumptionStatus::AutoPass {
                reason: "all operators are bounded matrices",
            },
        ),
        (
            "polynomial_bound",
            AssumptionStatus::AutoPass {
                reason: "all operators are bounded matrices",
            },
        ),
        ("affiliation", AssumptionStatus::ExactPass { residual: 0.0 }),
        ("generator", generator_status),
    ];
    AssumptionReport {
        entries: entries
            .into_iter()
            .map(|(name, status)| AssumptionEntry { name, status })
            .collect(),
    }
}

/// Terms of the positive split `(AΩ, ϱ AΩ) = (AΩ, H AΩ) + (AΩ, A ϱΩ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBound {
    pub report: BoundReport,
    pub positive_part: f64,
    pub remainder: f64,
    pub a_norm: f64,
    pub r: f64,
}

/// `(AΩ, ϱ(G)AΩ) ≥ −r‖ϱ(G)Ω‖` for `A` in the algebra with `‖A‖ ≤ r`, after scaling `‖AΩ‖ = 1`.
pub fn local_bound_evaluate(model: &ToyModel, a: &CMatrix, r: f64) -> Result<LocalBound, ToyError> {
    let defect = membership_defect(a, model.k);
    if defect > MEMBERSHIP_TOL {
        return Err(ModularError::NotInAlgebra { defect }.into());
    }
    let omega = model.omega();
    let a_omega_norm = (a * omega).norm();
    if a_omega_norm == 0.0 {
        return Err(ToyError::Annihilates);
    }
    let a = a / C64::new(a_omega_norm, 0.0);
    let a_norm = a.clone().svd(false, false).singular_values.max();
    if a_norm > r * (1.0 + 1e-12) {
        return Err(ToyError::NormExceeded { norm: a_norm, r });
    }
    let psi = &a * omega;
    let rho = model.rho_g.entries();
    let lhs = psi.dotc(&(rho * &psi)).re;
    let positive_part = psi.dotc(&(model.h.entries() * &psi)).re;
    let remainder = psi.dotc(&(&a * (rho * omega))).re;
    let rhs = -r * (rho * omega).norm();
    let residual = model.generator_residual(&a);
    Ok(LocalBound {
        report: BoundReport::new(lhs, rhs, 0.0, None, residual, 0.0, model.id(), "M_k(x)1", model.seed),
        positive_part,
        remainder,
        a_norm,
        r,
    })
}

/// The four equal expressions of the modular rewriting of `∫ f_λ(s) (YΩ, AΔ^{is}ϱΩ) ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub lambda: f64,
    /// `∫ f_λ(s)(YΩ, AΔ^{is}ϱΩ) ds` by Gauss-Hermite quadrature.
    pub integral: C64,
    /// `(A*YΩ, f̂_λ(K)ϱΩ)`.
    pub spectral: C64,
    /// `(JΔ^{1/2}Y*AΩ, f̂_λ(K)ϱΩ)`.
    pub tomita: C64,
    /// `(JY*AΩ, Δ^{−1/2}f̂_λ(K)ϱΩ)`.
    pub conjugated: C64,
    pub max_discrepancy: f64,
    pub quadrature_tail: f64,
    pub quadrature_order: usize,
    /// `‖Δ^{−1/2}f̂_λ(K)ϱΩ‖`.
    pub final_bound: f64,
    /// `‖JY*AΩ‖`.
    pub vector_norm: f64,
    /// `|conjugated| ≤ ‖JY*AΩ‖ · final_bound`.
    pub within_bound: bool,
}

impl ChainReport {
    pub fn terms(&self) -> [C64; 4] {
        [self.integral, self.spectral, self.tomita, self.conjugated]
    }
}

pub const CHAIN_QUADRATURE_TOL: f64 = 1e-10;
const CHAIN_MAX_ORDER: usize = 1024;

pub fn modular_chain_check(model: &ToyModel, y: &CMatrix, a: &CMatrix, lambda: f64) -> Result<ChainReport, ToyError> {
    let k = model.k;
    for m in [y, a] {
        let defect = membership_defect(m, k);
        if defect > MEMBERSHIP_TOL {
            return Err(ModularError::NotInAlgebra { defect }.into());
        }
    }
    let y_norm = y.clone().svd(false, false).singular_values.max();
    if y_norm > 1.0 + 1e-12 {
        return Err(ToyError::NormExceeded { norm: y_norm, r: 1.0 });
    }
    let kernel = GaussianKernel::new(lambda)?;
    let md = &model.modular;
    let omega = model.omega();
    let rho_omega = model.rho_omega();
    let left = a.adjoint() * (y * omega);

    // s = √2 λ x turns f_λ(s) ds into √2 e^{−x²} dx.
    let integrand = |x: f64| {
        let s = std::f64::consts::SQRT_2 * lambda * x;
        let flowed = md.k.apply_fn(|e| C64::from_polar(1.0, s * e), &rho_omega).expect("bounded");
        left.dotc(&flowed) * std::f64::consts::SQRT_2
    };
    let quad = hermite_doubling(integrand, 16, CHAIN_MAX_ORDER, CHAIN_QUADRATURE_TOL)?;

    let smoothed = md.k.apply_fn(|e| C64::new(kernel.ft(e), 0.0), &rho_omega).expect("bounded");
    let spectral = left.dotc(&smoothed);

    let ya = y.adjoint() * (a * omega);
    let half = md.delta.apply_fn(|d| C64::new(d.sqrt(), 0.0), &ya).expect("positive");
    let tomita = md.j.apply(&half).dotc(&smoothed);

    let j_ya = md.j.apply(&ya);
    let weighted = md
        .delta
        .apply_fn(|d| C64::new(d.powf(-0.5), 0.0), &smoothed)
        .expect("positive");
    let conjugated = j_ya.dotc(&weighted);

    let terms = [quad.value, spectral, tomita, conjugated];
    let mut max_discrepancy: f64 = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            max_discrepancy = max_discrepancy.max((terms[i] - terms[j]).norm());
        }
    }
    let final_bound = weighted.norm();
    let vector_norm = j_ya.norm();
    Ok(ChainReport {
        lambda,
        integral: quad.value,
        spectral,
        tomita,
        conjugated,
        max_discrepancy,
        quadrature_tail: quad.tail_bound,
        quadrature_order: quad.order,
        final_bound,
        vector_norm,
        within_bound: conjugated.norm() <= vector_norm * final_bound * (1.0 + 1e-12) + 1e-15,
    })
}

/// λ sweep of `(ψ, ϱ(G)ψ) ≥ −ε − ‖Δ^{−1/2} f̂_λ(K) ϱ(G)Ω‖` for `ψ = YΩ`.
///
/// `Y` is rescaled so that `‖YΩ‖ = 1`. A type I factor cannot prepare `ψ` with
/// `‖Y‖ = 1` in general, so `(‖Y‖ − 1)⁺` times the modular norm is carried as the
/// preparability slack, next to the measured generator residual of `Y`.
pub fn toy_bound_verify(
    model: &ToyModel,
    y: &CMatrix,
    epsilon: f64,
    lambda_grid: &[f64],
) -> Result<SweepResult, ToyError> {
    check_grid(lambda_grid, epsilon)?;
    let defect = membership_defect(y, model.k);
    if defect > MEMBERSHIP_TOL {
        return Err(ModularError::NotInAlgebra { defect }.into());
    }
    let omega = model.omega();
    let y_omega_norm = (y * omega).norm();
    if y_omega_norm == 0.0 {
        return Err(ToyError::Annihilates);
    }
    let y = y / C64::new(y_omega_norm, 0.0);
    let y_norm = y.clone().svd(false, false).singular_values.max();
    let psi = &y * omega;
    let lhs = model.rho_g.expectation(&psi);
    let residual = model.generator_residual(&y);
    let rho_omega = model.rho_omega();
    let mut rows = Vec::with_capacity(lambda_grid.len());
    let mut norms = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let norm = modular_norm(&model.modular, &rho_omega, lambda)?;
        rows.push(BoundReport::new(
            lhs,
            -epsilon - norm.norm,
            epsilon,
            Some(lambda),
            residual,
            (y_norm - 1.0).max(0.0) * norm.norm,
            model.id(),
            format!("M_k(x)1;y_norm={y_norm:.6e}"),
            model.seed,
        ));
        norms.push(norm);
    }
    Ok(SweepResult {
        lambda0: lambda0_of(&rows),
        rows,
        norms,
    })
}
