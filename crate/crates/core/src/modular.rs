//! Tomita-Takesaki objects for matrix factors and for standard real subspaces.

use nalgebra::SVD;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::fock::{FockTruncation, TruncationError};
use crate::operator::{
    realify, CMatrix, CVector, HermitianOperator, OperatorError, RMatrix, RVector,
    RealLinearOperator, C64,
};

/// Smallest admissible Schmidt coefficient of a cyclic separating vector.
pub const SCHMIDT_FLOOR: f64 = 1e-8;
/// Relative tolerance for membership in `M_k ⊗ 1`.
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Modular eigenvalues outside `[1/DELTA_CLIP, DELTA_CLIP]` are clipped and flagged.
pub const DELTA_CLIP: f64 = 1e14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModularError {
    #[error("vector is not separating: smallest Schmidt coefficient {smallest:e} below {floor:e}")]
    NotSeparating { smallest: f64, floor: f64 },
    #[error("real subspace is not separating: K ∩ iK has real dimension {dimension}")]
    SubspaceNotSeparating { dimension: usize },
    #[error("real subspace is not cyclic: K + iK has complex dimension {rank} < {dim}")]
    NotCyclic { rank: usize, dim: usize },
    #[error("operator is not in the algebra: commutator with commutant generators {defect:e}")]
    NotInAlgebra { defect: f64 },
    #[error("vector norm {norm} differs from 1")]
    NotNormalized { norm: f64 },
    #[error("invalid region: {reason}")]
    InvalidRegion { reason: String },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Truncation(#[from] TruncationError),
}

/// A unit vector in `C^k ⊗ C^k` with full Schmidt rank, for the factor `M_k ⊗ 1`.
///
/// Index convention: component `a * k + b` multiplies `e_a ⊗ e_b`.
#[derive(Debug, Clone)]
pub struct CyclicSeparatingPair {
    k: usize,
    omega: CVector,
}

impl CyclicSeparatingPair {
    pub fn new(k: usize, omega: CVector) -> Result<Self, ModularError> {
        if omega.len() != k * k {
            return Err(OperatorError::DimensionMismatch(format!(
                "vector of length {} for factor size {k}",
                omega.len()
            ))
            .into());
        }
        let norm = omega.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(ModularError::NotNormalized { norm });
        }
        let pair = Self { k, omega };
        let smallest = pair
            .schmidt_coefficients()
            .iter()
            .fold(f64::INFINITY, |m, &s| m.min(s));
        if smallest < SCHMIDT_FLOOR {
            return Err(ModularError::NotSeparating {
                smallest,
                floor: SCHMIDT_FLOOR,
            });
        }
        Ok(pair)
    }

    /// `sum_m sqrt(p_m) e_m ⊗ e_m` for the given probabilities (normalized here).
    pub fn from_schmidt(probabilities: &[f64]) -> Result<Self, ModularError> {
        let k = probabilities.len();
        let total: f64 = probabilities.iter().sum();
        let mut omega = CVector::zeros(k * k);
        for (m, &p) in probabilities.iter().enumerate() {
            omega[m * k + m] = C64::new((p / total).sqrt(), 0.0);
        }
        Self::new(k, omega)
    }

    pub fn maximally_entangled(k: usize) -> Self {
        Self::from_schmidt(&vec![1.0; k]).expect("uniform Schmidt data is valid")
    }

    /// Random pair with Schmidt probabilities proportional to `0.2 + U(0,1)`,
    /// rotated by random unitaries on both factors.
    pub fn random<R: Rng>(k: usize, rng: &mut R) -> Self {
        let weights: Vec<f64> = (0..k).map(|_| 0.2 + rng.random::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        let u = random_unitary(k, rng);
        let w = random_unitary(k, rng);
        let mut psi = CMatrix::zeros(k, k);
        for m in 0..k {
            let s = (weights[m] / total).sqrt();
            psi += (u.column(m) * w.column(m).transpose()) * C64::new(s, 0.0);
        }
        Self::new(k, vec_of(&psi)).expect("random Schmidt data is full rank")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn hilbert_dim(&self) -> usize {
        self.k * self.k
    }

    pub fn omega(&self) -> &CVector {
        &self.omega
    }

    /// Coefficient matrix `ψ_{ab}` with `Ω = sum ψ_{ab} e_a ⊗ e_b`.
    pub fn coefficient_matrix(&self) -> CMatrix {
        unvec(&self.omega, self.k)
    }

    /// Schmidt coefficients in descending order.
    pub fn schmidt_coefficients(&self) -> Vec<f64> {
        let svd = SVD::new(self.coefficient_matrix(), false, false);
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }
}

pub(crate) fn vec_of(m: &CMatrix) -> CVector {
    let k = m.nrows();
    CVector::from_fn(k * m.ncols(), |i, _| m[(i / m.ncols(), i % m.ncols())])
}

pub(crate) fn unvec(v: &CVector, k: usize) -> CMatrix {
    CMatrix::from_fn(k, k, |a, b| v[a * k + b])
}

/// Haar-like random unitary from the QR decomposition of a Gaussian matrix.
pub fn random_unitary<R: Rng>(k: usize, rng: &mut R) -> CMatrix {
    let g = random_gaussian_matrix(k, k, rng);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..k {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for z in q.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    q
}

pub fn random_gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Random element `X ⊗ 1` of `M_k ⊗ 1`.
pub fn random_algebra_element<R: Rng>(k: usize, rng: &mut R) -> CMatrix {
    random_gaussian_matrix(k, k, rng).kronecker(&CMatrix::identity(k, k))
}

/// Generators `1 ⊗ E_ij` of the commutant `1 ⊗ M_k`.
pub fn commutant_generators(k: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let mut e = CMatrix::zeros(k, k);
            e[(i, j)] = C64::new(1.0, 0.0);
            out.push(CMatrix::identity(k, k).kronecker(&e));
        }
    }
    out
}

/// Largest commutator norm of `a` with the commutant generators, relative to `max(1, ‖a‖_F)`.
pub fn membership_defect(a: &CMatrix, k: usize) -> f64 {
    let scale = a.norm().max(1.0);
    commutant_generators(k)
        .iter()
        .map(|g| (a * g - g * a).norm())
        .fold(0.0, f64::max)
        / scale
}

/// Tomita objects of a pair: `J` (realified), `Δ`, and `K = log Δ`.
#[derive(Debug, Clone)]
pub struct ModularData {
    pub j: RealLinearOperator,
    pub delta: HermitianOperator,
    pub k: HermitianOperator,
    pub omega: CVector,
}

impl ModularData {
    /// `‖J Δ^{1/2} A Ω − A* Ω‖`.
    pub fn defining_property_residual(&self, a: &CMatrix) -> f64 {
        let a_omega = a * &self.omega;
        let half = self
            .k
            .apply_fn(|x| C64::new((0.5 * x).exp(), 0.0), &a_omega)
            .expect("finite modular spectrum");
        let lhs = self.j.apply(&half);
        (lhs - a.adjoint() * &self.omega).norm()
    }

    /// `Δ^{t}` as a complex matrix.
    pub fn delta_power(&self, t: f64) -> CMatrix {
        self.k
            .func_calc_complex(|x| C64::new((t * x).exp(), 0.0))
            .expect("finite modular spectrum")
    }

    /// `‖J Δ^{1/2} − Δ^{-1/2} J‖_F` as real-linear maps.
    pub fn intertwining_defect(&self) -> f64 {
        let half = RealLinearOperator::from_linear(&self.delta_power(0.5));
        let minus_half = RealLinearOperator::from_linear(&self.delta_power(-0.5));
        let lhs = self.j.compose(&half);
        let rhs = minus_half.compose(&self.j);
        (lhs.real_matrix() - rhs.real_matrix()).norm()
    }

    /// `Δ^{is}`.
    pub fn flow_unitary(&self, s: f64) -> CMatrix {
        self.k.unitary_group(s)
    }
}

/// Modular objects of `(M_k ⊗ 1, Ω)` from the Schmidt decomposition `ψ = U S W^T`.
pub fn tomita_objects(pair: &CyclicSeparatingPair) -> ModularData {
    let k = pair.k;
    let svd = SVD::new(pair.coefficient_matrix(), true, true);
    let u = svd.u.expect("left vectors requested");
    let w = svd.v_t.expect("right vectors requested").transpose();
    let p: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();

    let vectors = u.kronecker(&w);
    let mut logs = RVector::zeros(k * k);
    let mut ratios = RVector::zeros(k * k);
    for m in 0..k {
        for n in 0..k {
            logs[m * k + n] = p[m].ln() - p[n].ln();
            ratios[m * k + n] = p[m] / p[n];
        }
    }
    let delta = HermitianOperator::from_spectrum(ratios, vectors.clone());
    let log_delta = HermitianOperator::from_spectrum(logs, vectors);

    // J vec(Z) = vec(X Z† X) with X = U W^T.
    let x = &u * w.transpose();
    let mut m = CMatrix::zeros(k * k, k * k);
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                for d in 0..k {
                    m[(a * k + b, d * k + c)] = x[(a, c)] * x[(d, b)];
                }
            }
        }
    }
    ModularData {
        j: RealLinearOperator::from_antilinear(&m),
        delta,
        k: log_delta,
        omega: pair.omega.clone(),
    }
}

/// `Δ^{is} A Δ^{-is}` for `A` in `M_k ⊗ 1`.
pub fn modular_flow(md: &ModularData, a: &CMatrix, k: usize, s: f64) -> Result<CMatrix, ModularError> {
    let defect = membership_defect(a, k);
    if defect > MEMBERSHIP_TOL {
        return Err(ModularError::NotInAlgebra { defect });
    }
    if s == 0.0 {
        return Ok(a.clone());
    }
    let u = md.flow_unitary(s);
    Ok(&u * a * u.adjoint())
}

/// One invariant block of a standard subspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularBlock {
    /// `c = |Im <k_x, k_y>|` for the real-orthonormal pair; 0 for a one-dimensional block.
    pub c: f64,
    /// `log δ` on the `f₊` direction (clipped).
    pub epsilon: f64,
    /// `2 atanh c` before clipping; infinite when `c` rounds to 1.
    pub unclipped: f64,
    pub flagged: bool,
    pub one_dimensional: bool,
}

/// One-particle modular objects of a standard real subspace `K ⊂ C^n`.
#[derive(Debug, Clone)]
pub struct OneParticleModular {
    pub subspace_basis: Vec<CVector>,
    pub j: RealLinearOperator,
    pub delta1: HermitianOperator,
    pub log_delta1: HermitianOperator,
    pub blocks: Vec<ModularBlock>,
    /// Orthonormal eigenvectors of `log δ` (columns), aligned with `eigen_logs`.
    pub eigenvectors: CMatrix,
    pub eigen_logs: Vec<f64>,
    pub eigen_flagged: Vec<bool>,
    /// Real-orthonormal vectors of `K` belonging to unflagged blocks.
    pub unflagged_real_vectors: Vec<CVector>,
}

fn real_rank(m: &RMatrix, rel: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let s = SVD::new(m.clone(), false, false).singular_values;
    let top = s.iter().fold(0.0_f64, |a, &b| a.max(b));
    s.iter().filter(|&&x| x > rel * top).count()
}

fn complex_rank(m: &CMatrix, rel: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let s = SVD::new(m.clone(), false, false).singular_values;
    let top = s.iter().fold(0.0_f64, |a, &b| a.max(b));
    s.iter().filter(|&&x| x > rel * top).count()
}

const RANK_TOL: f64 = 1e-10;

/// Builds `j`, `δ`, `log δ` from a real-linear basis of `K` via the canonical
/// block form of the symplectic part of the Gram matrix.
pub fn one_particle_modular(basis: &[CVector]) -> Result<OneParticleModular, ModularError> {
    let n = basis.first().map(|v| v.len()).unwrap_or(0);
    let m = basis.len();
    let bc = CMatrix::from_fn(n, m, |i, j| basis[j][i]);
    let br = RMatrix::from_fn(2 * n, m, |i, j| realify(&basis[j])[i]);
    let rank_r = real_rank(&br, RANK_TOL);
    let rank_c = complex_rank(&bc, RANK_TOL);
    if rank_r > rank_c {
        return Err(ModularError::SubspaceNotSeparating {
            dimension: 2 * (rank_r - rank_c),
        });
    }
    if rank_c < n {
        return Err(ModularError::NotCyclic { rank: rank_c, dim: n });
    }

    // Real-orthonormal basis e of K (Gram matrix Re<k_i,k_j> whitened).
    let gram = bc.adjoint() * &bc;
    let g = gram.map(|z| z.re);
    let ge = nalgebra::SymmetricEigen::new(g.clone());
    let top = ge.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut e_cols: Vec<CVector> = Vec::new();
    for (idx, &val) in ge.eigenvalues.iter().enumerate() {
        if val > RANK_TOL * RANK_TOL * top {
            let coeff = ge.eigenvectors.column(idx) / val.sqrt();
            let coeff_c = coeff.map(|x| C64::new(x, 0.0));
            e_cols.push(&bc * coeff_c);
        }
    }
    let d = e_cols.len();
    let e = CMatrix::from_fn(n, d, |i, j| e_cols[j][i]);
    let t = (e.adjoint() * &e).map(|z| z.im);
    let it = HermitianOperator::new(t.map(|x| C64::new(0.0, x)))?;
    let spec = it.eig();

    let clip_eps = DELTA_CLIP.ln();
    let c_clip = (0.5 * clip_eps).tanh();
    let zero_tol = 1e-12;

    let mut blocks = Vec::new();
    let mut vecs: Vec<CVector> = Vec::new();
    let mut logs = Vec::new();
    let mut flags = Vec::new();
    let mut partner: Vec<usize> = Vec::new();
    let mut unflagged_real = Vec::new();
    let mut kernel_cols: Vec<CVector> = Vec::new();

    for idx in 0..d {
        let c = spec.values[idx];
        let w = spec.vectors.column(idx);
        if c.abs() <= zero_tol {
            kernel_cols.push(w.into_owned());
            continue;
        }
        if c < 0.0 {
            continue;
        }
        let x = w.map(|z| C64::new(z.re * 2f64.sqrt(), 0.0));
        let y = w.map(|z| C64::new(z.im * 2f64.sqrt(), 0.0));
        let kx = &e * x;
        let ky = &e * y;
        let flagged = !c.is_finite() || c >= c_clip;
        let eps = if flagged { clip_eps } else { 2.0 * c.atanh() };
        let fp = &ky + &kx * C64::new(0.0, 1.0);
        let fm = &ky - &kx * C64::new(0.0, 1.0);
        let fp = normalize(fp);
        let fm = normalize(fm);
        let base = vecs.len();
        vecs.push(fp);
        vecs.push(fm);
        logs.push(eps);
        logs.push(-eps);
        flags.push(flagged);
        flags.push(flagged);
        partner.push(base + 1);
        partner.push(base);
        if !flagged {
            unflagged_real.push(kx);
            unflagged_real.push(ky);
        }
        blocks.push(ModularBlock {
            c,
            epsilon: eps,
            unclipped: 2.0 * c.min(1.0).atanh(),
            flagged,
            one_dimensional: false,
        });
    }

    // Kernel of T: real orthonormal basis, each vector its own block with δ = 1.
    if !kernel_cols.is_empty() {
        let kd = kernel_cols.len();
        let stacked = RMatrix::from_fn(d, 2 * kd, |i, j| {
            if j < kd {
                kernel_cols[j][i].re
            } else {
                kernel_cols[j - kd][i].im
            }
        });
        let svd = SVD::new(stacked, true, false);
        let u = svd.u.expect("left vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        for &col in order.iter().take(kd) {
            let coeff = u.column(col).map(|x| C64::new(x, 0.0));
            let k0 = normalize(&e * coeff);
            let base = vecs.len();
            vecs.push(k0.clone());
            logs.push(0.0);
            flags.push(false);
            partner.push(base);
            unflagged_real.push(k0);
            blocks.push(ModularBlock {
                c: 0.0,
                epsilon: 0.0,
                unclipped: 0.0,
                flagged: false,
                one_dimensional: true,
            });
        }
    }

    let dim = vecs.len();
    let u = CMatrix::from_fn(n, dim, |i, j| vecs[j][i]);
    let mut pi = CMatrix::zeros(dim, dim);
    for (a, &b) in partner.iter().enumerate() {
        pi[(b, a)] = C64::new(1.0, 0.0);
    }
    let jm = &u * pi * u.transpose();
    let j = RealLinearOperator::from_antilinear(&jm);
    let log_delta1 = HermitianOperator::from_spectrum(RVector::from_vec(logs.clone()), u.clone());
    let delta1 = HermitianOperator::from_spectrum(
        RVector::from_iterator(dim, logs.iter().map(|l| l.exp())),
        u.clone(),
    );
    Ok(OneParticleModular {
        subspace_basis: basis.to_vec(),
        j,
        delta1,
        log_delta1,
        blocks,
        eigenvectors: u,
        eigen_logs: logs,
        eigen_flagged: flags,
        unflagged_real_vectors: unflagged_real,
    })
}

fn normalize(v: CVector) -> CVector {
    let n = v.norm();
    v / C64::new(n, 0.0)
}

impl OneParticleModular {
    /// `max ‖j δ^{1/2} k − k‖` over real-orthonormal vectors of unflagged blocks.
    pub fn tomita_residual(&self) -> f64 {
        self.unflagged_real_vectors
            .iter()
            .map(|k| {
                let half = self
                    .log_delta1
                    .apply_fn(|x| C64::new((0.5 * x).exp(), 0.0), k)
                    .expect("clipped spectrum is finite");
                (self.j.apply(&half) - k).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Positive modular energies `ε_j` of all blocks (flagged ones clipped), descending by size of c.
    pub fn epsilons(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.epsilon).collect()
    }

    /// Projector onto the span of unflagged eigenvectors.
    pub fn unflagged_projector(&self) -> CMatrix {
        let n = self.eigenvectors.nrows();
        let mut p = CMatrix::zeros(n, n);
        for (idx, &f) in self.eigen_flagged.iter().enumerate() {
            if !f {
                let v = self.eigenvectors.column(idx);
                p += &v * v.adjoint();
            }
        }
        p
    }

    pub fn flagged_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.flagged).count()
    }
}

/// Second-quantized modular objects on a truncated Fock space.
#[derive(Debug, Clone)]
pub struct FockModular {
    pub data: ModularData,
    /// `Γ(P)` for the projector onto unflagged one-particle directions.
    pub unflagged: CMatrix,
    pub flagged_blocks: usize,
}

impl FockModular {
    pub fn project_unflagged(&self, v: &CVector) -> CVector {
        &self.unflagged * v
    }
}

/// `K♯ = dΓ(log δ)`, `J♯ = Γ(j)` on the truncation (all modes must be retained).
pub fn second_quantized_modular(
    op1: &OneParticleModular,
    trunc: &FockTruncation,
) -> Result<FockModular, ModularError> {
    let n = op1.eigenvectors.nrows();
    if trunc.n_max() < 2 {
        return Err(TruncationError::TooSmall {
            n_max: trunc.n_max(),
            needed: 2,
        }
        .into());
    }
    if !trunc.retains_all_modes() || trunc.n_modes() != n {
        return Err(TruncationError::IncompleteModes {
            retained: trunc.n_modes(),
            total: n,
        }
        .into());
    }
    let basis = trunc.mode_basis();
    let u = basis.adjoint() * &op1.eigenvectors;
    let gamma_u = trunc.second_quantize(&u);
    let sums: Vec<f64> = (0..trunc.dim())
        .map(|i| {
            trunc
                .occupation(i)
                .iter()
                .zip(&op1.eigen_logs)
                .map(|(&c, &l)| c as f64 * l)
                .sum()
        })
        .collect();
    let k = HermitianOperator::from_spectrum(RVector::from_vec(sums.clone()), gamma_u.clone());
    let delta = HermitianOperator::from_spectrum(
        RVector::from_iterator(sums.len(), sums.iter().map(|s| s.exp())),
        gamma_u,
    );
    let jm = basis.adjoint() * op1.j.antilinear_matrix() * basis.map(|z| z.conj());
    let j = RealLinearOperator::from_antilinear(&trunc.second_quantize(&jm));
    let p = basis.adjoint() * op1.unflagged_projector() * basis;
    let unflagged = trunc.second_quantize(&p);
    Ok(FockModular {
        data: ModularData {
            j,
            delta,
            k,
            omega: trunc.vacuum(),
        },
        unflagged,
        flagged_blocks: op1.flagged_count(),
    })
}
