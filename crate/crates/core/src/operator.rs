//! Dense Hermitian and real-linear operators with cached spectral data.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

/// Relative Frobenius tolerance for accepting a matrix as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("matrix is not Hermitian: ||A - A*||_F = {defect:e} exceeds {tolerance:e} relative to ||A||_F = {scale:e}")]
    NotHermitian {
        defect: f64,
        scale: f64,
        tolerance: f64,
    },
    #[error("function is not finite at eigenvalue {eigenvalue:e}")]
    Domain { eigenvalue: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: RVector,
    pub vectors: CMatrix,
}

impl Spectrum {
    /// Applies `f(A)` to `v` without forming the matrix.
    pub fn apply_fn<F: Fn(f64) -> C64>(&self, f: F, v: &CVector) -> Result<CVector, OperatorError> {
        let mut coeffs = self.vectors.ad_mul(v);
        for (i, c) in coeffs.iter_mut().enumerate() {
            let fx = f(self.values[i]);
            if !(fx.re.is_finite() && fx.im.is_finite()) {
                return Err(OperatorError::Domain {
                    eigenvalue: self.values[i],
                });
            }
            *c *= fx;
        }
        Ok(&self.vectors * coeffs)
    }
}

/// Self-adjoint matrix whose eigendecomposition is computed once on demand.
#[derive(Debug)]
pub struct HermitianOperator {
    entries: CMatrix,
    spectrum: OnceLock<Spectrum>,
}

impl Clone for HermitianOperator {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        Self {
            entries: self.entries.clone(),
            spectrum,
        }
    }
}

impl HermitianOperator {
    /// Validates Hermiticity at [`HERMITICITY_TOL`] and symmetrizes.
    pub fn new(entries: CMatrix) -> Result<Self, OperatorError> {
        if !entries.is_square() {
            return Err(OperatorError::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let adjoint = entries.adjoint();
        let defect = (&entries - &adjoint).norm();
        let scale = entries.norm();
        if defect > HERMITICITY_TOL * scale {
            return Err(OperatorError::NotHermitian {
                defect,
                scale,
                tolerance: HERMITICITY_TOL,
            });
        }
        let entries = (entries + adjoint) * C64::new(0.5, 0.0);
        Ok(Self {
            entries,
            spectrum: OnceLock::new(),
        })
    }

    pub fn from_real(m: &RMatrix) -> Result<Self, OperatorError> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = CVector::from_iterator(values.len(), values.iter().map(|&x| C64::new(x, 0.0)));
        Self {
            entries: CMatrix::from_diagonal(&d),
            spectrum: OnceLock::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::diagonal(&vec![0.0; n])
    }

    /// Builds `V diag(values) V*` and seeds the spectral cache with the given data.
    pub fn from_spectrum(values: RVector, vectors: CMatrix) -> Self {
        let (values, vectors) = sort_spectrum(values, vectors);
        let scaled = scale_columns(&vectors, &values);
        let entries = &scaled * vectors.adjoint();
        let entries = (&entries + entries.adjoint()) * C64::new(0.5, 0.0);
        let spectrum = OnceLock::new();
        let _ = spectrum.set(Spectrum { values, vectors });
        Self { entries, spectrum }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Ascending eigenvalues and phase-fixed eigenvectors (cached).
    pub fn eig(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| eig_herm(&self.entries))
    }

    pub fn eigenvalues(&self) -> &RVector {
        &self.eig().values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let v = self.eigenvalues();
        if v.is_empty() {
            0.0
        } else {
            v[0]
        }
    }

    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// `f(A)` for a real scalar function; fails if `f` is not finite on the spectrum.
    pub fn func_calc<F: Fn(f64) -> f64>(&self, f: F) -> Result<HermitianOperator, OperatorError> {
        let spec = self.eig();
        let mut mapped = RVector::zeros(spec.values.len());
        for (i, &x) in spec.values.iter().enumerate() {
            let fx = f(x);
            if !fx.is_finite() {
                return Err(OperatorError::Domain { eigenvalue: x });
            }
            mapped[i] = fx;
        }
        Ok(Self::from_spectrum(mapped, spec.vectors.clone()))
    }

    /// `f(A)` for a complex scalar function (e.g. `e^{isA}`).
    pub fn func_calc_complex<F: Fn(f64) -> C64>(&self, f: F) -> Result<CMatrix, OperatorError> {
        let spec = self.eig();
        let mut scaled = spec.vectors.clone();
        for (j, &x) in spec.values.iter().enumerate() {
            let fx = f(x);
            if !(fx.re.is_finite() && fx.im.is_finite()) {
                return Err(OperatorError::Domain { eigenvalue: x });
            }
            for z in scaled.column_mut(j).iter_mut() {
                *z *= fx;
            }
        }
        Ok(&scaled * spec.vectors.adjoint())
    }

    /// `e^{isA}`.
    pub fn unitary_group(&self, s: f64) -> CMatrix {
        self.func_calc_complex(|x| C64::from_polar(1.0, s * x))
            .expect("phase factors are finite")
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.entries * v
    }

    pub fn apply_fn<F: Fn(f64) -> C64>(&self, f: F, v: &CVector) -> Result<CVector, OperatorError> {
        self.eig().apply_fn(f, v)
    }

    /// `Re (v, A v)`.
    pub fn expectation(&self, v: &CVector) -> f64 {
        v.dotc(&(&self.entries * v)).re
    }

    pub fn tensor(&self, other: &HermitianOperator) -> HermitianOperator {
        Self {
            entries: self.entries.kronecker(&other.entries),
            spectrum: OnceLock::new(),
        }
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<HermitianOperator, OperatorError> {
        if self.dim() != other.dim() {
            return Err(OperatorError::DimensionMismatch(format!(
                "cannot add {}-dimensional and {}-dimensional operators",
                self.dim(),
                other.dim()
            )));
        }
        Self::new(&self.entries + &other.entries)
    }
}

fn scale_columns(vectors: &CMatrix, values: &RVector) -> CMatrix {
    let mut out = vectors.clone();
    for (j, &x) in values.iter().enumerate() {
        for z in out.column_mut(j).iter_mut() {
            *z *= x;
        }
    }
    out
}

fn sort_spectrum(values: RVector, vectors: CMatrix) -> (RVector, CMatrix) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let sorted = RVector::from_iterator(values.len(), order.iter().map(|&i| values[i]));
    let mut vecs = CMatrix::zeros(vectors.nrows(), vectors.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &vectors.column(src));
    }
    (sorted, vecs)
}

fn fix_phases(vectors: &mut CMatrix) {
    for mut col in vectors.column_iter_mut() {
        let scale = col.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        if let Some(&lead) = col.iter().find(|z| z.norm() > 1e-8 * scale) {
            let phase = lead.conj() / lead.norm();
            for z in col.iter_mut() {
                *z *= phase;
            }
        }
    }
}

/// Hermitian eigensolver with ascending order and deterministic phases.
pub fn eig_herm(a: &CMatrix) -> Spectrum {
    let n = a.nrows();
    let is_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] == C64::new(0.0, 0.0)));
    let (values, mut vectors) = if is_diagonal {
        let values = RVector::from_iterator(n, (0..n).map(|i| a[(i, i)].re));
        sort_spectrum(values, CMatrix::identity(n, n))
    } else {
        let eig = SymmetricEigen::new(a.clone());
        sort_spectrum(eig.eigenvalues, eig.eigenvectors)
    };
    fix_phases(&mut vectors);
    Spectrum { values, vectors }
}

/// Kronecker product.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Traces out `factor` (1 or 2) of an operator on `C^{d1} (x) C^{d2}`.
pub fn partial_trace(
    x: &CMatrix,
    dims: (usize, usize),
    factor: usize,
) -> Result<CMatrix, OperatorError> {
    let (d1, d2) = dims;
    if x.nrows() != d1 * d2 || x.ncols() != d1 * d2 {
        return Err(OperatorError::DimensionMismatch(format!(
            "operator is {}x{}, factors give {}",
            x.nrows(),
            x.ncols(),
            d1 * d2
        )));
    }
    match factor {
        1 => Ok(CMatrix::from_fn(d2, d2, |b, bp| {
            (0..d1).map(|a| x[(a * d2 + b, a * d2 + bp)]).sum()
        })),
        2 => Ok(CMatrix::from_fn(d1, d1, |a, ap| {
            (0..d2).map(|b| x[(a * d2 + b, ap * d2 + b)]).sum()
        })),
        other => Err(OperatorError::DimensionMismatch(format!(
            "factor index must be 1 or 2, got {other}"
        ))),
    }
}

pub fn realify(v: &CVector) -> RVector {
    let n = v.len();
    RVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

pub fn complexify(x: &RVector) -> CVector {
    let n = x.len() / 2;
    CVector::from_fn(n, |i, _| C64::new(x[i], x[i + n]))
}

/// Real-linear map on `C^n`, stored on the realification `(Re z, Im z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealLinearOperator {
    real_matrix: RMatrix,
}

impl RealLinearOperator {
    pub fn new(real_matrix: RMatrix) -> Result<Self, OperatorError> {
        if !real_matrix.is_square() || real_matrix.nrows() % 2 != 0 {
            return Err(OperatorError::DimensionMismatch(format!(
                "realified operator must be square of even size, got {}x{}",
                real_matrix.nrows(),
                real_matrix.ncols()
            )));
        }
        Ok(Self { real_matrix })
    }

    /// The matrix of multiplication by `i`.
    pub fn complex_structure(n: usize) -> RMatrix {
        let mut j = RMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            j[(k, n + k)] = -1.0;
            j[(n + k, k)] = 1.0;
        }
        j
    }

    /// `z -> M z`.
    pub fn from_linear(m: &CMatrix) -> Self {
        let n = m.nrows();
        let mut r = RMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for k in 0..n {
                let z = m[(i, k)];
                r[(i, k)] = z.re;
                r[(i, n + k)] = -z.im;
                r[(n + i, k)] = z.im;
                r[(n + i, n + k)] = z.re;
            }
        }
        Self { real_matrix: r }
    }

    /// `z -> M conj(z)`.
    pub fn from_antilinear(m: &CMatrix) -> Self {
        let n = m.nrows();
        let mut r = RMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for k in 0..n {
                let z = m[(i, k)];
                r[(i, k)] = z.re;
                r[(i, n + k)] = z.im;
                r[(n + i, k)] = z.im;
                r[(n + i, n + k)] = -z.re;
            }
        }
        Self { real_matrix: r }
    }

    pub fn complex_dim(&self) -> usize {
        self.real_matrix.nrows() / 2
    }

    pub fn real_matrix(&self) -> &RMatrix {
        &self.real_matrix
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        complexify(&(&self.real_matrix * realify(v)))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &RealLinearOperator) -> RealLinearOperator {
        Self {
            real_matrix: &self.real_matrix * &other.real_matrix,
        }
    }

    /// `‖R I + I R‖_F`; zero exactly for antilinear maps.
    pub fn antilinearity_defect(&self) -> f64 {
        let i = Self::complex_structure(self.complex_dim());
        (&self.real_matrix * &i + &i * &self.real_matrix).norm()
    }

    /// `‖R I - I R‖_F`; zero exactly for complex-linear maps.
    pub fn linearity_defect(&self) -> f64 {
        let i = Self::complex_structure(self.complex_dim());
        (&self.real_matrix * &i - &i * &self.real_matrix).norm()
    }

    /// Recovers `M` in `z -> M conj(z)` (meaningful when the map is antilinear).
    pub fn antilinear_matrix(&self) -> CMatrix {
        let n = self.complex_dim();
        let r = &self.real_matrix;
        CMatrix::from_fn(n, n, |i, k| C64::new(r[(i, k)], r[(n + i, k)]))
    }

    /// Recovers `M` in `z -> M z` (meaningful when the map is linear).
    pub fn linear_matrix(&self) -> CMatrix {
        let n = self.complex_dim();
        let r = &self.real_matrix;
        CMatrix::from_fn(n, n, |i, k| C64::new(r[(i, k)], r[(n + i, k)]))
    }
}
