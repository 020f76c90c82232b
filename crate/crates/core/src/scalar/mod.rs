//! Free scalar field on a periodic lattice chain.
//!
//! One-particle vectors are stored in normal-mode coordinates: the amplitude of
//! `χ` on mode `k` is `α_k = √a φ_kᵀ χ`, so the lattice inner product
//! `a Σ χ̄ χ'` becomes the Euclidean one. Field operators are
//! `φ_x = Σ_k (f_{xk} a_k + h.c.)` and `π_x = Σ_k (p_{xk} a_k + h.c.)`.

pub mod energy;
pub mod quadratic;
pub mod region;
pub mod smearing;

use thiserror::Error;

use crate::operator::{CMatrix, CVector, HermitianOperator, OperatorError, RMatrix, RVector, C64};
use crate::precision::{dd, div, sin_cos_turns, Dd};

pub use energy::*;
pub use quadratic::*;
pub use region::*;
pub use smearing::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid lattice parameter {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("datum has length {got}, lattice has {expected} sites")]
    DatumLength { got: usize, expected: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Periodic chain with `Q = -Δ_a + μ`.
#[derive(Debug, Clone)]
pub struct LatticeModel {
    n: usize,
    a: f64,
    mu: f64,
    q: HermitianOperator,
    /// Real orthonormal plane-wave modes as columns, ordered by ascending frequency.
    modes: RMatrix,
    omega: Vec<f64>,
}

impl LatticeModel {
    pub fn new(n: usize, a: f64, mu: f64) -> Result<Self, LatticeError> {
        if n == 0 {
            return Err(LatticeError::InvalidParameter {
                field: "N",
                reason: "at least one site is required".into(),
            });
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(LatticeError::InvalidParameter {
                field: "a",
                reason: format!("spacing must be positive, got {a}"),
            });
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(LatticeError::InvalidParameter {
                field: "mu",
                reason: format!("must be positive to exclude zero modes, got {mu}"),
            });
        }
        let mut q = RMatrix::from_diagonal_element(n, n, mu);
        if n > 1 {
            let h = 1.0 / (a * a);
            for x in 0..n {
                q[(x, x)] += 2.0 * h;
                q[(x, (x + 1) % n)] -= h;
                q[(x, (x + n - 1) % n)] -= h;
            }
        }
        let table = mode_table(n, a, mu);
        let modes = RMatrix::from_fn(n, n, |x, k| table[k].value(x, n));
        let omega = table.iter().map(|m| m.omega(n, a, mu)).collect();
        Ok(Self {
            n,
            a,
            mu,
            q: HermitianOperator::from_real(&q)?,
            modes,
            omega,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn q(&self) -> &HermitianOperator {
        &self.q
    }

    pub fn modes(&self) -> &RMatrix {
        &self.modes
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Site positions `(x + 1/2) a`.
    pub fn position(&self, x: usize) -> f64 {
        (x as f64 + 0.5) * self.a
    }

    pub fn length(&self) -> f64 {
        self.n as f64 * self.a
    }

    /// `Q^p` as a real matrix.
    pub fn q_power(&self, p: f64) -> RMatrix {
        let mut scaled = self.modes.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.omega[k].powf(2.0 * p);
        }
        &scaled * self.modes.transpose()
    }

    /// Lattice inner product `a Σ ū v` of real vectors.
    pub fn inner(&self, u: &RVector, v: &RVector) -> f64 {
        self.a * u.dot(v)
    }

    /// `χ = Q^{1/4} u + i Q^{-1/4} v` in site coordinates.
    pub fn one_particle_structure(&self, datum: &CauchyDatum) -> Result<CVector, LatticeError> {
        self.check(datum)?;
        let re = self.q_power(0.25) * &datum.u;
        let im = self.q_power(-0.25) * &datum.v;
        Ok(CVector::from_fn(self.n, |i, _| C64::new(re[i], im[i])))
    }

    /// Normal-mode amplitudes `α_k = √a φ_kᵀ χ` of a site-coordinate vector.
    pub fn mode_amplitudes(&self, chi: &CVector) -> CVector {
        let m = self.modes.map(|x| C64::new(x * self.a.sqrt(), 0.0));
        m.transpose() * chi
    }

    /// Mode amplitudes of `χ_{u⊕v}`.
    pub fn datum_amplitudes(&self, datum: &CauchyDatum) -> Result<CVector, LatticeError> {
        Ok(self.mode_amplitudes(&self.one_particle_structure(datum)?))
    }

    /// Lattice inner product of two site-coordinate one-particle vectors.
    pub fn one_particle_inner(&self, f: &CVector, g: &CVector) -> C64 {
        f.dotc(g) * self.a
    }

    /// `d(f, g) = a Σ (u_f v_g − v_f u_g)`.
    pub fn symplectic_form(&self, f: &CauchyDatum, g: &CauchyDatum) -> f64 {
        self.a * (f.u.dot(&g.v) - f.v.dot(&g.u))
    }

    /// `‖(Q^{1/2})‖`-weighted classical energy `½(⟨u,Qu⟩ + ⟨v,v⟩)`.
    pub fn classical_energy(&self, datum: &CauchyDatum) -> f64 {
        let qu = self.q.entries().map(|z| z.re) * &datum.u;
        0.5 * (self.inner(&datum.u, &qu) + self.inner(&datum.v, &datum.v))
    }

    /// `c_k(x) = φ_k(x)/√a`.
    pub fn mode_function(&self, k: usize, x: usize) -> f64 {
        self.modes[(x, k)] / self.a.sqrt()
    }

    /// Coefficients of `a_k` in `φ_x`: `-i c_k(x)/√(2ω_k)`.
    pub fn field_coefficients(&self, x: usize) -> CVector {
        CVector::from_fn(self.n, |k, _| {
            C64::new(0.0, -self.mode_function(k, x) / (2.0 * self.omega[k]).sqrt())
        })
    }

    /// Coefficients of `a_k` in `π_x`: `-c_k(x) √(ω_k/2)`.
    pub fn momentum_coefficients(&self, x: usize) -> CVector {
        CVector::from_fn(self.n, |k, _| {
            C64::new(-self.mode_function(k, x) * (0.5 * self.omega[k]).sqrt(), 0.0)
        })
    }

    /// `T` with `ξ = T a + T̄ a⁺` for `ξ = (φ_1..φ_N, π_1..π_N)`.
    pub fn phase_space_map(&self) -> CMatrix {
        let n = self.n;
        let mut t = CMatrix::zeros(2 * n, n);
        for x in 0..n {
            t.set_row(x, &self.field_coefficients(x).transpose());
            t.set_row(n + x, &self.momentum_coefficients(x).transpose());
        }
        t
    }

    /// `R` with `a = R ξ`.
    pub fn annihilation_map(&self) -> CMatrix {
        let n = self.n;
        CMatrix::from_fn(n, 2 * n, |k, col| {
            let w = self.omega[k];
            if col < n {
                C64::new(0.0, 0.5 * (2.0 * w).sqrt() * self.a * self.mode_function(k, col))
            } else {
                C64::new(-0.5 * (2.0 / w).sqrt() * self.a * self.mode_function(k, col - n), 0.0)
            }
        })
    }

    /// Real-linear basis of the local subspace `{χ_{u⊕v} : supp u, v ⊂ region}` in mode coordinates.
    pub fn local_subspace_basis(&self, region: &[usize]) -> Vec<CVector> {
        let mut out = Vec::with_capacity(2 * region.len());
        for &x in region {
            out.push(
                self.datum_amplitudes(&CauchyDatum::site(self.n, x, 1.0, 0.0))
                    .expect("site datum has lattice length"),
            );
            out.push(
                self.datum_amplitudes(&CauchyDatum::site(self.n, x, 0.0, 1.0))
                    .expect("site datum has lattice length"),
            );
        }
        out
    }

    fn check(&self, datum: &CauchyDatum) -> Result<(), LatticeError> {
        if datum.u.len() != self.n || datum.v.len() != self.n {
            return Err(LatticeError::DatumLength {
                got: datum.u.len().max(datum.v.len()),
                expected: self.n,
            });
        }
        Ok(())
    }
}

/// Plane-wave normal mode of the periodic chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    Cos(usize),
    Sin(usize),
}

impl Mode {
    fn wavenumber(self) -> usize {
        match self {
            Mode::Cos(k) | Mode::Sin(k) => k,
        }
    }

    fn omega(self, n: usize, a: f64, mu: f64) -> f64 {
        let s = (std::f64::consts::PI * self.wavenumber() as f64 / n as f64).sin();
        if n == 1 {
            return mu.sqrt();
        }
        (mu + 4.0 * s * s / (a * a)).sqrt()
    }

    fn value(self, x: usize, n: usize) -> f64 {
        crate::precision::to_f64(self.value_dd(x, n))
    }

    /// Normalized mode function at site `x` in double-double precision.
    pub(crate) fn value_dd(self, x: usize, n: usize) -> Dd {
        let k = self.wavenumber();
        let standing = k == 0 || 2 * k == n;
        let norm = if standing { div(dd(1.0), dd(n as f64)).sqrt() } else { div(dd(2.0), dd(n as f64)).sqrt() };
        let (s, c) = sin_cos_turns((k * x) as u64, n as u64);
        match self {
            Mode::Cos(_) => c * norm,
            Mode::Sin(_) => s * norm,
        }
    }

    /// `ω²` in double-double precision.
    pub(crate) fn omega_sq_dd(self, n: usize, a: f64, mu: f64) -> Dd {
        if n == 1 {
            return dd(mu);
        }
        let (s, _) = sin_cos_turns(self.wavenumber() as u64, 2 * n as u64);
        dd(mu) + div(dd(4.0) * s * s, dd(a) * dd(a))
    }
}

/// Modes ordered by ascending frequency; cosine before sine within a degenerate pair.
pub(crate) fn mode_table(n: usize, a: f64, mu: f64) -> Vec<Mode> {
    let mut table = vec![Mode::Cos(0)];
    for k in 1..=n / 2 {
        table.push(Mode::Cos(k));
        if 2 * k != n {
            table.push(Mode::Sin(k));
        }
    }
    table.sort_by(|p, q| {
        p.omega(n, a, mu)
            .total_cmp(&q.omega(n, a, mu))
            .then(p.wavenumber().cmp(&q.wavenumber()))
            .then(matches!(p, Mode::Sin(_)).cmp(&matches!(q, Mode::Sin(_))))
    });
    table
}

/// Cauchy data `u ⊕ v` on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyDatum {
    pub u: RVector,
    pub v: RVector,
}

impl CauchyDatum {
    pub fn new(u: RVector, v: RVector) -> Self {
        Self { u, v }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(RVector::zeros(n), RVector::zeros(n))
    }

    pub fn site(n: usize, x: usize, u: f64, v: f64) -> Self {
        let mut d = Self::zero(n);
        d.u[x] = u;
        d.v[x] = v;
        d
    }

    pub fn scaled(&self, m: f64) -> Self {
        Self::new(&self.u * m, &self.v * m)
    }

    pub fn add(&self, other: &CauchyDatum) -> Self {
        Self::new(&self.u + &other.u, &self.v + &other.v)
    }

    /// Sites where either component is nonzero.
    pub fn support(&self) -> Vec<usize> {
        (0..self.u.len())
            .filter(|&x| self.u[x] != 0.0 || self.v[x] != 0.0)
            .collect()
    }

    pub fn supported_in(&self, region: &[usize]) -> bool {
        self.support().iter().all(|x| region.contains(x))
    }
}
