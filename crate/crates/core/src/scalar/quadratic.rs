//! Normal-ordered quadratic forms in creation and annihilation operators, and
//! their transformation under Gaussian unitaries.

use crate::fock::FockTruncation;
use crate::operator::{CMatrix, CVector, C64};

/// `Z = Σ A_{kl} a⁺_k a⁺_l + h.c. + Σ B_{kl} a⁺_k a_l + Σ (L_k a⁺_k + h.c.) + c`,
/// with `A` symmetric and `B` Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub pair: CMatrix,
    pub number: CMatrix,
    pub linear: CVector,
    pub constant: f64,
}

/// Heisenberg action `S⁺ a S = U a + V a⁺ + β` of a Gaussian unitary `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovMap {
    pub u: CMatrix,
    pub v: CMatrix,
    pub beta: CVector,
}

fn sym(m: &CMatrix) -> CMatrix {
    (m + m.transpose()) * C64::new(0.5, 0.0)
}

impl QuadraticForm {
    pub fn zero(modes: usize) -> Self {
        Self {
            pair: CMatrix::zeros(modes, modes),
            number: CMatrix::zeros(modes, modes),
            linear: CVector::zeros(modes),
            constant: 0.0,
        }
    }

    /// `Σ ω_k a⁺_k a_k`.
    pub fn number_diagonal(omega: &[f64]) -> Self {
        let mut z = Self::zero(omega.len());
        for (k, &w) in omega.iter().enumerate() {
            z.number[(k, k)] = C64::new(w, 0.0);
        }
        z
    }

    pub fn modes(&self) -> usize {
        self.number.nrows()
    }

    pub fn sub(&self, other: &QuadraticForm) -> QuadraticForm {
        QuadraticForm {
            pair: &self.pair - &other.pair,
            number: &self.number - &other.number,
            linear: &self.linear - &other.linear,
            constant: self.constant - other.constant,
        }
    }

    pub fn scale(&self, s: f64) -> QuadraticForm {
        let c = C64::new(s, 0.0);
        QuadraticForm {
            pair: &self.pair * c,
            number: &self.number * c,
            linear: &self.linear * c,
            constant: self.constant * s,
        }
    }

    /// `(Ω, Z Ω)`.
    pub fn vacuum_expectation(&self) -> f64 {
        self.constant
    }

    /// `‖Z Ω‖ = sqrt(c² + ‖L‖² + 2‖A‖_F²)`.
    pub fn vacuum_image_norm(&self) -> f64 {
        (self.constant * self.constant + self.linear.norm_squared() + 2.0 * self.pair.norm_squared()).sqrt()
    }

    /// Restriction to the modes spanned by the orthonormal columns of `c`
    /// (`b_j = Σ_k C̄_{kj} a_k`); exact compression onto the Fock space of that span.
    pub fn compress(&self, c: &CMatrix) -> QuadraticForm {
        let cbar = c.map(|z| z.conj());
        QuadraticForm {
            pair: c.adjoint() * &self.pair * &cbar,
            number: c.adjoint() * &self.number * c,
            linear: c.adjoint() * &self.linear,
            constant: self.constant,
        }
    }

    /// `S⁺ Z S` for the Gaussian unitary with Heisenberg map `map`, normal ordered.
    pub fn transform(&self, map: &BogoliubovMap) -> QuadraticForm {
        let m = self.modes();
        // Doubled form Z = ½ Xᵀ N X + ℓᵀ X + c with X = (a, a⁺).
        let mut n = CMatrix::zeros(2 * m, 2 * m);
        let a2 = &self.pair * C64::new(2.0, 0.0);
        n.view_mut((m, m), (m, m)).copy_from(&a2);
        n.view_mut((0, 0), (m, m)).copy_from(&a2.map(|z| z.conj()));
        n.view_mut((m, 0), (m, m)).copy_from(&(&self.number * C64::new(2.0, 0.0)));
        let mut ell = CVector::zeros(2 * m);
        ell.rows_mut(0, m).copy_from(&self.linear.map(|z| z.conj()));
        ell.rows_mut(m, m).copy_from(&self.linear);

        let mut t = CMatrix::zeros(2 * m, 2 * m);
        t.view_mut((0, 0), (m, m)).copy_from(&map.u);
        t.view_mut((0, m), (m, m)).copy_from(&map.v);
        t.view_mut((m, 0), (m, m)).copy_from(&map.v.map(|z| z.conj()));
        t.view_mut((m, m), (m, m)).copy_from(&map.u.map(|z| z.conj()));
        let mut b = CVector::zeros(2 * m);
        b.rows_mut(0, m).copy_from(&map.beta);
        b.rows_mut(m, m).copy_from(&map.beta.map(|z| z.conj()));

        let n_sym = (&n + n.transpose()) * C64::new(0.5, 0.0);
        let quad = t.transpose() * &n * &t;
        let lin = t.transpose() * (&n_sym * &b + &ell);
        let half = C64::new(0.5, 0.0);
        let constant = (b.transpose() * &n * &b)[(0, 0)] * half + (ell.transpose() * &b)[(0, 0)];

        let n_ac = quad.view((0, m), (m, m)).into_owned();
        let n_ca = quad.view((m, 0), (m, m)).into_owned();
        let n_cc = quad.view((m, m), (m, m)).into_owned();
        let pair = sym(&n_cc) * half;
        let number = (&n_ca + n_ac.transpose()) * half;
        let trace_shift = n_ac.trace() * half;
        QuadraticForm {
            pair,
            number,
            linear: lin.rows(m, m).into_owned(),
            constant: self.constant + (constant + trace_shift).re,
        }
    }

    /// `(S Ω, Z S Ω)`.
    pub fn gaussian_expectation(&self, map: &BogoliubovMap) -> f64 {
        self.transform(map).constant
    }

    /// Matrix of the compression of `Z` to the truncation (modes in `trunc` coordinates).
    pub fn to_matrix(&self, trunc: &FockTruncation) -> CMatrix {
        self.compress(trunc.mode_basis()).local_matrix(trunc)
    }

    /// Matrix on the truncation of a form already written in truncation mode coordinates.
    pub fn local_matrix(&self, trunc: &FockTruncation) -> CMatrix {
        let dim = trunc.dim();
        let mut out = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            let mut e = CVector::zeros(dim);
            e[i] = C64::new(1.0, 0.0);
            out.set_column(i, &self.apply(trunc, &e));
        }
        out
    }

    /// `Z v` on the truncation; `z` must already be in truncation mode coordinates.
    fn apply(&self, trunc: &FockTruncation, v: &CVector) -> CVector {
        let m = self.modes();
        let mut out = v * C64::new(self.constant, 0.0);
        let lowered: Vec<CVector> = (0..m).map(|k| trunc.annihilate(k, v)).collect();
        for k in 0..m {
            if self.linear[k] != C64::new(0.0, 0.0) {
                out += trunc.create(k, v) * self.linear[k];
                out += &lowered[k] * self.linear[k].conj();
            }
            for l in 0..m {
                let b = self.number[(k, l)];
                if b != C64::new(0.0, 0.0) {
                    out += trunc.create(k, &lowered[l]) * b;
                }
                let a = self.pair[(k, l)];
                if a != C64::new(0.0, 0.0) {
                    out += trunc.create(k, &trunc.create(l, v)) * a;
                    out += trunc.annihilate(k, &lowered[l]) * a.conj();
                }
            }
        }
        out
    }

    /// `Z Ω` as a truncation vector (needs `n_max ≥ 2` for the pair part).
    pub fn vacuum_image(&self, trunc: &FockTruncation) -> CVector {
        let z = self.compress(trunc.mode_basis());
        z.apply(trunc, &trunc.vacuum())
    }
}

impl BogoliubovMap {
    pub fn identity(modes: usize) -> Self {
        Self {
            u: CMatrix::identity(modes, modes),
            v: CMatrix::zeros(modes, modes),
            beta: CVector::zeros(modes),
        }
    }

    /// Displacement `D(β)`: `a -> a + β`.
    pub fn displacement(beta: CVector) -> Self {
        let m = beta.len();
        Self {
            u: CMatrix::identity(m, m),
            v: CMatrix::zeros(m, m),
            beta,
        }
    }

    /// Per-mode squeezing `a_k -> cosh r_k a_k − e^{iφ_k} sinh r_k a⁺_k`.
    pub fn squeezing(r: &[f64], phi: &[f64]) -> Self {
        let m = r.len();
        let mut u = CMatrix::zeros(m, m);
        let mut v = CMatrix::zeros(m, m);
        for k in 0..m {
            u[(k, k)] = C64::new(r[k].cosh(), 0.0);
            v[(k, k)] = -C64::from_polar(r[k].sinh(), phi[k]);
        }
        Self {
            u,
            v,
            beta: CVector::zeros(m),
        }
    }

    /// Gaussian unitary acting on phase space `ξ = T a + T̄ a⁺` as `ξ -> E ξ + d`,
    /// with `a = R ξ`.
    pub fn from_phase_space(r: &CMatrix, t: &CMatrix, e: &CMatrix, d: &CVector) -> Self {
        let re = r * e;
        Self {
            u: &re * t,
            v: &re * t.map(|z| z.conj()),
            beta: r * d,
        }
    }

    /// Map of `S1 S2` from the maps of `S1` (self) and `S2` (inner).
    pub fn compose(&self, inner: &BogoliubovMap) -> BogoliubovMap {
        let v2bar = inner.v.map(|z| z.conj());
        let u2bar = inner.u.map(|z| z.conj());
        BogoliubovMap {
            u: &self.u * &inner.u + &self.v * &v2bar,
            v: &self.u * &inner.v + &self.v * &u2bar,
            beta: &self.u * &inner.beta + &self.v * inner.beta.map(|z| z.conj()) + &self.beta,
        }
    }

    /// Deviation from the bosonic conditions `U U⁺ − V V⁺ = 1`, `U Vᵀ = V Uᵀ`.
    pub fn symplectic_defect(&self) -> f64 {
        let m = self.u.nrows();
        let c1 = &self.u * self.u.adjoint() - &self.v * self.v.adjoint() - CMatrix::identity(m, m);
        let c2 = &self.u * self.v.transpose() - &self.v * self.u.transpose();
        c1.norm() + c2.norm()
    }

    /// `⟨a_k⟩`, `⟨a⁺_k a_l⟩`, `⟨a_k a_l⟩` in the state `S Ω`.
    pub fn moments(&self) -> (CVector, CMatrix, CMatrix) {
        let vbar = self.v.map(|z| z.conj());
        let bbar = self.beta.map(|z| z.conj());
        let n = &vbar * self.v.transpose() + &bbar * self.beta.transpose();
        let pairs = &self.u * self.v.transpose() + &self.beta * self.beta.transpose();
        (self.beta.clone(), n, pairs)
    }
}
