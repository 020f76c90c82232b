//! Bosonic Fock space truncated at a total particle number.

use std::collections::HashMap;

use thiserror::Error;

use crate::operator::{CMatrix, CVector, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TruncationError {
    #[error("truncation with n_max = {n_max} cannot hold a {needed}-particle vector")]
    TooSmall { n_max: usize, needed: usize },
    #[error("truncated norm {achieved:.17} is below 1 - {tolerance:e}")]
    Inadequate { achieved: f64, tolerance: f64 },
    #[error("first inadequate amplitude index {index}: truncated norm {achieved:.17}")]
    InadequateAt { index: usize, achieved: f64 },
    #[error("retained modes must span the full one-particle space, got {retained} of {total}")]
    IncompleteModes { retained: usize, total: usize },
    #[error("mode basis has {rows} rows but the one-particle space has dimension {expected}")]
    ModeMismatch { rows: usize, expected: usize },
}

/// Occupation-number basis over `n_modes` orthonormal modes with total number `<= n_max`.
///
/// The modes are columns of `mode_basis`, expressed in the coordinates of the
/// underlying one-particle space (identity when all modes are retained).
#[derive(Debug, Clone)]
pub struct FockTruncation {
    n_max: usize,
    mode_basis: CMatrix,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

fn multisets(n_modes: usize, n: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if current.len() == n {
        out.push(current.clone());
        return;
    }
    for k in start..n_modes {
        current.push(k);
        multisets(n_modes, n, k, current, out);
        current.pop();
    }
}

impl FockTruncation {
    /// All `n_modes` coordinate modes retained.
    pub fn new(n_modes: usize, n_max: usize) -> Self {
        Self::with_modes(CMatrix::identity(n_modes, n_modes), n_max)
    }

    /// Retains the given orthonormal columns as modes.
    pub fn with_modes(mode_basis: CMatrix, n_max: usize) -> Self {
        let n_modes = mode_basis.ncols();
        let mut states = Vec::new();
        for n in 0..=n_max {
            let mut sets = Vec::new();
            multisets(n_modes, n, 0, &mut Vec::new(), &mut sets);
            for set in sets {
                let mut occ = vec![0u8; n_modes];
                for k in set {
                    occ[k] += 1;
                }
                states.push(occ);
            }
        }
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self {
            n_max,
            mode_basis,
            states,
            index,
        }
    }

    /// Number of states `sum_{n<=n_max} C(M + n - 1, n)`.
    pub fn expected_dim(n_modes: usize, n_max: usize) -> usize {
        (0..=n_max).map(|n| binomial(n_modes + n - 1, n)).sum::<usize>().max(1)
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn n_modes(&self) -> usize {
        self.mode_basis.ncols()
    }

    pub fn mode_basis(&self) -> &CMatrix {
        &self.mode_basis
    }

    pub fn retains_all_modes(&self) -> bool {
        self.mode_basis.ncols() == self.mode_basis.nrows()
    }

    pub fn occupation(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn particle_number(&self, i: usize) -> usize {
        self.states[i].iter().map(|&n| n as usize).sum()
    }

    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn vacuum(&self) -> CVector {
        let mut v = CVector::zeros(self.dim());
        v[0] = C64::new(1.0, 0.0);
        v
    }

    /// `a_k |i> = sqrt(n_k) |i - e_k>`.
    fn lower(&self, i: usize, k: usize) -> Option<(usize, f64)> {
        let occ = &self.states[i];
        if occ[k] == 0 {
            return None;
        }
        let mut next = occ.clone();
        next[k] -= 1;
        Some((self.index[&next], (occ[k] as f64).sqrt()))
    }

    /// `a_k^+ |i> = sqrt(n_k + 1) |i + e_k>`, dropped above the cutoff.
    fn raise(&self, i: usize, k: usize) -> Option<(usize, f64)> {
        let occ = &self.states[i];
        let mut next = occ.clone();
        next[k] += 1;
        self.index.get(&next).map(|&j| (j, ((occ[k] as f64) + 1.0).sqrt()))
    }

    pub fn annihilate(&self, k: usize, v: &CVector) -> CVector {
        let mut out = CVector::zeros(self.dim());
        for i in 0..self.dim() {
            if let Some((j, c)) = self.lower(i, k) {
                out[j] += v[i] * c;
            }
        }
        out
    }

    pub fn create(&self, k: usize, v: &CVector) -> CVector {
        let mut out = CVector::zeros(self.dim());
        for i in 0..self.dim() {
            if let Some((j, c)) = self.raise(i, k) {
                out[j] += v[i] * c;
            }
        }
        out
    }

    /// `a^+(f) v` for `f` given in retained-mode coordinates.
    pub fn create_vector(&self, f: &CVector, v: &CVector) -> CVector {
        let mut out = CVector::zeros(self.dim());
        for i in 0..self.dim() {
            if v[i] == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..self.n_modes() {
                if f[k] == C64::new(0.0, 0.0) {
                    continue;
                }
                if let Some((j, c)) = self.raise(i, k) {
                    out[j] += f[k] * v[i] * c;
                }
            }
        }
        out
    }

    /// Matrix of `dΓ(h) = sum h_{kl} a_k^+ a_l` (exact: it preserves particle number).
    pub fn dgamma(&self, h: &CMatrix) -> CMatrix {
        let m = self.n_modes();
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.dim() {
            for l in 0..m {
                let Some((mid, cl)) = self.lower(i, l) else { continue };
                for k in 0..m {
                    if h[(k, l)] == C64::new(0.0, 0.0) {
                        continue;
                    }
                    if let Some((j, ck)) = self.raise(mid, k) {
                        out[(j, i)] += h[(k, l)] * (cl * ck);
                    }
                }
            }
        }
        out
    }

    /// Matrix of `Γ(T)` for a one-particle operator `T` in retained-mode coordinates.
    pub fn second_quantize(&self, t: &CMatrix) -> CMatrix {
        let m = self.n_modes();
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        let images: Vec<CVector> = (0..m).map(|k| t.column(k).into_owned()).collect();
        for i in 0..self.dim() {
            let mut v = self.vacuum();
            let mut norm = 1.0;
            for (k, &n) in self.states[i].iter().enumerate() {
                for q in 0..n {
                    v = self.create_vector(&images[k], &v);
                    norm *= (q as f64 + 1.0).sqrt();
                }
            }
            out.set_column(i, &(v / C64::new(norm, 0.0)));
        }
        out
    }

    /// Matrix of the number operator restricted to each basis state.
    pub fn number_diagonal(&self) -> Vec<usize> {
        (0..self.dim()).map(|i| self.particle_number(i)).collect()
    }

    /// Diagonal of `dΓ(diag(energies))`.
    pub fn energy_diagonal(&self, energies: &[f64]) -> Vec<f64> {
        self.states
            .iter()
            .map(|occ| occ.iter().zip(energies).map(|(&n, &e)| n as f64 * e).sum())
            .collect()
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_match_formula() {
        for (m, n) in [(1, 3), (4, 2), (16, 2), (32, 2), (3, 4)] {
            let t = FockTruncation::new(m, n);
            assert_eq!(t.dim(), FockTruncation::expected_dim(m, n));
        }
        assert_eq!(FockTruncation::new(16, 2).dim(), 153);
        assert_eq!(FockTruncation::new(32, 2).dim(), 561);
    }

    #[test]
    fn canonical_commutator_below_cutoff() {
        let t = FockTruncation::new(2, 3);
        let mut v = CVector::zeros(t.dim());
        v[t.index_of(&[1, 1]).unwrap()] = C64::new(1.0, 0.0);
        let aad = t.annihilate(0, &t.create(0, &v));
        let ada = t.create(0, &t.annihilate(0, &v));
        assert!((aad - ada - &v).norm() < 1e-14);
    }

    #[test]
    fn second_quantized_identity_is_identity() {
        let t = FockTruncation::new(3, 2);
        let g = t.second_quantize(&CMatrix::identity(3, 3));
        assert!((g - CMatrix::identity(t.dim(), t.dim())).norm() < 1e-14);
    }
}
