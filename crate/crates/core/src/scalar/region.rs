//! Modular objects of the vacuum for a set of lattice sites.
//!
//! The local subspace is `K = {χ_{u⊕v} : supp u, v ⊂ R}`. Its field part
//! `k^u_x` is real and its momentum part `k^v_x = i r_x` imaginary in mode
//! coordinates, so the real Gram matrix is block diagonal and the symplectic
//! part is `a·1`. After whitening, the singular values `c` of
//! `M = a Gu^{-1/2} Gv^{-1/2}` give `log δ = ±2 atanh c`. The top of this
//! spectrum grows roughly linearly with the region size, so everything is done
//! in double-double arithmetic and rounded at the end.

use crate::modular::{ModularBlock, ModularError, OneParticleModular, DELTA_CLIP};
use crate::operator::{CMatrix, CVector, HermitianOperator, RealLinearOperator, RVector, C64};
use crate::precision::{dd, div, sym_eigen, sym_function, to_f64, Dd, DdMatrix};

use super::{mode_table, LatticeModel};

/// `1 − c²` below this is not resolvable in double-double and is treated as `K ∩ iK ≠ 0`.
pub const SEPARATION_FLOOR: f64 = 1e-30;

struct RegionBlocks {
    /// Whitened field vectors `ũ` (mode coordinates, real), `n × ℓ`.
    u_white: DdMatrix,
    /// Whitened momentum vectors `r` with `ṽ = i r`, `n × ℓ`.
    r_white: DdMatrix,
    m: DdMatrix,
    /// `1 − c_j²`, ascending (so `c` descending).
    one_minus_c2: Vec<Dd>,
    p: DdMatrix,
}

fn validate(model: &LatticeModel, region: &[usize]) -> Result<(), ModularError> {
    if region.is_empty() {
        return Err(ModularError::InvalidRegion {
            reason: "region has no sites".into(),
        });
    }
    let mut sorted = region.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != region.len() {
        return Err(ModularError::InvalidRegion {
            reason: "region lists a site twice".into(),
        });
    }
    if let Some(&x) = sorted.iter().find(|&&x| x >= model.n()) {
        return Err(ModularError::InvalidRegion {
            reason: format!("site {x} outside a chain of {} sites", model.n()),
        });
    }
    if 2 * region.len() > model.n() {
        return Err(ModularError::SubspaceNotSeparating {
            dimension: 2 * (2 * region.len() - model.n()),
        });
    }
    Ok(())
}

fn region_blocks(model: &LatticeModel, region: &[usize]) -> Result<RegionBlocks, ModularError> {
    validate(model, region)?;
    let n = model.n();
    let l = region.len();
    let table = mode_table(n, model.a(), model.mu());
    let sqrt_a = dd(model.a()).sqrt();
    let omega_half: Vec<Dd> = table
        .iter()
        .map(|m| m.omega_sq_dd(n, model.a(), model.mu()).sqrt().sqrt())
        .collect();
    // k^u_x = √a ω^{1/2} φ(x), r_x = √a ω^{-1/2} φ(x).
    let ku = DdMatrix::from_fn(n, l, |k, j| sqrt_a * omega_half[k] * table[k].value_dd(region[j], n));
    let kr = DdMatrix::from_fn(n, l, |k, j| div(sqrt_a, omega_half[k]) * table[k].value_dd(region[j], n));
    let gu = ku.transpose() * &ku;
    let gv = kr.transpose() * &kr;
    let gu_mhalf = sym_function(&gu, |x| div(dd(1.0), x.sqrt()));
    let gv_mhalf = sym_function(&gv, |x| div(dd(1.0), x.sqrt()));
    let u_white = &ku * &gu_mhalf;
    let r_white = &kr * &gv_mhalf;
    let m = u_white.transpose() * &r_white;
    let mmt = &m * m.transpose();
    let deficit = DdMatrix::from_fn(l, l, |i, j| if i == j { dd(1.0) - mmt[(i, j)] } else { -mmt[(i, j)] });
    let (one_minus_c2, p) = sym_eigen(&deficit);
    let unresolved = one_minus_c2.iter().filter(|&&d| to_f64(d) < SEPARATION_FLOOR).count();
    if unresolved > 0 {
        return Err(ModularError::SubspaceNotSeparating { dimension: 2 * unresolved });
    }
    Ok(RegionBlocks {
        u_white,
        r_white,
        m,
        one_minus_c2,
        p,
    })
}

fn epsilon_of(d: Dd) -> (f64, f64) {
    let c = (dd(1.0) - d).sqrt();
    let one_minus_c = div(d, dd(1.0) + c);
    let eps = to_f64(dd(1.0) + c).ln() - to_f64(one_minus_c).ln();
    (to_f64(c), eps)
}

/// Unclipped modular energies `ε_j = 2 atanh c_j` of the region, descending.
/// Any region with at most half the sites is allowed (the construction lives in `K + iK`).
pub fn region_modular_energies(model: &LatticeModel, region: &[usize]) -> Result<Vec<f64>, ModularError> {
    let blocks = region_blocks(model, region)?;
    Ok(blocks.one_minus_c2.iter().map(|&d| epsilon_of(d).1).collect())
}

fn to_cvector(v: &DdMatrix, col: usize, scale: C64) -> CVector {
    CVector::from_fn(v.nrows(), |i, _| scale * to_f64(v[(i, col)]))
}

/// Full one-particle modular objects for a region of exactly half the sites
/// (the case where `K` is standard in the whole one-particle space).
pub fn region_modular(model: &LatticeModel, region: &[usize]) -> Result<OneParticleModular, ModularError> {
    if 2 * region.len() < model.n() {
        validate(model, region)?;
        return Err(ModularError::NotCyclic {
            rank: 2 * region.len(),
            dim: model.n(),
        });
    }
    let b = region_blocks(model, region)?;
    let n = model.n();
    let l = region.len();
    let clip_eps = DELTA_CLIP.ln();
    let i = C64::new(0.0, 1.0);

    let mut blocks = Vec::with_capacity(l);
    let mut vecs: Vec<CVector> = Vec::with_capacity(n);
    let mut logs = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    let mut unflagged_real = Vec::new();
    for j in 0..l {
        let d = b.one_minus_c2[j];
        let (c, eps) = epsilon_of(d);
        let c_dd = (dd(1.0) - d).sqrt();
        let pj = b.p.column(j).into_owned();
        let rj = (b.m.transpose() * &pj).map(|x| div(x, c_dd));
        let kx = &b.u_white * &pj;
        let ky_r = &b.r_white * &rj;
        // f₊ = i(ũP − rR) has norm √(2(1 − c)); f₋ = −i(ũP + rR) has norm √(2(1 + c)).
        let plus = &kx - &ky_r;
        let minus = &kx + &ky_r;
        let norm_plus = plus.iter().fold(dd(0.0), |acc, &x| acc + x * x).sqrt();
        let norm_minus = minus.iter().fold(dd(0.0), |acc, &x| acc + x * x).sqrt();
        let plus = DdMatrix::from_fn(n, 1, |r, _| div(plus[r], norm_plus));
        let minus = DdMatrix::from_fn(n, 1, |r, _| div(minus[r], norm_minus));
        let flagged = !eps.is_finite() || eps >= clip_eps;
        let clipped = if flagged { clip_eps } else { eps };
        vecs.push(to_cvector(&plus, 0, i));
        vecs.push(to_cvector(&minus, 0, -i));
        logs.push(clipped);
        logs.push(-clipped);
        flags.push(flagged);
        flags.push(flagged);
        if !flagged {
            let kx = DdMatrix::from_fn(n, 1, |r, _| kx[r]);
            let ky = DdMatrix::from_fn(n, 1, |r, _| ky_r[r]);
            unflagged_real.push(to_cvector(&kx, 0, C64::new(1.0, 0.0)));
            unflagged_real.push(to_cvector(&ky, 0, -i));
        }
        blocks.push(ModularBlock {
            c,
            epsilon: clipped,
            unclipped: eps,
            flagged,
            one_dimensional: false,
        });
    }
    let u = CMatrix::from_fn(n, n, |r, c| vecs[c][r]);
    let mut pi = CMatrix::zeros(n, n);
    for a in 0..n {
        pi[(a ^ 1, a)] = C64::new(1.0, 0.0);
    }
    let jm = &u * pi * u.transpose();
    let log_delta1 = HermitianOperator::from_spectrum(RVector::from_vec(logs.clone()), u.clone());
    let delta1 = HermitianOperator::from_spectrum(RVector::from_iterator(n, logs.iter().map(|x| x.exp())), u.clone());
    Ok(OneParticleModular {
        subspace_basis: model.local_subspace_basis(region),
        j: RealLinearOperator::from_antilinear(&jm),
        delta1,
        log_delta1,
        blocks,
        eigenvectors: u,
        eigen_logs: logs,
        eigen_flagged: flags,
        unflagged_real_vectors: unflagged_real,
    })
}
