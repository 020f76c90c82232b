//! Reference computations that share no code with `qeilab-core`.
//!
//! Every function here takes a deliberately different route to a quantity the
//! library also computes, so agreement between the two is evidence rather than
//! tautology.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

/// Periodic chain `Q = -Δ_a + μ` assembled from the stencil.
pub fn chain_q(n: usize, a: f64, mu: f64) -> RMat {
    let mut q = RMat::zeros(n, n);
    for x in 0..n {
        q[(x, x)] = mu;
    }
    if n > 1 {
        for x in 0..n {
            let l = (x + n - 1) % n;
            let r = (x + 1) % n;
            q[(x, x)] += 2.0 / (a * a);
            q[(x, l)] -= 1.0 / (a * a);
            q[(x, r)] -= 1.0 / (a * a);
        }
    }
    q
}

fn sym_power(m: &RMat, p: f64) -> RMat {
    let e = SymmetricEigen::new(m.clone());
    let d = RMat::from_diagonal(&e.eigenvalues.map(|x| x.powf(p)));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// Modular energies `ε = ln((ν + ½)/(ν − ½))` of the vacuum restricted to `region`,
/// from the symplectic eigenvalues `ν` of the reduced covariance
/// `⟨φφ⟩ = Q^{-1/2}/(2a)`, `⟨ππ⟩ = Q^{1/2}/(2a)` (lattice units absorbed into `a`).
/// Sorted descending.
pub fn covariance_modular_energies(n: usize, a: f64, mu: f64, region: &[usize]) -> Vec<f64> {
    let q = chain_q(n, a, mu);
    let x = sym_power(&q, -0.5) * 0.5;
    let p = sym_power(&q, 0.5) * 0.5;
    let r = region.len();
    let xr = RMat::from_fn(r, r, |i, j| x[(region[i], region[j])]);
    let pr = RMat::from_fn(r, r, |i, j| p[(region[i], region[j])]);
    let xh = sym_power(&xr, 0.5);
    let m = &xh * pr * &xh;
    let nu2 = SymmetricEigen::new((&m + m.transpose()) * 0.5).eigenvalues;
    let mut eps: Vec<f64> = nu2
        .iter()
        .map(|&v| {
            let nu = v.sqrt();
            ((nu + 0.5) / (nu - 0.5)).ln()
        })
        .collect();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps
}

/// Double-double version of [`covariance_modular_energies`], for regions whose
/// top modular energies exceed what f64 can separate from `ν = ½`.
pub fn covariance_modular_energies_dd(n: usize, a: f64, mu: f64, region: &[usize]) -> Vec<f64> {
    use twofloat::TwoFloat as T;
    let q = chain_q(n, a, mu).map(T::from);
    let (lam, v) = jacobi_dd(&q);
    let power = |p: f64| {
        let d: Vec<T> = lam.iter().map(|&l| if p > 0.0 { l.sqrt() } else { recip_dd(l.sqrt()) }).collect();
        DMatrix::from_fn(n, n, |i, j| (0..n).fold(T::from(0.0), |acc, k| acc + v[(i, k)] * d[k] * v[(j, k)]))
    };
    let x = power(-0.5);
    let p = power(0.5);
    let r = region.len();
    let xr = DMatrix::from_fn(r, r, |i, j| x[(region[i], region[j])] * 0.5);
    let pr = DMatrix::from_fn(r, r, |i, j| p[(region[i], region[j])] * 0.5);
    let (xl, xv) = jacobi_dd(&xr);
    let xh = DMatrix::from_fn(r, r, |i, j| {
        (0..r).fold(T::from(0.0), |acc, k| acc + xv[(i, k)] * xl[k].sqrt() * xv[(j, k)])
    });
    let m = &xh * pr * &xh;
    let (nu2, _) = jacobi_dd(&m);
    let mut eps: Vec<f64> = nu2
        .iter()
        .map(|&v| {
            let nu = v.sqrt();
            // ν − ½ = (ν² − ¼)/(ν + ½) keeps the small difference exact.
            let below = (v - 0.25) * recip_dd(nu + 0.5);
            let above = nu + 0.5;
            (above.hi() + above.lo()).ln() - (below.hi() + below.lo()).ln()
        })
        .collect();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps
}

/// `1/x` by Newton steps from the f64 reciprocal.
fn recip_dd(x: twofloat::TwoFloat) -> twofloat::TwoFloat {
    let mut y = twofloat::TwoFloat::from(1.0 / x.hi());
    for _ in 0..2 {
        y = y + y * (1.0 - x * y);
    }
    y
}

/// Eigenpairs of a symmetric double-double matrix by classical Jacobi
/// (largest off-diagonal pivot first).
fn jacobi_dd(m: &DMatrix<twofloat::TwoFloat>) -> (Vec<twofloat::TwoFloat>, DMatrix<twofloat::TwoFloat>) {
    use twofloat::TwoFloat as T;
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::from_fn(n, n, |i, j| T::from(if i == j { 1.0 } else { 0.0 }));
    let scale = a.iter().fold(0.0_f64, |acc, x| acc.max(x.hi().abs()));
    for _ in 0..(200 * n * n).max(1) {
        let (mut p, mut q, mut big) = (0, 0, 0.0_f64);
        for i in 0..n {
            for j in (i + 1)..n {
                if a[(i, j)].hi().abs() > big {
                    big = a[(i, j)].hi().abs();
                    p = i;
                    q = j;
                }
            }
        }
        if big <= scale * 1e-34 {
            break;
        }
        let theta = (a[(q, q)] - a[(p, p)]) * recip_dd(a[(p, q)] * 2.0);
        let t = if theta.hi().abs() > 1e100 {
            recip_dd(theta * 2.0)
        } else {
            let root = (theta * theta + 1.0).sqrt();
            let t = recip_dd(theta.abs() + root);
            if theta.hi() < 0.0 {
                -t
            } else {
                t
            }
        };
        let c = recip_dd((t * t + 1.0).sqrt());
        let s = t * c;
        for k in 0..n {
            let (akp, akq) = (a[(k, p)], a[(k, q)]);
            a[(k, p)] = c * akp - s * akq;
            a[(k, q)] = s * akp + c * akq;
        }
        for k in 0..n {
            let (apk, aqk) = (a[(p, k)], a[(q, k)]);
            a[(p, k)] = c * apk - s * aqk;
            a[(q, k)] = s * apk + c * aqk;
        }
        for k in 0..n {
            let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
            v[(k, p)] = c * vkp - s * vkq;
            v[(k, q)] = s * vkp + c * vkq;
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Coefficient matrix `ψ` with `Ω = Σ ψ_{ab} e_a ⊗ e_b`.
pub fn coefficient_matrix(omega: &[Complex64], k: usize) -> CMat {
    CMat::from_fn(k, k, |a, b| omega[a * k + b])
}

/// `Δ = ρ_A ⊗ ρ_B^{-1}` for `M_k ⊗ 1` with `ρ_A = ψψ⁺`, `ρ_B = (ψ⁺ψ)ᵀ`.
pub fn delta_from_reduced(omega: &[Complex64], k: usize) -> CMat {
    let psi = coefficient_matrix(omega, k);
    let rho_a = &psi * psi.adjoint();
    let rho_b = (psi.adjoint() * &psi).transpose();
    let inv_b = rho_b.try_inverse().expect("full Schmidt rank");
    rho_a.kronecker(&inv_b)
}

/// Eigenvalues (ascending) of a Hermitian matrix via its real `2n × 2n` embedding,
/// each returned once.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    let big = RMat::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(big).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect()
}

/// `exp(m)` by a plain Taylor series with `terms` terms.
pub fn expm_series(m: &CMat, terms: usize) -> CMat {
    let n = m.nrows();
    let mut out = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for j in 1..terms {
        term = &term * m / Complex64::new(j as f64, 0.0);
        out += &term;
    }
    out
}

/// Spherical Bessel `j₃`.
pub fn spherical_j3(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        return x.powi(3) / 105.0 * (1.0 - x2 / 18.0 + x2 * x2 / 792.0 - x2 * x2 * x2 / 61776.0);
    }
    let (s, c) = x.sin_cos();
    (15.0 / x.powi(3) - 6.0 / x) * s / x - (15.0 / (x * x) - 1.0) * c / x
}

/// Fourier transform at `κ = kθ` of the unit-integral bump `∝ (θ² − t²)³`.
pub fn bump_transform(kappa: f64) -> f64 {
    if kappa.abs() < 2.0 {
        // 105·j₃(κ)/κ³ = Σ (−κ²/2)ᵏ / (k! · 9·11···(7+2k)); the closed form cancels badly here.
        let h = -0.5 * kappa * kappa;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            term *= h / (k as f64 * (7.0 + 2.0 * k as f64));
            sum += term;
        }
        return sum;
    }
    96.0 * 35.0 / 32.0 * spherical_j3(kappa) / kappa.powi(3)
}

/// Poisson probabilities `e^{-λ} λⁿ/n!` for `n = 0..=n_max`.
pub fn poisson(lambda: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut p = (-lambda).exp();
    for n in 0..=n_max {
        if n > 0 {
            p *= lambda / n as f64;
        }
        out.push(p);
    }
    out
}

/// Spectrum of `Δ = S⁺S` for the Tomita map `S(k₁ + i k₂) = k₁ − i k₂` of the real
/// span of `basis`, computed as a real `2n × 2n` matrix. Each eigenvalue of the
/// complex-linear `Δ` appears twice; returns them once, ascending.
pub fn realified_delta_spectrum(basis: &[DVector<Complex64>]) -> Vec<f64> {
    let n = basis[0].len();
    let m = basis.len();
    assert_eq!(2 * n, 2 * m, "basis must have n real vectors for a standard subspace of C^n");
    let col = |v: &DVector<Complex64>| -> Vec<f64> {
        v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
    };
    let times_i = |v: &DVector<Complex64>| v.map(|z| z * Complex64::new(0.0, 1.0));
    let mut input = RMat::zeros(2 * n, 2 * n);
    let mut output = RMat::zeros(2 * n, 2 * n);
    for (j, k) in basis.iter().enumerate() {
        input.set_column(j, &DVector::from_vec(col(k)));
        output.set_column(j, &DVector::from_vec(col(k)));
        input.set_column(m + j, &DVector::from_vec(col(&times_i(k))));
        output.set_column(m + j, &(DVector::from_vec(col(&times_i(k))) * -1.0));
    }
    let s = &output * input.try_inverse().expect("K + iK spans");
    let d = s.transpose() * &s;
    let mut ev: Vec<f64> = SymmetricEigen::new((&d + d.transpose()) * 0.5)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_transform_series_matches_closed_form() {
        for k in [1.1e-3, 2e-3, 5e-3] {
            let series = {
                let k2 = k * k;
                1.0 - k2 / 18.0 + k2 * k2 / 792.0
            };
            assert!((series - bump_transform(k)).abs() < 1e-10);
        }
    }

    #[test]
    fn single_site_covariance_is_pure() {
        // One site on a one-site chain: the whole system, so ν = ½ and ε diverges.
        let e = covariance_modular_energies(1, 1.0, 1.0, &[0]);
        assert!(e[0] > 15.0 || !e[0].is_finite());
    }
}
