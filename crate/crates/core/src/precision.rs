//! Double-double arithmetic for the few computations whose answers sit below
//! f64 resolution, such as modular energies of lattice regions.

use nalgebra::DMatrix;
use twofloat::TwoFloat;

pub type Dd = TwoFloat;
pub type DdMatrix = DMatrix<Dd>;

pub fn dd(x: f64) -> Dd {
    Dd::from(x)
}

pub fn to_f64(x: Dd) -> f64 {
    x.hi() + x.lo()
}

/// `a / b` to double-double accuracy.
///
/// `twofloat`'s own quotient of two double-doubles is only good to f64, so the
/// residual `a − b q` is divided once more by the leading part of `b`.
pub fn div(a: Dd, b: Dd) -> Dd {
    let mut q = a / b;
    if !q.hi().is_finite() || !b.hi().is_finite() || q.hi() == 0.0 {
        return q;
    }
    for _ in 0..2 {
        let r = a - b * q;
        q += r / b.hi();
    }
    q
}

/// `(sin 2πp/q, cos 2πp/q)` to double-double accuracy.
///
/// The angle is reduced exactly in integers to `[0, π/4]` before a Taylor series.
pub fn sin_cos_turns(p: u64, q: u64) -> (Dd, Dd) {
    assert!(q > 0, "denominator must be positive");
    // Work in units of 1/(8q) of a turn: r ∈ [0, 8q).
    let r = (p % q) * 8;
    let octant = r / q;
    let rem = r % q;
    // Angle within the octant, in turns/8: rem/q.
    let (reduced_num, flip) = if octant % 2 == 0 { (rem, false) } else { (q - rem, true) };
    let theta = div(twofloat::consts::PI / 4.0 * dd(reduced_num as f64), dd(q as f64));
    let (s, c) = taylor_sin_cos(theta);
    // Angle = octant·π/4 + rem/q·π/4; for odd octants it is (octant+1)·π/4 − θ.
    let (s, c) = if flip { (c, s) } else { (s, c) };
    match octant {
        0 => (s, c),
        1 => (s, c),
        2 => (c, -s),
        3 => (c, -s),
        4 => (-s, -c),
        5 => (-s, -c),
        6 => (-c, s),
        _ => (-c, s),
    }
}

fn taylor_sin_cos(x: Dd) -> (Dd, Dd) {
    let x2 = x * x;
    let mut s = x;
    let mut c = dd(1.0);
    let mut term_s = x;
    let mut term_c = dd(1.0);
    for k in 1..40 {
        let k = k as f64;
        term_s = -term_s * x2 / ((2.0 * k) * (2.0 * k + 1.0));
        term_c = -term_c * x2 / ((2.0 * k - 1.0) * (2.0 * k));
        s += term_s;
        c += term_c;
        if term_s.abs() < dd(1e-40) && term_c.abs() < dd(1e-40) {
            break;
        }
    }
    (s, c)
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations, ascending eigenvalues.
pub fn sym_eigen(m: &DdMatrix) -> (Vec<Dd>, DdMatrix) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DdMatrix::from_fn(n, n, |i, j| if i == j { dd(1.0) } else { dd(0.0) });
    let scale: Dd = a.iter().fold(dd(0.0), |acc, &x| acc + x * x);
    let tol = scale * dd(1e-62);
    for _ in 0..100 {
        let mut off = dd(0.0);
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == dd(0.0) {
                    continue;
                }
                let theta = div(a[(q, q)] - a[(p, p)], dd(2.0) * apq);
                let t = if theta.abs() > dd(1e100) {
                    div(dd(0.5), theta)
                } else {
                    let r = (theta * theta + dd(1.0)).sqrt();
                    if theta >= dd(0.0) {
                        div(dd(1.0), theta + r)
                    } else {
                        div(dd(-1.0), -theta + r)
                    }
                };
                let c = div(dd(1.0), (t * t + dd(1.0)).sqrt());
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| to_f64(a[(i, i)]).total_cmp(&to_f64(a[(j, j)])).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DdMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// `V f(Λ) Vᵀ` for a symmetric matrix.
pub fn sym_function<F: Fn(Dd) -> Dd>(m: &DdMatrix, f: F) -> DdMatrix {
    let (values, v) = sym_eigen(m);
    let n = m.nrows();
    let mut scaled = v.clone();
    for (j, &lam) in values.iter().enumerate() {
        let fl = f(lam);
        for i in 0..n {
            scaled[(i, j)] *= fl;
        }
    }
    scaled * v.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_cos_quadrants() {
        for q in [3u64, 7, 8, 12, 64] {
            for p in 0..(2 * q) {
                let (s, c) = sin_cos_turns(p, q);
                let ang = 2.0 * std::f64::consts::PI * p as f64 / q as f64;
                assert!((to_f64(s) - ang.sin()).abs() < 1e-14, "sin {p}/{q}");
                assert!((to_f64(c) - ang.cos()).abs() < 1e-14, "cos {p}/{q}");
                assert!((s * s + c * c - dd(1.0)).abs() < dd(1e-30));
            }
        }
    }

    #[test]
    fn jacobi_reconstructs() {
        let m = DdMatrix::from_fn(5, 5, |i, j| dd(1.0 / (1.0 + i as f64 + j as f64)));
        let (vals, v) = sym_eigen(&m);
        let d = DdMatrix::from_fn(5, 5, |i, j| if i == j { vals[i] } else { dd(0.0) });
        let back = &v * d * v.transpose() - &m;
        let err = back.iter().fold(0.0_f64, |acc, x| acc.max(to_f64(x.abs())));
        assert!(err < 1e-29, "{err}");
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }
}
