//! Gauss-Hermite order doubling and adaptive Gauss-Legendre integration.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::{GaussHermite, GaussLegendre};
use thiserror::Error;

use crate::operator::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge: successive values differ by {tail_bound:e} at order {order}")]
    NotConverged { tail_bound: f64, order: usize },
}

type Rule = Arc<Vec<(f64, f64)>>;

fn hermite_rule(order: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("rule cache").get(&order) {
        return rule.clone();
    }
    let rule = GaussHermite::new(NonZeroUsize::new(order).expect("positive order"));
    let pairs: Rule = Arc::new(rule.iter().map(|(x, w)| (*x, *w)).collect());
    cache.lock().expect("rule cache").insert(order, pairs.clone());
    pairs
}

fn legendre_rule(order: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("rule cache").get(&order) {
        return rule.clone();
    }
    let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("positive order"));
    let pairs: Rule = Arc::new(rule.iter().map(|(x, w)| (*x, *w)).collect());
    cache.lock().expect("rule cache").insert(order, pairs.clone());
    pairs
}

/// Result of a converged integration with its order and last change.
#[derive(Debug, Clone, Copy)]
pub struct HermiteResult {
    pub value: C64,
    pub order: usize,
    pub tail_bound: f64,
}

/// `∫ e^{-x²} f(x) dx`, doubling the order from `start` until successive
/// values differ by less than `tol` or `max_order` is exceeded.
pub fn hermite_doubling<F: Fn(f64) -> C64>(
    f: F,
    start: usize,
    max_order: usize,
    tol: f64,
) -> Result<HermiteResult, QuadratureError> {
    let eval = |order: usize| -> C64 {
        hermite_rule(order)
            .iter()
            .map(|&(x, w)| f(x) * w)
            .sum()
    };
    let mut order = start.max(2);
    let mut previous = eval(order);
    let mut diff = f64::INFINITY;
    while order * 2 <= max_order {
        order *= 2;
        let current = eval(order);
        diff = (current - previous).norm();
        if diff < tol {
            return Ok(HermiteResult {
                value: current,
                order,
                tail_bound: diff,
            });
        }
        previous = current;
    }
    Err(QuadratureError::NotConverged {
        tail_bound: diff,
        order,
    })
}

/// Value and accumulated error estimate of an adaptive integral.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error: f64,
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, order: usize) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    legendre_rule(order)
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Adaptive bisection comparing 10- and 20-point Gauss-Legendre panels.
pub fn adaptive_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> AdaptiveResult {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> AdaptiveResult {
        let coarse = panel(f, a, b, 10);
        let fine = panel(f, a, b, 20);
        let err = (fine - coarse).abs();
        if err <= tol || depth >= 40 {
            return AdaptiveResult { value: fine, error: err };
        }
        let m = 0.5 * (a + b);
        let l = recurse(f, a, m, 0.5 * tol, depth + 1);
        let r = recurse(f, m, b, 0.5 * tol, depth + 1);
        AdaptiveResult {
            value: l.value + r.value,
            error: l.error + r.error,
        }
    }
    recurse(&f, a, b, tol, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_gaussian_moment() {
        let r = hermite_doubling(|x| C64::new(x * x, 0.0), 4, 64, 1e-13).unwrap();
        assert!((r.value.re - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn hermite_reports_tail_on_failure() {
        let err = hermite_doubling(|x| C64::from_polar(1.0, 400.0 * x), 4, 16, 1e-10).unwrap_err();
        let QuadratureError::NotConverged { tail_bound, order } = err;
        assert!(tail_bound > 1e-10);
        assert_eq!(order, 16);
    }

    #[test]
    fn adaptive_oscillatory() {
        let r = adaptive_legendre(|x| (30.0 * x).cos(), 0.0, 1.0, 1e-12);
        assert!((r.value - (30.0_f64).sin() / 30.0).abs() < 1e-12);
    }
}
