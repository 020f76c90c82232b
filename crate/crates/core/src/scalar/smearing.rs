//! Product test functions `G(t, x) = g0(t) g(x)`.

use std::collections::HashMap;
use std::sync::Mutex;

use thiserror::Error;

use crate::operator::C64;
use crate::quadrature::adaptive_legendre;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmearingError {
    #[error("invalid smearing parameter {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// Tolerance for the adaptive Fourier integrals of `g0`.
pub const G0_HAT_TOL: f64 = 1e-12;

/// `g0(t) = c (θ² − (t − t0)²)³` on `[t0 − θ, t0 + θ]`, normalized to unit integral,
/// times nonnegative site weights equal to 1 on a plateau.
#[derive(Debug)]
pub struct SmearingFunction {
    t0: f64,
    theta: f64,
    weights: Vec<f64>,
    plateau: Vec<usize>,
    cache: Mutex<HashMap<u64, f64>>,
}

impl Clone for SmearingFunction {
    fn clone(&self) -> Self {
        Self {
            t0: self.t0,
            theta: self.theta,
            weights: self.weights.clone(),
            plateau: self.plateau.clone(),
            cache: Mutex::new(self.cache.lock().expect("cache").clone()),
        }
    }
}

impl SmearingFunction {
    pub fn new(t0: f64, theta: f64, weights: Vec<f64>, plateau: Vec<usize>) -> Result<Self, SmearingError> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(SmearingError::Invalid {
                field: "theta",
                reason: format!("must be positive, got {theta}"),
            });
        }
        if !t0.is_finite() {
            return Err(SmearingError::Invalid {
                field: "t0",
                reason: "must be finite".into(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(SmearingError::Invalid {
                field: "weights",
                reason: format!("weight {w} outside [0, 1]"),
            });
        }
        if let Some(&x) = plateau.iter().find(|&&x| x >= weights.len() || weights[x] != 1.0) {
            return Err(SmearingError::Invalid {
                field: "plateau",
                reason: format!("site {x} does not carry weight 1"),
            });
        }
        Ok(Self {
            t0,
            theta,
            weights,
            plateau,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Weight 1 on `plateau`, a `cos²` taper over `ramp` sites on each side, 0 elsewhere.
    pub fn plateau(n: usize, plateau: &[usize], ramp: usize, t0: f64, theta: f64) -> Result<Self, SmearingError> {
        let mut weights = vec![0.0; n];
        for &x in plateau {
            if x >= n {
                return Err(SmearingError::Invalid {
                    field: "plateau",
                    reason: format!("site {x} outside a chain of {n} sites"),
                });
            }
            weights[x] = 1.0;
        }
        if let (Some(&lo), Some(&hi)) = (plateau.iter().min(), plateau.iter().max()) {
            for d in 1..=ramp {
                let w = (std::f64::consts::FRAC_PI_2 * d as f64 / (ramp + 1) as f64).cos().powi(2);
                if lo >= d && weights[lo - d] < w {
                    weights[lo - d] = w;
                }
                if hi + d < n && weights[hi + d] < w {
                    weights[hi + d] = w;
                }
            }
        }
        Self::new(t0, theta, weights, plateau.to_vec())
    }

    /// Same spatial profile with every weight 0.
    pub fn zero(n: usize, t0: f64, theta: f64) -> Self {
        Self::new(t0, theta, vec![0.0; n], Vec::new()).expect("zero weights are valid")
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn plateau_sites(&self) -> &[usize] {
        &self.plateau
    }

    /// Sites with nonzero weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&x| self.weights[x] != 0.0).collect()
    }

    /// Copy shifted in time by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        Self::new(self.t0 + dt, self.theta, self.weights.clone(), self.plateau.clone())
            .expect("shift keeps parameters valid")
    }

    pub fn g0(&self, t: f64) -> f64 {
        let s = t - self.t0;
        if s.abs() >= self.theta {
            return 0.0;
        }
        let c = 35.0 / (32.0 * self.theta.powi(7));
        c * (self.theta * self.theta - s * s).powi(3)
    }

    /// `∫ e^{ikt} g0(t) dt` by adaptive quadrature of the even profile.
    pub fn g0_hat(&self, k: f64) -> C64 {
        C64::from_polar(1.0, k * self.t0) * self.centered_transform(k)
    }

    fn centered_transform(&self, k: f64) -> f64 {
        let key = (k * self.theta).abs().to_bits();
        if let Some(&v) = self.cache.lock().expect("cache").get(&key) {
            return v;
        }
        let kappa = (k * self.theta).abs();
        let r = adaptive_legendre(
            |x| (1.0 - x * x).powi(3) * (kappa * x).cos(),
            0.0,
            1.0,
            G0_HAT_TOL,
        );
        let value = 2.0 * 35.0 / 32.0 * r.value;
        self.cache.lock().expect("cache").insert(key, value);
        value
    }

    /// `∫ g0` by quadrature.
    pub fn g0_integral(&self) -> f64 {
        adaptive_legendre(|t| self.g0(t), self.t0 - self.theta, self.t0 + self.theta, 1e-14).value
    }
}
