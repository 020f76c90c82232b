//! TOML run configurations shared by the subcommands.

use serde::de::DeserializeOwned;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("field `{field}`: {reason}")]
    Field { field: String, reason: String },
}

pub fn field_error(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        reason: reason.into(),
    }
}

pub fn parse<T: DeserializeOwned>(path: &str, text: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_string(),
        message: e.to_string().trim_end().to_string(),
    })
}

/// `QEILAB_SEED`, when set, replaces the configured seed.
pub fn seed_override() -> Result<Option<u64>, ConfigError> {
    match std::env::var("QEILAB_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| field_error("QEILAB_SEED", format!("expected an unsigned integer, got {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(field_error("QEILAB_SEED", e.to_string())),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub n: usize,
    pub a: f64,
    pub mu: f64,
    #[serde(default)]
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmearingSection {
    #[serde(default)]
    pub plateau: Option<Vec<usize>>,
    #[serde(default)]
    pub ramp: usize,
    #[serde(default)]
    pub t0: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsSection {
    pub o: Vec<usize>,
    pub o_cross: Vec<usize>,
    pub o_flat: Vec<usize>,
    pub o_sharp: Vec<usize>,
    #[serde(default)]
    pub time_extent: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub lambda_grid: Vec<f64>,
    pub epsilon: f64,
}

pub fn positive(field: &str, value: f64) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(field_error(field, format!("must be positive and finite, got {value}")))
    }
}

pub fn nonempty<T>(field: &str, values: &[T]) -> Result<(), ConfigError> {
    if values.is_empty() {
        Err(field_error(field, "must not be empty"))
    } else {
        Ok(())
    }
}

impl SweepSection {
    pub fn validate(&self) -> Result<(), ConfigError> {
        nonempty("sweep.lambda_grid", &self.lambda_grid)?;
        for &l in &self.lambda_grid {
            positive("sweep.lambda_grid", l)?;
        }
        positive("sweep.epsilon", self.epsilon)
    }
}

impl LatticeSection {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 2 {
            return Err(field_error("model.n", format!("need at least 2 sites, got {}", self.n)));
        }
        positive("model.a", self.a)?;
        positive("model.mu", self.mu)
    }
}

impl SmearingSection {
    pub fn validate(&self, n: usize) -> Result<(), ConfigError> {
        positive("smearing.theta", self.theta)?;
        if !self.t0.is_finite() {
            return Err(field_error("smearing.t0", "must be finite"));
        }
        if let Some(p) = &self.plateau {
            nonempty("smearing.plateau", p)?;
            if let Some(x) = p.iter().find(|&&x| x >= n) {
                return Err(field_error("smearing.plateau", format!("site {x} outside 0..{n}")));
            }
        }
        Ok(())
    }
}
