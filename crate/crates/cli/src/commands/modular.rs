use qeilab_core::modular::{random_algebra_element, tomita_objects, CyclicSeparatingPair};
use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{field_error, positive, ConfigError};
use crate::report::{Outcome, Report};
use crate::{stream_rng, RunConfig, RunError};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModularConfig {
    pub seed: u64,
    #[serde(default)]
    pub jobs: Option<usize>,
    pub modular: ModularSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModularSection {
    pub factor_sizes: Vec<usize>,
    pub pairs: usize,
    pub elements: usize,
    pub tolerance: f64,
}

struct PairRun {
    k: usize,
    min_schmidt: f64,
    k_min: f64,
    k_max: f64,
    intertwining: f64,
    kms: f64,
    residuals: Vec<(f64, f64)>,
}

fn run_pair(seed: u64, index: usize, k: usize, elements: usize) -> PairRun {
    let mut rng = stream_rng(seed, 1, index as u64);
    let pair = CyclicSeparatingPair::random(k, &mut rng);
    let md = tomita_objects(&pair);
    let residuals = (0..elements)
        .map(|_| {
            let a = random_algebra_element(k, &mut rng);
            (a.norm(), md.defining_property_residual(&a))
        })
        .collect();
    // KMS at s = −i: (Ω, A Δ B Ω) = (Ω, B A Ω).
    let a = random_algebra_element(k, &mut rng);
    let b = random_algebra_element(k, &mut rng);
    let omega = pair.omega();
    let lhs = omega.dotc(&(&a * md.delta_power(1.0) * (&b * omega)));
    let rhs = omega.dotc(&(&b * (&a * omega)));
    let ev = md.k.eigenvalues();
    PairRun {
        k,
        min_schmidt: pair.schmidt_coefficients().iter().copied().fold(f64::INFINITY, f64::min),
        k_min: ev.iter().copied().fold(f64::INFINITY, f64::min),
        k_max: ev.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        intertwining: md.intertwining_defect(),
        kms: (lhs - rhs).norm() / (a.norm() * b.norm()),
        residuals,
    }
}

impl RunConfig for ModularConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn jobs(&self) -> Option<usize> {
        self.jobs
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.modular;
        if m.factor_sizes.is_empty() {
            return Err(field_error("modular.factor_sizes", "must not be empty"));
        }
        if let Some(k) = m.factor_sizes.iter().find(|&&k| !(2..=16).contains(&k)) {
            return Err(field_error("modular.factor_sizes", format!("factor size {k} outside 2..=16")));
        }
        if m.pairs == 0 {
            return Err(field_error("modular.pairs", "must be at least 1"));
        }
        if m.elements == 0 {
            return Err(field_error("modular.elements", "must be at least 1"));
        }
        positive("modular.tolerance", m.tolerance)
    }

    fn execute(&self) -> Result<Outcome, RunError> {
        let m = &self.modular;
        let runs: Vec<PairRun> = (0..m.pairs)
            .into_par_iter()
            .map(|i| run_pair(self.seed, i, m.factor_sizes[i % m.factor_sizes.len()], m.elements))
            .collect();
        let mut out = Outcome::default();
        let mut pairs = Report::new(
            "pairs",
            &[
                "pair",
                "k",
                "min_schmidt",
                "modular_hamiltonian_min",
                "modular_hamiltonian_max",
                "intertwining_defect",
                "kms_residual",
                "max_residual",
            ],
        );
        let mut residuals = Report::new(
            "defining_property",
            &["pair", "k", "element", "element_norm", "residual", "tolerance", "passes"],
        );
        let mut worst: f64 = 0.0;
        for (i, r) in runs.iter().enumerate() {
            let max_residual = r.residuals.iter().map(|x| x.1).fold(0.0, f64::max);
            worst = worst.max(max_residual);
            let row = pairs.push(vec![
                i.into(),
                r.k.into(),
                r.min_schmidt.into(),
                r.k_min.into(),
                r.k_max.into(),
                r.intertwining.into(),
                r.kms.into(),
                max_residual.into(),
            ]);
            if r.intertwining > m.tolerance {
                out.fail("pairs", row, format!("intertwining defect {:e} exceeds {:e}", r.intertwining, m.tolerance));
            }
            if r.kms > m.tolerance {
                out.fail("pairs", row, format!("KMS residual {:e} exceeds {:e}", r.kms, m.tolerance));
            }
            for (e, &(norm, res)) in r.residuals.iter().enumerate() {
                let passes = res <= m.tolerance;
                let row = residuals.push(vec![
                    i.into(),
                    r.k.into(),
                    e.into(),
                    norm.into(),
                    res.into(),
                    m.tolerance.into(),
                    passes.into(),
                ]);
                if !passes {
                    out.fail("defining_property", row, format!("residual {res:e} exceeds {:e}", m.tolerance));
                }
            }
        }
        out.metric("pairs", m.pairs);
        out.metric("elements_per_pair", m.elements);
        out.metric("max_residual", worst);
        out.reports = vec![pairs, residuals];
        Ok(out)
    }
}
