use qeilab_core::modular::{random_algebra_element, random_unitary};
use qeilab_core::operator::{CMatrix, CVector, C64};
use qeilab_core::qei::Verdict;
use qeilab_core::toy::{
    build_toy_model, check_assumptions, local_bound_evaluate, modular_chain_check, toy_bound_verify, AssumptionStatus,
    ChainReport, LocalBound, ToyError, ToyModel,
};
use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use super::op_norm;
use crate::config::{field_error, positive, ConfigError, SweepSection};
use crate::report::{Cell, Outcome, Report};
use crate::{stream_rng, RunConfig, RunError};

/// `(AΩ, HAΩ)` may dip below zero only by rounding.
const POSITIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyConfig {
    pub seed: u64,
    #[serde(default)]
    pub jobs: Option<usize>,
    pub model: ToyModelSection,
    pub simple_bound: SimpleBoundSection,
    pub chain: ChainSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyModelSection {
    pub k: usize,
    pub models: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimpleBoundSection {
    pub cases: usize,
    pub slack: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub triples: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub tolerance: f64,
}

fn numerical(e: ToyError) -> RunError {
    RunError::Numerical(e.to_string())
}

fn lift(x: &CMatrix) -> CMatrix {
    x.kronecker(&CMatrix::identity(x.nrows(), x.nrows()))
}

fn status_cells(s: &AssumptionStatus) -> [Cell; 3] {
    match s {
        AssumptionStatus::ExactPass { residual } => ["exact-pass".into(), (*residual).into(), Cell::Empty],
        AssumptionStatus::AutoPass { reason } => ["auto-pass".into(), Cell::Empty, (*reason).into()],
        AssumptionStatus::Diagnostic { value, meaning } => ["diagnostic".into(), (*value).into(), (*meaning).into()],
        AssumptionStatus::NotRealizable { reason } => ["not-realizable".into(), Cell::Empty, (*reason).into()],
        AssumptionStatus::Failed { residual } => ["failed".into(), (*residual).into(), Cell::Empty],
    }
}

impl ToyConfig {
    fn model_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }

    fn simple_case(&self, models: &[ToyModel], c: usize) -> Result<(&'static str, LocalBound), RunError> {
        let m = &models[c % models.len()];
        let mut rng = stream_rng(self.seed, 2, c as u64);
        let (kind, a) = if c % 2 == 0 {
            ("unitary", lift(&random_unitary(m.k, &mut rng)))
        } else {
            ("random", random_algebra_element(m.k, &mut rng))
        };
        let r = op_norm(&a) / (&a * m.omega()).norm() * rng.random_range(1.0..3.0);
        Ok((kind, local_bound_evaluate(m, &a, r).map_err(numerical)?))
    }

    fn chain_triple(&self, models: &[ToyModel], t: usize) -> Result<ChainReport, RunError> {
        let m = &models[t % models.len()];
        let mut rng = stream_rng(self.seed, 3, t as u64);
        let y = random_algebra_element(m.k, &mut rng);
        let y = &y / C64::new(op_norm(&y) * rng.random_range(1.0..2.0), 0.0);
        let a = random_algebra_element(m.k, &mut rng);
        let lambda = rng.random_range(self.chain.lambda_min..self.chain.lambda_max);
        modular_chain_check(m, &y, &a, lambda).map_err(numerical)
    }
}

impl RunConfig for ToyConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn jobs(&self) -> Option<usize> {
        self.jobs
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(2..=8).contains(&self.model.k) {
            return Err(field_error("model.k", format!("factor size {} outside 2..=8", self.model.k)));
        }
        if self.model.models == 0 {
            return Err(field_error("model.models", "must be at least 1"));
        }
        positive("simple_bound.slack", self.simple_bound.slack)?;
        positive("chain.lambda_min", self.chain.lambda_min)?;
        if !(self.chain.lambda_max > self.chain.lambda_min && self.chain.lambda_max.is_finite()) {
            return Err(field_error("chain.lambda_max", "must be finite and exceed chain.lambda_min"));
        }
        positive("chain.tolerance", self.chain.tolerance)?;
        self.sweep.validate()
    }

    fn execute(&self) -> Result<Outcome, RunError> {
        let k = self.model.k;
        let models: Vec<ToyModel> = (0..self.model.models)
            .map(|i| build_toy_model(self.model_seed(i), k))
            .collect::<Result<_, _>>()
            .map_err(numerical)?;
        let mut out = Outcome::default();

        let mut assumptions = Report::new("assumptions", &["model_seed", "k", "assumption", "status", "value", "detail"]);
        for (i, m) in models.iter().enumerate() {
            let mut rng = stream_rng(self.seed, 4, i as u64);
            let v = CVector::from_fn(m.dim(), |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let psi = &v / C64::new(v.norm(), 0.0);
            for e in check_assumptions(m, &psi).entries {
                let [status, value, detail] = status_cells(&e.status);
                let failed = matches!(e.status, AssumptionStatus::Failed { .. });
                let row = assumptions.push(vec![m.seed.into(), k.into(), e.name.into(), status, value, detail]);
                if failed {
                    out.fail("assumptions", row, format!("assumption {} failed", e.name));
                }
            }
        }

        let cases: Vec<(&'static str, LocalBound)> = (0..self.simple_bound.cases)
            .into_par_iter()
            .map(|c| self.simple_case(&models, c))
            .collect::<Result<_, _>>()?;
        let mut simple = Report::new(
            "simple_bound",
            &[
                "case",
                "model_seed",
                "k",
                "operator",
                "r",
                "lhs",
                "rhs",
                "positive_part",
                "remainder",
                "generator_residual",
                "slack",
                "verdict",
            ],
        );
        let mut violations = 0usize;
        let mut min_positive = f64::INFINITY;
        for (c, (kind, b)) in cases.iter().enumerate() {
            let verdict = Verdict::from_sides(b.report.lhs, b.report.rhs, self.simple_bound.slack);
            let row = simple.push(vec![
                c.into(),
                models[c % models.len()].seed.into(),
                k.into(),
                (*kind).into(),
                b.r.into(),
                b.report.lhs.into(),
                b.report.rhs.into(),
                b.positive_part.into(),
                b.remainder.into(),
                b.report.commutator_defect.into(),
                self.simple_bound.slack.into(),
                verdict.as_str().into(),
            ]);
            min_positive = min_positive.min(b.positive_part);
            if !verdict.passes() {
                violations += 1;
                out.fail("simple_bound", row, format!("lhs {:e} below rhs {:e} beyond slack", b.report.lhs, b.report.rhs));
            }
            if b.positive_part < -POSITIVITY_TOL {
                out.fail("simple_bound", row, format!("(AΩ,HAΩ) = {:e} is negative", b.positive_part));
            }
        }

        let triples: Vec<ChainReport> = (0..self.chain.triples)
            .into_par_iter()
            .map(|t| self.chain_triple(&models, t))
            .collect::<Result<_, _>>()?;
        let mut chain = Report::new(
            "chain",
            &[
                "triple",
                "model_seed",
                "lambda",
                "integral_re",
                "integral_im",
                "spectral_re",
                "spectral_im",
                "tomita_re",
                "tomita_im",
                "conjugated_re",
                "conjugated_im",
                "max_discrepancy",
                "quadrature_tail",
                "quadrature_order",
                "final_bound",
                "vector_norm",
                "within_bound",
            ],
        );
        let mut worst_chain: f64 = 0.0;
        for (t, c) in triples.iter().enumerate() {
            let row = chain.push(vec![
                t.into(),
                models[t % models.len()].seed.into(),
                c.lambda.into(),
                c.integral.re.into(),
                c.integral.im.into(),
                c.spectral.re.into(),
                c.spectral.im.into(),
                c.tomita.re.into(),
                c.tomita.im.into(),
                c.conjugated.re.into(),
                c.conjugated.im.into(),
                c.max_discrepancy.into(),
                c.quadrature_tail.into(),
                c.quadrature_order.into(),
                c.final_bound.into(),
                c.vector_norm.into(),
                c.within_bound.into(),
            ]);
            worst_chain = worst_chain.max(c.max_discrepancy);
            let allowed = self.chain.tolerance.max(c.quadrature_tail);
            if c.max_discrepancy > allowed {
                out.fail("chain", row, format!("discrepancy {:e} exceeds {allowed:e}", c.max_discrepancy));
            }
            if !c.within_bound {
                out.fail("chain", row, "final term exceeds its Cauchy-Schwarz bound");
            }
        }

        let mut bound = Report::new(
            "modular_bound",
            &[
                "model_seed",
                "state",
                "lambda",
                "lhs",
                "rhs",
                "epsilon",
                "commutator_defect",
                "preparability",
                "slack",
                "verdict",
                "modular_norm",
                "alternate",
                "lambda0",
            ],
        );
        for (i, m) in models.iter().enumerate() {
            let d = m.dim();
            let mut rng = stream_rng(self.seed, 5, i as u64);
            let states = [
                ("vacuum", CMatrix::identity(d, d)),
                ("unitary", lift(&random_unitary(k, &mut rng))),
            ];
            for (label, y) in states {
                let sweep = toy_bound_verify(m, &y, self.sweep.epsilon, &self.sweep.lambda_grid).map_err(numerical)?;
                if sweep.lambda0.is_none() {
                    out.findings
                        .push(format!("{} state {label}: no passing lambda prefix", m.id()));
                }
                for (r, n) in sweep.rows.iter().zip(&sweep.norms) {
                    let row = bound.push(vec![
                        m.seed.into(),
                        label.into(),
                        r.lambda.into(),
                        r.lhs.into(),
                        r.rhs.into(),
                        r.epsilon.into(),
                        r.commutator_defect.into(),
                        r.preparability.into(),
                        r.defect_slack.into(),
                        r.verdict.as_str().into(),
                        n.norm.into(),
                        n.alternate.into(),
                        sweep.lambda0.into(),
                    ]);
                    if label == "vacuum" && r.verdict != Verdict::Holds {
                        out.fail("modular_bound", row, "vacuum must satisfy the bound at every lambda");
                    }
                }
            }
        }

        out.metric("models", models.len());
        out.metric("simple_bound_cases", cases.len());
        out.metric("simple_bound_violations", violations);
        out.metric("min_positive_part", min_positive);
        out.metric("chain_triples", triples.len());
        out.metric("max_chain_discrepancy", worst_chain);
        out.reports = vec![assumptions, simple, chain, bound];
        Ok(out)
    }
}
