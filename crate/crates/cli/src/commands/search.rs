use qeilab_core::fock::FockTruncation;
use qeilab_core::scalar::{energy_density_form, hamiltonian_form, LatticeModel, SmearingFunction};
use qeilab_core::search::{
    coherent_min_closed_form, minimize_energy, CoherentMinimum, OptResult, SearchBudget, SearchError, SearchProblem,
    StateFamily,
};
use serde::Deserialize;

use crate::config::{field_error, nonempty, positive, ConfigError, LatticeSection, SmearingSection};
use crate::report::{Cell, Outcome, Report};
use crate::{RunConfig, RunError};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub seed: u64,
    #[serde(default)]
    pub jobs: Option<usize>,
    pub model: LatticeSection,
    pub smearing: SmearingSection,
    pub search: SearchSection,
    pub families: Vec<StateFamily>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub max_iters: u64,
    pub tolerance: f64,
    pub closed_form_tolerance: f64,
    pub nesting_tolerance: f64,
}

fn search_error(i: usize, e: SearchError) -> RunError {
    match e {
        SearchError::Invalid { field, reason } => field_error(format!("families[{i}].{field}"), reason).into(),
        SearchError::RadiusInadequate { radius, loss } => field_error(
            format!("families[{i}].radius"),
            format!("radius {radius} loses {loss:e} of the norm to the truncation; raise model.n_max"),
        )
        .into(),
        other => RunError::Numerical(other.to_string()),
    }
}

/// Index of a smaller family whose minimum this one may not exceed.
fn nested_in(families: &[StateFamily], f: StateFamily) -> Option<usize> {
    families.iter().position(|&g| match (f, g) {
        (StateFamily::SqueezedCoherent { radius, .. }, StateFamily::Coherent { radius: r }) => radius == r,
        (StateFamily::LowRankFock { rank }, StateFamily::LowRankFock { rank: r }) => r < rank,
        _ => false,
    })
}

impl SearchConfig {
    fn problem(&self) -> Result<SearchProblem, ConfigError> {
        let n = self.model.n;
        let n_max = self.model.n_max.ok_or_else(|| field_error("model.n_max", "required for opt-search"))?;
        let model = LatticeModel::new(n, self.model.a, self.model.mu).map_err(|e| field_error("model", e.to_string()))?;
        let s = &self.smearing;
        let plateau = s.plateau.clone().ok_or_else(|| field_error("smearing.plateau", "required for opt-search"))?;
        let g = SmearingFunction::plateau(n, &plateau, s.ramp, s.t0, s.theta).map_err(|e| field_error("smearing", e.to_string()))?;
        SearchProblem::new(energy_density_form(&model, &g), hamiltonian_form(&model), FockTruncation::new(n, n_max))
            .map_err(|e| field_error("model", e.to_string()))
    }
}

impl RunConfig for SearchConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn jobs(&self) -> Option<usize> {
        self.jobs
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.smearing.validate(self.model.n)?;
        if self.model.n > 6 {
            return Err(field_error("model.n", "opt-search works on the full Fock truncation; use at most 6 sites"));
        }
        if self.search.max_iters == 0 {
            return Err(field_error("search.max_iters", "must be at least 1"));
        }
        positive("search.tolerance", self.search.tolerance)?;
        positive("search.closed_form_tolerance", self.search.closed_form_tolerance)?;
        positive("search.nesting_tolerance", self.search.nesting_tolerance)?;
        nonempty("families", &self.families)?;
        self.problem()?;
        Ok(())
    }

    fn execute(&self) -> Result<Outcome, RunError> {
        let problem = self.problem()?;
        let budget = SearchBudget {
            max_iters: self.search.max_iters,
            tolerance: self.search.tolerance,
        };
        let mut out = Outcome::default();
        if let CoherentMinimum::UnboundedBelow { lambda_min, .. } =
            coherent_min_closed_form(&problem.form, None).map_err(|e| search_error(0, e))?
        {
            out.findings
                .push(format!("coherent family unbounded below without a radius (lambda_min {lambda_min:e})"));
        }
        let results: Vec<OptResult> = self
            .families
            .iter()
            .enumerate()
            .map(|(i, &f)| minimize_energy(&problem, f, budget, self.seed).map_err(|e| search_error(i, e)))
            .collect::<Result<_, _>>()?;

        let mut families = Report::new(
            "families",
            &[
                "family",
                "best_value",
                "closed_form",
                "closed_form_error",
                "iterations",
                "converged",
                "truncation_loss",
                "local_bound_rhs",
                "commutator_defect",
                "bound_consistent",
            ],
        );
        let mut restarts = Report::new("restarts", &["family", "restart", "value"]);
        for (i, (&f, r)) in self.families.iter().zip(&results).enumerate() {
            let closed = match f {
                StateFamily::Coherent { radius } => Some(
                    coherent_min_closed_form(&problem.form, Some(radius))
                        .map_err(|e| search_error(i, e))?
                        .value(),
                ),
                _ => None,
            };
            let error = closed.map(|c| (r.best_value - c).abs());
            let row = families.push(vec![
                r.family.clone().into(),
                r.best_value.into(),
                closed.into(),
                error.into(),
                (r.iterations as usize).into(),
                r.converged.into(),
                r.truncation_loss.into(),
                r.local_bound_rhs.into(),
                r.commutator_defect.into(),
                r.bound_consistent.map_or(Cell::Empty, Cell::Bool),
            ]);
            for (j, v) in r.restart_values.iter().enumerate() {
                restarts.push(vec![r.family.clone().into(), j.into(), (*v).into()]);
            }
            if let Some(e) = error {
                if e > self.search.closed_form_tolerance {
                    out.fail("families", row, format!("optimizer misses the closed form by {e:e}"));
                }
            }
            if r.bound_consistent == Some(false) {
                out.fail("families", row, "minimum violates the local bound beyond the commutator defect");
            }
            if let Some(j) = nested_in(&self.families, f) {
                if r.best_value > results[j].best_value + self.search.nesting_tolerance {
                    out.fail("families", row, format!("larger family exceeds the minimum of {}", results[j].family));
                }
            }
            if !r.converged {
                out.findings.push(format!("{}: iteration budget exhausted before tolerance", r.family));
            }
        }
        out.metric("modes", problem.modes());
        out.metric("truncation_dim", problem.trunc.dim());
        out.metric("vacuum_image_norm", problem.form.vacuum_image_norm());
        out.reports = vec![families, restarts];
        Ok(out)
    }
}
