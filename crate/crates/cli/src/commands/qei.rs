use qeilab_core::qei::{
    domain_divergence_scan, lattice_bound_verify, BoundError, LatticeBoundSetup, PreparedState, RegionNest, SweepResult,
    Verdict,
};
use qeilab_core::scalar::{local_squeezer, weyl_map, BogoliubovMap, CauchyDatum, LatticeModel, SmearingFunction};
use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{field_error, nonempty, positive, ConfigError, LatticeSection, RegionsSection, SmearingSection, SweepSection};
use crate::report::{Outcome, Report};
use crate::{RunConfig, RunError};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QeiConfig {
    pub seed: u64,
    #[serde(default)]
    pub jobs: Option<usize>,
    pub model: LatticeSection,
    #[serde(default)]
    pub regions: Option<RegionsSection>,
    pub smearing: SmearingSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub scan: Option<ScanSection>,
    pub states: Vec<StateSpec>,
}

/// Refinements of the same physical chain `L = n·a`, with the smearing plateau and the
/// modular region given as fractions of the chain.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub refinements: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    pub plateau_fraction: [f64; 2],
    pub region_fraction: [f64; 2],
    #[serde(default)]
    pub trend_lambda: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    Vacuum,
    /// Weyl operator of the datum `u = u·δ_site`, `v = v·δ_site`, scaled by `multiplier`.
    Coherent { site: usize, u: f64, v: f64, multiplier: f64 },
    /// Local squeezer with the given site profile.
    Squeezed { sites: Vec<usize>, weights: Vec<f64>, strength: f64 },
}

impl StateSpec {
    fn label(&self) -> String {
        match self {
            StateSpec::Vacuum => "vacuum".into(),
            StateSpec::Coherent { site, multiplier, .. } => format!("coherent@{site}x{multiplier}"),
            StateSpec::Squeezed { sites, strength, .. } => format!(
                "squeezed@{}x{strength}",
                sites.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(".")
            ),
        }
    }

    fn prepare(&self, model: &LatticeModel, nest: &RegionNest) -> PreparedState {
        let n = model.n();
        let (map, support) = match self {
            StateSpec::Vacuum => (BogoliubovMap::identity(n), nest.o_flat.clone()),
            StateSpec::Coherent { site, u, v, multiplier } => {
                (weyl_map(model, &CauchyDatum::site(n, *site, *u, *v), *multiplier), vec![*site])
            }
            StateSpec::Squeezed { sites, weights, strength } => {
                let mut profile = vec![0.0; n];
                for (&x, &w) in sites.iter().zip(weights) {
                    profile[x] = w;
                }
                (local_squeezer(model, &profile, *strength), sites.clone())
            }
        };
        PreparedState {
            label: self.label(),
            map,
            support,
        }
    }
}

fn fraction_range(n: usize, f: [f64; 2]) -> Vec<usize> {
    let lo = (f[0] * n as f64).floor() as usize;
    let hi = (f[1] * n as f64).floor() as usize;
    (lo..hi.min(n)).collect()
}

fn bound_error(e: BoundError) -> RunError {
    match e {
        BoundError::Invalid { field, reason } => field_error(field, reason).into(),
        other => RunError::Numerical(other.to_string()),
    }
}

impl QeiConfig {
    fn nest(&self) -> Result<RegionNest, ConfigError> {
        let n = self.model.n;
        let extent = |t: Option<f64>| t.unwrap_or(self.smearing.theta);
        let nest = match &self.regions {
            Some(r) => RegionNest::new(
                n,
                r.o.clone(),
                r.o_cross.clone(),
                r.o_flat.clone(),
                r.o_sharp.clone(),
                extent(r.time_extent),
            ),
            None => RegionNest::default_for(n, self.smearing.theta),
        };
        nest.map_err(|e| match e {
            BoundError::Invalid { reason, .. } => field_error("regions", reason),
            other => field_error("regions", other.to_string()),
        })
    }

    fn scan_setup(&self, scan: &ScanSection, n: usize) -> Result<LatticeBoundSetup, RunError> {
        let length = self.model.n as f64 * self.model.a;
        let model = LatticeModel::new(n, length / n as f64, self.model.mu).map_err(|e| field_error("scan.refinements", e.to_string()))?;
        let plateau = fraction_range(n, scan.plateau_fraction);
        let g = SmearingFunction::plateau(n, &plateau, self.smearing.ramp, self.smearing.t0, self.smearing.theta)
            .map_err(|e| field_error("scan.plateau_fraction", e.to_string()))?;
        LatticeBoundSetup::for_region(model, g, fraction_range(n, scan.region_fraction)).map_err(bound_error)
    }
}

impl RunConfig for QeiConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn jobs(&self) -> Option<usize> {
        self.jobs
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.smearing.validate(self.model.n)?;
        self.sweep.validate()?;
        nonempty("states", &self.states)?;
        let n = self.model.n;
        for (i, s) in self.states.iter().enumerate() {
            match s {
                StateSpec::Vacuum => {}
                StateSpec::Coherent { site, multiplier, .. } => {
                    if *site >= n {
                        return Err(field_error(format!("states[{i}].site"), format!("site {site} outside 0..{n}")));
                    }
                    if !multiplier.is_finite() {
                        return Err(field_error(format!("states[{i}].multiplier"), "must be finite"));
                    }
                }
                StateSpec::Squeezed { sites, weights, strength } => {
                    nonempty(&format!("states[{i}].sites"), sites)?;
                    if sites.len() != weights.len() {
                        return Err(field_error(format!("states[{i}].weights"), "needs one weight per site"));
                    }
                    if let Some(x) = sites.iter().find(|&&x| x >= n) {
                        return Err(field_error(format!("states[{i}].sites"), format!("site {x} outside 0..{n}")));
                    }
                    if !strength.is_finite() {
                        return Err(field_error(format!("states[{i}].strength"), "must be finite"));
                    }
                }
            }
        }
        if let Some(scan) = &self.scan {
            nonempty("scan.refinements", &scan.refinements)?;
            nonempty("scan.lambda_grid", &scan.lambda_grid)?;
            for &l in &scan.lambda_grid {
                positive("scan.lambda_grid", l)?;
            }
            for (name, f) in [("scan.plateau_fraction", scan.plateau_fraction), ("scan.region_fraction", scan.region_fraction)] {
                if !(0.0 <= f[0] && f[0] < f[1] && f[1] <= 1.0) {
                    return Err(field_error(name, "needs 0 <= start < end <= 1"));
                }
            }
            if let Some(l) = scan.trend_lambda {
                if !scan.lambda_grid.contains(&l) {
                    return Err(field_error("scan.trend_lambda", format!("{l} is not in scan.lambda_grid")));
                }
            }
        }
        self.nest()?;
        Ok(())
    }

    fn execute(&self) -> Result<Outcome, RunError> {
        let n = self.model.n;
        let model = LatticeModel::new(n, self.model.a, self.model.mu).map_err(|e| field_error("model", e.to_string()))?;
        let nest = self.nest()?;
        let plateau = self.smearing.plateau.clone().unwrap_or_else(|| nest.o.clone());
        let g = SmearingFunction::plateau(n, &plateau, self.smearing.ramp, self.smearing.t0, self.smearing.theta)
            .map_err(|e| field_error("smearing", e.to_string()))?;
        let setup = LatticeBoundSetup::new(model.clone(), g, nest.clone()).map_err(bound_error)?;
        let mut out = Outcome::default();

        let sweeps: Vec<(StateSpec, SweepResult)> = self
            .states
            .par_iter()
            .map(|s| {
                let state = s.prepare(&model, &nest);
                let r = lattice_bound_verify(&setup, &state, self.sweep.epsilon, &self.sweep.lambda_grid, self.seed)
                    .map_err(bound_error)?;
                Ok((s.clone(), r))
            })
            .collect::<Result<_, RunError>>()?;
        let mut bound = Report::new(
            "bound",
            &[
                "state",
                "regions",
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
                "relative_gap",
                "lambda0",
            ],
        );
        for (spec, sweep) in &sweeps {
            let mut first = None;
            for (r, m) in sweep.rows.iter().zip(&sweep.norms) {
                let row = bound.push(vec![
                    spec.label().into(),
                    nest.label().into(),
                    r.lambda.into(),
                    r.lhs.into(),
                    r.rhs.into(),
                    r.epsilon.into(),
                    r.commutator_defect.into(),
                    r.preparability.into(),
                    r.defect_slack.into(),
                    r.verdict.as_str().into(),
                    m.norm.into(),
                    m.alternate.into(),
                    m.relative_gap().into(),
                    sweep.lambda0.into(),
                ]);
                first.get_or_insert(row);
                if matches!(spec, StateSpec::Vacuum) && r.verdict != Verdict::Holds {
                    out.fail("bound", row, "vacuum must satisfy the bound at every lambda");
                }
            }
            if sweep.lambda0.is_none() {
                out.fail("bound", first.unwrap_or(0), format!("{} has no passing lambda prefix", spec.label()));
            }
        }
        out.metric("flagged_blocks", setup.flagged_blocks());
        out.metric("kernel_component", setup.kernel_component());
        out.reports.push(bound);

        if let Some(scan) = &self.scan {
            let setups: Vec<LatticeBoundSetup> = scan
                .refinements
                .par_iter()
                .map(|&m| self.scan_setup(scan, m))
                .collect::<Result<_, _>>()?;
            let rows = domain_divergence_scan(&setups, &scan.lambda_grid).map_err(bound_error)?;
            let mut div = Report::new(
                "divergence",
                &[
                    "n",
                    "a",
                    "lambda",
                    "norm",
                    "alternate",
                    "kernel_component",
                    "flagged_blocks",
                    "flagged_weight",
                    "max_log_delta",
                ],
            );
            let length = self.model.n as f64 * self.model.a;
            for r in &rows {
                div.push(vec![
                    r.n.into(),
                    (length / r.n as f64).into(),
                    r.lambda.into(),
                    r.norm.into(),
                    r.alternate.into(),
                    r.kernel_component.into(),
                    r.flagged_blocks.into(),
                    r.flagged_weight.into(),
                    r.max_log_delta.into(),
                ]);
            }
            // Kernel monotonicity: the norm cannot shrink as λ decreases.
            for (i, a) in rows.iter().enumerate() {
                for b in rows.iter().skip(i + 1).filter(|b| b.n == a.n && b.lambda < a.lambda) {
                    if b.norm < a.norm * (1.0 - 1e-12) {
                        let row = rows.iter().position(|r| std::ptr::eq(r, b)).unwrap_or(i);
                        out.fail("divergence", row, format!("norm decreased from lambda {} to {}", a.lambda, b.lambda));
                    }
                }
            }
            if let Some(l) = scan.trend_lambda {
                let mut at: Vec<(usize, usize, f64)> = rows
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.lambda == l)
                    .map(|(i, r)| (r.n, i, r.norm))
                    .collect();
                at.sort_by_key(|x| x.0);
                let increasing = at.windows(2).all(|w| w[1].2 > w[0].2);
                if !increasing {
                    let row = at.last().map_or(0, |x| x.1);
                    out.fail("divergence", row, format!("norm not strictly increasing under refinement at lambda {l}"));
                }
                out.metric("refinement_increasing", increasing);
            }
            out.reports.push(div);
        }
        Ok(out)
    }
}
