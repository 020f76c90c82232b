use qeilab_core::modular::ModularError;
use qeilab_core::operator::RVector;
use qeilab_core::scalar::{
    coherent_scaling_sequence, region_modular, region_modular_energies, CauchyDatum, LatticeModel, ScalingSettings,
    SmearingFunction,
};
use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{field_error, nonempty, positive, ConfigError, LatticeSection, SmearingSection};
use crate::report::{Cell, Outcome, Report};
use crate::{RunConfig, RunError};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub seed: u64,
    #[serde(default)]
    pub jobs: Option<usize>,
    pub model: LatticeSection,
    pub smearing: SmearingSection,
    pub datum: DatumSection,
    pub scaling: ScalingSection,
    pub spectrum: SpectrumSection,
}

/// Sparse Cauchy datum: `u[sites[i]] = u[i]`, `v[sites[i]] = v[i]`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumSection {
    pub sites: Vec<usize>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub m_list: Vec<f64>,
    pub epsilon: f64,
    pub kappa0: f64,
    pub doubling_tol: f64,
    pub max_n_max: usize,
    pub slope_tolerance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub regions: Vec<Vec<usize>>,
    pub tomita_tolerance: f64,
}

fn label(sites: &[usize]) -> String {
    sites.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(".")
}

impl LatticeConfig {
    fn datum(&self) -> CauchyDatum {
        let n = self.model.n;
        let mut u = RVector::zeros(n);
        let mut v = RVector::zeros(n);
        for (i, &x) in self.datum.sites.iter().enumerate() {
            u[x] = self.datum.u[i];
            v[x] = self.datum.v[i];
        }
        CauchyDatum::new(u, v)
    }

    fn smearing(&self) -> Result<SmearingFunction, ConfigError> {
        let s = &self.smearing;
        let plateau = s.plateau.clone().ok_or_else(|| field_error("smearing.plateau", "required for lattice-run"))?;
        SmearingFunction::plateau(self.model.n, &plateau, s.ramp, s.t0, s.theta)
            .map_err(|e| field_error("smearing", e.to_string()))
    }
}

struct RegionRun {
    epsilons: Vec<f64>,
    tomita: Option<(f64, usize)>,
}

impl RunConfig for LatticeConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn jobs(&self) -> Option<usize> {
        self.jobs
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.smearing.validate(self.model.n)?;
        let d = &self.datum;
        nonempty("datum.sites", &d.sites)?;
        if d.u.len() != d.sites.len() || d.v.len() != d.sites.len() {
            return Err(field_error("datum", "sites, u and v must have equal lengths"));
        }
        if let Some(x) = d.sites.iter().find(|&&x| x >= self.model.n) {
            return Err(field_error("datum.sites", format!("site {x} outside 0..{}", self.model.n)));
        }
        let s = &self.scaling;
        nonempty("scaling.m_list", &s.m_list)?;
        positive("scaling.epsilon", s.epsilon)?;
        positive("scaling.kappa0", s.kappa0)?;
        positive("scaling.doubling_tol", s.doubling_tol)?;
        positive("scaling.slope_tolerance", s.slope_tolerance)?;
        if s.max_n_max < 8 {
            return Err(field_error("scaling.max_n_max", "must be at least 8"));
        }
        nonempty("spectrum.regions", &self.spectrum.regions)?;
        positive("spectrum.tomita_tolerance", self.spectrum.tomita_tolerance)?;
        self.smearing()?;
        Ok(())
    }

    fn execute(&self) -> Result<Outcome, RunError> {
        let model = LatticeModel::new(self.model.n, self.model.a, self.model.mu)
            .map_err(|e| field_error("model", e.to_string()))?;
        let g = self.smearing()?;
        let mut out = Outcome::default();

        let runs: Vec<RegionRun> = self
            .spectrum
            .regions
            .par_iter()
            .enumerate()
            .map(|(i, sites)| {
                let epsilons = region_modular_energies(&model, sites)
                    .map_err(|e| field_error(format!("spectrum.regions[{i}]"), e.to_string()))?;
                let tomita = match region_modular(&model, sites) {
                    Ok(op) => Some((op.tomita_residual(), op.flagged_count())),
                    Err(ModularError::NotCyclic { .. }) => None,
                    Err(e) => return Err(field_error(format!("spectrum.regions[{i}]"), e.to_string())),
                };
                Ok(RegionRun { epsilons, tomita })
            })
            .collect::<Result<_, ConfigError>>()?;
        let mut regions = Report::new(
            "regions",
            &["region", "sites", "size", "min_epsilon", "max_epsilon", "tomita_residual", "flagged_blocks"],
        );
        let mut spectrum = Report::new("spectrum", &["region", "index", "epsilon"]);
        for (i, (sites, r)) in self.spectrum.regions.iter().zip(&runs).enumerate() {
            let (residual, flagged) = match r.tomita {
                Some((res, f)) => (Cell::Float(res), Cell::from(f)),
                None => {
                    out.findings
                        .push(format!("region {i}: local one-particle subspace is not cyclic (fewer than n/2 sites), no Tomita residual"));
                    (Cell::Empty, Cell::Empty)
                }
            };
            let row = regions.push(vec![
                i.into(),
                label(sites).into(),
                sites.len().into(),
                r.epsilons.iter().copied().fold(f64::INFINITY, f64::min).into(),
                r.epsilons.iter().copied().fold(f64::NEG_INFINITY, f64::max).into(),
                residual,
                flagged,
            ]);
            if let Some((res, _)) = r.tomita {
                if res > self.spectrum.tomita_tolerance {
                    out.fail("regions", row, format!("Tomita residual {res:e} exceeds {:e}", self.spectrum.tomita_tolerance));
                }
            }
            for (j, &e) in r.epsilons.iter().enumerate() {
                spectrum.push(vec![i.into(), j.into(), e.into()]);
            }
        }

        let settings = ScalingSettings {
            m_list: self.scaling.m_list.clone(),
            epsilon: self.scaling.epsilon,
            kappa0: self.scaling.kappa0,
            doubling_tol: self.scaling.doubling_tol,
            max_n_max: self.scaling.max_n_max,
        };
        let rep = coherent_scaling_sequence(&model, &g, &self.datum(), &settings)
            .map_err(|e| RunError::Numerical(e.to_string()))?;
        let mut scaling = Report::new(
            "scaling",
            &[
                "m",
                "energy",
                "classical",
                "rho_expectation",
                "remainder",
                "damped_norm",
                "norm_bound",
                "within_epsilon",
                "kappa",
                "n_max",
                "truncated_norm",
                "defect",
            ],
        );
        for r in &rep.rows {
            let row = scaling.push(vec![
                r.m.into(),
                r.energy.into(),
                r.classical.into(),
                r.rho_expectation.into(),
                r.remainder.into(),
                r.damped_norm.into(),
                r.norm_bound.into(),
                r.within_epsilon.into(),
                r.kappa.into(),
                r.n_max.into(),
                r.truncated_norm.into(),
                r.defect.into(),
            ]);
            if !r.within_epsilon {
                out.fail("scaling", row, format!("norm bound {} exceeds 1 + {}", r.norm_bound, self.scaling.epsilon));
            }
        }
        if rep.slope_rel_error > self.scaling.slope_tolerance {
            let last = scaling.rows.len().saturating_sub(1);
            out.fail(
                "scaling",
                last,
                format!("fitted slope {} vs {} (relative error {:e})", rep.fitted_slope, rep.expected_slope, rep.slope_rel_error),
            );
        }
        let max_remainder = rep.rows.iter().map(|r| r.remainder.abs()).fold(0.0, f64::max);
        out.metric("fitted_slope", rep.fitted_slope);
        out.metric("expected_slope", rep.expected_slope);
        out.metric("slope_rel_error", rep.slope_rel_error);
        out.metric("max_abs_remainder", max_remainder);
        out.reports = vec![regions, spectrum, scaling];
        Ok(out)
    }
}
