//! Run configuration files: one JSON object per run, shared by every
//! subcommand. Sections a subcommand does not use are ignored by it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::BoundSpec;
use crate::geometry::{Domain, SamplePlan};
use crate::harness::{check_levels, DataTerm, DecayConfig, DirichletProblem, VerificationRun};
use crate::operator::SolverOptions;
use crate::params::DimensionParams;

fn default_exclusion() -> f64 {
    8.0
}

fn default_q_offset() -> f64 {
    1e-3
}

fn default_points() -> usize {
    40
}

fn default_trials() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    pub anchor: Vec<f64>,
    pub radius: f64,
    #[serde(default = "default_q_offset")]
    pub q_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletSection {
    pub data_sets: Vec<Vec<DataTerm>>,
    #[serde(default = "default_points")]
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardySection {
    #[serde(default = "default_trials")]
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Domain,
    pub m: u32,
    pub n: u32,
    /// Mesh widths; order does not matter.
    #[serde(default)]
    pub levels: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<SamplePlan>,
    /// Empty means every admissible spec.
    #[serde(default)]
    pub specs: Vec<BoundSpec>,
    #[serde(default = "default_exclusion")]
    pub exclusion: f64,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecaySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<DirichletSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardy: Option<HardySection>,
}

impl RunConfig {
    /// Parses and validates; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "(root)".to_string() } else { path }, e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn params(&self) -> Result<DimensionParams> {
        DimensionParams::new(self.m, self.n).map_err(|e| Error::config("n", e.to_string()))
    }

    /// Checks everything that does not need a grid.
    pub fn validate(&self) -> Result<()> {
        let params = self.params()?;
        if self.domain.dim() != self.n as usize {
            return Err(Error::config(
                "domain.dim",
                format!("domain dimension {} differs from n = {}", self.domain.dim(), self.n),
            ));
        }
        for (k, s) in self.specs.iter().enumerate() {
            s.validate(params)
                .map_err(|e| Error::config(format!("specs[{k}]"), e.to_string()))?;
        }
        if !self.levels.is_empty() {
            check_levels(&self.levels)?;
        }
        if let Some(d) = &self.decay {
            if d.anchor.len() != self.n as usize {
                return Err(Error::config("decay.anchor", "dimension differs from n"));
            }
            if !(d.radius > 0.0) {
                return Err(Error::config("decay.radius", "must be positive"));
            }
        }
        Ok(())
    }

    fn require_levels(&self) -> Result<Vec<f64>> {
        if self.levels.is_empty() {
            return Err(Error::config("levels", "need at least two grid levels"));
        }
        check_levels(&self.levels)
    }

    pub fn verification_run(&self) -> Result<VerificationRun> {
        let plan = self
            .plan
            .clone()
            .ok_or_else(|| Error::config("plan", "a sample plan is required"))?;
        self.require_levels()?;
        let mut run = VerificationRun::new(self.domain.clone(), self.params()?, self.levels.clone(), plan, self.specs.clone());
        run.solver = self.solver;
        run.exclusion = self.exclusion;
        Ok(run)
    }

    pub fn decay_config(&self) -> Result<DecayConfig> {
        let d = self
            .decay
            .as_ref()
            .ok_or_else(|| Error::config("decay", "a decay section is required"))?;
        self.require_levels()?;
        let mut cfg = DecayConfig::new(self.domain.clone(), self.params()?, self.levels.clone(), d.anchor.clone(), d.radius);
        cfg.q_offset = d.q_offset;
        cfg.solver = self.solver;
        Ok(cfg)
    }

    pub fn dirichlet_problem(&self) -> Result<DirichletProblem> {
        let d = self
            .dirichlet
            .as_ref()
            .ok_or_else(|| Error::config("dirichlet", "a dirichlet section is required"))?;
        self.require_levels()?;
        Ok(DirichletProblem {
            domain: self.domain.clone(),
            params: self.params()?,
            levels: self.levels.clone(),
            data_sets: d.data_sets.clone(),
            points: d.points,
            seed: self.seed,
            solver: self.solver,
        })
    }

    pub fn hardy_trials(&self) -> usize {
        self.hardy.as_ref().map_or_else(default_trials, |h| h.trials)
    }
}
