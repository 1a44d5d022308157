use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use triage_core::cascade::{ThresholdStrategy, DEFAULT_DELTA};
use triage_core::data::SynthConfig;
use triage_core::eval::{DEFAULT_REPLICATES, MIN_REPLICATES};
use triage_core::explain::{ShapleyMethod, DEFAULT_BACKGROUND_CAP};
use triage_core::learners::{Gamma, LearnerSpec, Metric};
use triage_core::seeding::derive_seed;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_n: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { test_n: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub basic_c: Vec<f64>,
    pub advanced_c: Vec<f64>,
    pub triage_c: Vec<f64>,
    pub triage_gamma: Vec<Gamma>,
    pub folds: usize,
    pub stratified: bool,
    pub metric: Metric,
}

impl Default for GridConfig {
    fn default() -> Self {
        let cs = vec![0.01, 0.1, 1.0, 10.0];
        Self {
            basic_c: cs.clone(),
            advanced_c: cs,
            triage_c: vec![0.1, 1.0, 10.0],
            triage_gamma: vec![Gamma::Auto],
            folds: 5,
            stratified: true,
            metric: Metric::Auroc,
        }
    }
}

impl GridConfig {
    pub fn basic_grid(&self) -> Vec<LearnerSpec> {
        LearnerSpec::logistic_grid(&self.basic_c)
    }

    pub fn advanced_grid(&self) -> Vec<LearnerSpec> {
        LearnerSpec::logistic_grid(&self.advanced_c)
    }

    pub fn triage_grid(&self) -> Vec<LearnerSpec> {
        LearnerSpec::svm_grid(&self.triage_c, &self.triage_gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub enabled: bool,
    pub replicates: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            replicates: DEFAULT_REPLICATES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub background_cap: usize,
    pub method: ShapleyMethod,
    pub top_k: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            background_cap: DEFAULT_BACKGROUND_CAP,
            method: ShapleyMethod::Exact,
            top_k: 5,
        }
    }
}

/// Everything a run needs. Every random stream is derived from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Schema JSON; defaults to the run directory's `schema.json`, then to
    /// the synthetic generator's layout.
    pub schema: Option<PathBuf>,
    /// Cohort CSV; defaults to the run directory's `cohort.csv`.
    pub cohort: Option<PathBuf>,
    pub synth: SynthConfig,
    pub seed: u64,
    pub split: SplitConfig,
    pub grids: GridConfig,
    pub delta: f64,
    pub threshold: ThresholdStrategy,
    pub unit_cost: f64,
    pub bootstrap: BootstrapConfig,
    pub explain: ExplainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: None,
            cohort: None,
            synth: SynthConfig::default(),
            seed: 1,
            split: SplitConfig::default(),
            grids: GridConfig::default(),
            delta: DEFAULT_DELTA,
            threshold: ThresholdStrategy::default(),
            unit_cost: 4000.0,
            bootstrap: BootstrapConfig::default(),
            explain: ExplainConfig::default(),
        }
    }
}

/// Named random streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Split = 1,
    CvBasic = 2,
    CvAdvanced = 3,
    CvTriage = 4,
    Bootstrap = 5,
    RandomBaseline = 6,
    Background = 7,
    Shapley = 8,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Sets the run seed, which also seeds the synthetic generator.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.synth.seed = seed;
        self
    }

    pub fn stream(&self, stream: Stream) -> u64 {
        derive_seed(self.seed, stream as u64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.delta.is_nan() || self.delta <= 0.0 {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if self.bootstrap.replicates < MIN_REPLICATES {
            return bad(format!(
                "bootstrap.replicates must be at least {MIN_REPLICATES}, got {}",
                self.bootstrap.replicates
            ));
        }
        if self.grids.folds < 2 {
            return bad(format!("grids.folds must be at least 2, got {}", self.grids.folds));
        }
        if self.grids.basic_c.is_empty() || self.grids.advanced_c.is_empty() || self.grids.triage_c.is_empty() {
            return bad("hyperparameter grids must be non-empty".into());
        }
        if self.grids.triage_gamma.is_empty() {
            return bad("grids.triage_gamma must be non-empty".into());
        }
        if !(self.unit_cost >= 0.0 && self.unit_cost.is_finite()) {
            return bad(format!("unit_cost must be non-negative, got {}", self.unit_cost));
        }
        match self.threshold {
            ThresholdStrategy::Fixed { tau } if !(0.0..=1.0).contains(&tau) => {
                return bad(format!("fixed threshold {tau} outside [0, 1]"));
            }
            ThresholdStrategy::MaxCoverageUnderRisk { r_max } if !(0.0..=1.0).contains(&r_max) => {
                return bad(format!("r_max {r_max} outside [0, 1]"));
            }
            _ => {}
        }
        if let ShapleyMethod::Sampled { n_samples: 0, .. } = self.explain.method {
            return bad("explain.method.n_samples must be positive".into());
        }
        if self.explain.background_cap == 0 {
            return bad("explain.background_cap must be positive".into());
        }
        for (name, path) in [("schema", &self.schema), ("cohort", &self.cohort)] {
            if let Some(p) = path {
                if !p.exists() {
                    return bad(format!("{name} path {} does not exist", p.display()));
                }
            }
        }
        self.synth.validate().map_err(|e| CliError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let partial: RunConfig = serde_json::from_str(r#"{"delta": 0.3, "threshold": {"kind": "fixed", "tau": 0.05}}"#).unwrap();
        assert_eq!(partial.delta, 0.3);
        assert_eq!(partial.threshold, ThresholdStrategy::Fixed { tau: 0.05 });
    }

    #[test]
    fn rejects_bad_values() {
        let c = RunConfig { delta: 0.0, ..Default::default() };
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let mut c = RunConfig::default();
        c.bootstrap.replicates = 10;
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"dleta": 0.3}"#).is_err());
    }

    #[test]
    fn streams_differ() {
        let c = RunConfig::default();
        assert_ne!(c.stream(Stream::Split), c.stream(Stream::CvBasic));
    }
}
