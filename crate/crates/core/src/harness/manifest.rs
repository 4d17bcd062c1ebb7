//! Experiment manifests: the fully resolved inputs of a run, stored as TOML
//! so a run can be repeated bit-for-bit. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Result};
use crate::model::{validate_scenario, Mode, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulation,
    Privacy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
}

fn default_repetitions() -> usize {
    5
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Baseline, Mode::Bdmec]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySweepSpec {
    pub epsilons: Vec<f64>,
    #[serde(default = "one")]
    pub sensitivity: f64,
    pub trials: u64,
    pub seed: u64,
    /// True job count per worker.
    pub counts: BTreeMap<String, u64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub experiment: ExperimentSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy_sweep: Option<PrivacySweepSpec>,
}

impl Manifest {
    pub fn validate(mut self) -> Result<Manifest, ConfigError> {
        match self.experiment.kind {
            ExperimentKind::Simulation => {
                let scenario = self
                    .scenario
                    .take()
                    .ok_or_else(|| ConfigError::invalid("scenario", "required for simulation"))?;
                self.scenario = Some(validate_scenario(scenario)?);
                if self.experiment.repetitions == 0 {
                    return Err(ConfigError::invalid("experiment.repetitions", "must be ≥ 1"));
                }
                if self.experiment.modes.is_empty() {
                    return Err(ConfigError::invalid("experiment.modes", "must be non-empty"));
                }
            }
            ExperimentKind::Privacy => {
                let sweep = self
                    .privacy_sweep
                    .as_ref()
                    .ok_or_else(|| ConfigError::invalid("privacy_sweep", "required for privacy"))?;
                if sweep.epsilons.is_empty() || sweep.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                    return Err(ConfigError::invalid("privacy_sweep.epsilons", "must be positive"));
                }
                if sweep.trials == 0 {
                    return Err(ConfigError::invalid("privacy_sweep.trials", "must be ≥ 1"));
                }
                if sweep.counts.is_empty() || sweep.counts.values().any(|&v| v == 0) {
                    return Err(ConfigError::invalid("privacy_sweep.counts", "must be positive"));
                }
                if !(sweep.sensitivity.is_finite() && sweep.sensitivity > 0.0) {
                    return Err(ConfigError::invalid("privacy_sweep.sensitivity", "must be > 0"));
                }
            }
        }
        Ok(self)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Manifest, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    validate_scenario(config)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path)?;
    Ok(Manifest::from_toml(&text)?.validate()?)
}
