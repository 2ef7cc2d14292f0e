//! The JSON document accepted by `--config`.
//!
//! ```json
//! { "dataset": "shifted-mixture-2d", "run": { "seed": 3, "epochs": 20 } }
//! ```
//!
//! `dataset` is either a preset name or a full dataset spec; `run` may omit
//! fields, which take their defaults. Unknown keys anywhere are rejected.
//! Artifacts always carry the fully materialized form.

use std::path::Path;

use careflow::pipeline::{Ablation, RunConfig};
use careflow::synthdata::DatasetSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const PRESETS: [&str; 4] = [
    "shifted-mixture-2d",
    "shifted-mixture-16d",
    "shifted-regression-2d",
    "shifted-regression-16d",
];

pub fn preset(name: &str) -> Option<DatasetSpec> {
    Some(match name {
        "shifted-mixture-2d" => DatasetSpec::shifted_mixture(2),
        "shifted-mixture-16d" => DatasetSpec::shifted_mixture(16),
        "shifted-regression-2d" => DatasetSpec::shifted_regression(2),
        "shifted-regression-16d" => DatasetSpec::shifted_regression(16),
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum DatasetEntry {
    Preset(String),
    Spec(Box<DatasetSpec>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: Option<DatasetEntry>,
    #[serde(default)]
    run: RunConfig,
}

/// A parsed and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub dataset: DatasetSpec,
    pub run: RunConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::shifted_mixture(2),
            run: RunConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub ablate: Option<Ablation>,
    pub alpha_f: Option<f64>,
    pub alpha_b: Option<f64>,
    pub beta: Option<usize>,
    pub euler_steps: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, run: &mut RunConfig) {
        if let Some(v) = self.seed {
            run.seed = v;
        }
        if let Some(a) = self.ablate {
            run.ablation.set(a);
        }
        if let Some(v) = self.alpha_f {
            run.alpha_f = v;
        }
        if let Some(v) = self.alpha_b {
            run.alpha_b = v;
        }
        if let Some(v) = self.beta {
            run.beta = v;
        }
        if let Some(v) = self.euler_steps {
            run.euler_steps = v;
        }
    }
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::format(path, e))?;
        let dataset = match raw.dataset {
            None => DatasetSpec::shifted_mixture(2),
            Some(DatasetEntry::Preset(name)) => preset(&name).ok_or_else(|| {
                CliError::format(
                    path,
                    format!("unknown dataset preset {name:?} (expected one of {})", PRESETS.join(", ")),
                )
            })?,
            Some(DatasetEntry::Spec(spec)) => *spec,
        };
        let config = Config { dataset, run: raw.run };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.dataset.validate()?;
        self.run.validate()?;
        Ok(())
    }

    pub fn with_overrides(mut self, overrides: &Overrides) -> CliResult<Self> {
        overrides.apply(&mut self.run);
        self.validate()?;
        Ok(self)
    }
}
