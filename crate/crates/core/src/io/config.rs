use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, Dtype};
use crate::datasets::FloodDataConfig;
use crate::error::{Error, Result};
use crate::gradcheck::GradcheckConfig;
use crate::net::ModelConfig;
use crate::solvers::{NsConfig, SweConfig};
use crate::training::TrainConfig;

/// Dataset size, storage and the train / valid / test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Trajectories written by the generator commands.
    pub trajectories: usize,
    pub dtype: Dtype,
    pub valid_fraction: f64,
    pub test_fraction: f64,
    /// First slice of evaluation rollouts.
    pub eval_start: usize,
    /// Evaluation rollout length; the remaining horizon when absent.
    pub eval_steps: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { trajectories: 100, dtype: Dtype::F32, valid_fraction: 0.1, test_fraction: 0.1, eval_start: 0, eval_steps: None }
    }
}

/// Contiguous index ranges: train first, then validation, then test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Range<usize>,
    pub valid: Range<usize>,
    pub test: Range<usize>,
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |f: f64| (0.0..1.0).contains(&f);
        if !frac(self.valid_fraction) || !frac(self.test_fraction) || self.valid_fraction + self.test_fraction >= 1.0 {
            return Err(Error::Config("data: valid_fraction and test_fraction must lie in [0, 1) and sum below 1".into()));
        }
        if self.trajectories == 0 {
            return Err(Error::Config("data.trajectories must be positive".into()));
        }
        if self.eval_steps == Some(0) {
            return Err(Error::Config("data.eval_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn split(&self, n: usize) -> Result<Split> {
        let n_test = (n as f64 * self.test_fraction).round() as usize;
        let n_valid = (n as f64 * self.valid_fraction).round() as usize;
        if n_test + n_valid >= n {
            return Err(Error::Data(format!("{n} trajectories leave nothing to train on after the split")));
        }
        let t = n - n_test - n_valid;
        Ok(Split { train: 0..t, valid: t..t + n_valid, test: t + n_valid..n })
    }
}

/// Everything a command needs, one TOML table per concern. Unknown keys
/// anywhere are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub ns: NsConfig,
    pub swe: SweConfig,
    pub flood: FloodDataConfig,
    pub gradcheck: GradcheckConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let raw = read_file(path)?;
        let text = String::from_utf8(raw).map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        RunConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Checks the model, training and data tables. Solver tables are checked
    /// by the command that uses them.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.train.epochs == 0 {
            return Err(Error::Config("train.epochs must be at least 1".into()));
        }
        self.data.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}
