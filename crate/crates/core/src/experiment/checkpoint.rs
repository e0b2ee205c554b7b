use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::ModelParams;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "skipsnn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained parameters plus the provenance needed to reuse them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// 1 after network training, 2 after controller training.
    pub stage: u8,
    pub seed: u64,
    pub config_hash: String,
    /// Penalty multiplier of stage 2; absent for stage 1.
    pub lambda: Option<f64>,
    /// Layer sizes including the input layer.
    pub sizes: Vec<usize>,
    pub params: ModelParams<f64>,
    /// Wall-clock time of the training stage that produced this checkpoint.
    #[serde(default)]
    pub train_seconds: Option<f64>,
}

impl Checkpoint {
    pub fn new(stage: u8, seed: u64, config_hash: &str, lambda: Option<f64>, params: ModelParams<f64>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            stage,
            seed,
            config_hash: config_hash.into(),
            lambda,
            sizes: params.sizes(),
            params,
            train_seconds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidArgument(format!("not a checkpoint (format `{}`)", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        if !matches!(self.stage, 1 | 2) {
            return Err(Error::InvalidArgument(format!("bad stage {}", self.stage)));
        }
        self.params.validate()?;
        if self.params.sizes() != self.sizes {
            return Err(Error::Shape(format!(
                "checkpoint header says {:?}, weights are {:?}",
                self.sizes,
                self.params.sizes()
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ck: Self = serde_json::from_str(&text)?;
        ck.validate()?;
        Ok(ck)
    }

    pub fn with_train_seconds(mut self, secs: f64) -> Self {
        self.train_seconds = Some(secs);
        self
    }

    /// Whether this checkpoint was produced by the given run.
    pub fn matches(&self, stage: u8, seed: u64, config_hash: &str, lambda: Option<f64>) -> bool {
        self.stage == stage && self.seed == seed && self.config_hash == config_hash && self.lambda == lambda
    }
}
