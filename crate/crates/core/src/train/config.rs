use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point prediction used for time RMSE/MAE.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointEstimate {
    #[default]
    Median,
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    /// Sequences per optimizer step.
    pub batch: usize,
    /// Epoch budget of each stage.
    pub max_epochs: usize,
    pub patience: usize,
    /// An epoch counts as progress only if it beats the stage's reference by more than this.
    pub min_delta: f64,
    /// Epochs run before early stopping may fire.
    pub min_epochs: usize,
    pub stage3_enabled: bool,
    pub seed: u64,
    pub point: PointEstimate,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-3,
            batch: 8,
            max_epochs: 100,
            patience: 5,
            min_delta: 1e-3,
            min_epochs: 0,
            stage3_enabled: false,
            seed: 0,
            point: PointEstimate::Median,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be at least 1".into()));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::Config("min_delta must be non-negative".into()));
        }
        Ok(())
    }
}
