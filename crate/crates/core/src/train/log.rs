use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ValidationMetrics;
use crate::error::{Error, Result};

/// One row of the training log. Epoch 0 of a stage is the evaluation before any
/// update, so its train columns are NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: u8,
    pub epoch: usize,
    pub train_tau_nll: f64,
    pub train_sender_nll: f64,
    pub train_recipient_nll: f64,
    pub train_total_nll: f64,
    pub dev_tau_nll: f64,
    pub dev_sender_nll: f64,
    pub dev_recipient_nll: f64,
    pub dev_total_nll: f64,
    pub dev_time_rmse: f64,
    pub dev_time_mae: f64,
    pub dev_sender_top1: f64,
    pub dev_sender_top3: f64,
    pub dev_recipient_top1: f64,
    pub dev_recipient_top3: f64,
    /// Value of the stage's selection criterion on dev.
    pub criterion: f64,
    pub best: bool,
}

impl EpochRecord {
    pub fn dev(&self) -> ValidationMetrics {
        ValidationMetrics {
            events: 0,
            tau_nll: self.dev_tau_nll,
            sender_nll: self.dev_sender_nll,
            recipient_nll: self.dev_recipient_nll,
            total_nll: self.dev_total_nll,
            time_rmse: self.dev_time_rmse,
            time_mae: self.dev_time_mae,
            sender_top1: self.dev_sender_top1,
            sender_top3: self.dev_sender_top3,
            recipient_top1: self.dev_recipient_top1,
            recipient_top3: self.dev_recipient_top3,
        }
    }
}

/// Append-only epoch history.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn push(&mut self, r: EpochRecord) {
        self.records.push(r);
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn stage(&self, stage: u8) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter(move |r| r.stage == stage)
    }

    /// Smallest criterion logged for a stage.
    pub fn stage_min(&self, stage: u8) -> Option<f64> {
        self.stage(stage).map(|r| r.criterion).reduce(f64::min)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let records = r
            .deserialize()
            .collect::<std::result::Result<Vec<EpochRecord>, _>>()
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Ok(Self { records })
    }
}
