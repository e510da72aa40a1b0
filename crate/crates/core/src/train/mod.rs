mod config;
mod log;
mod metrics;
mod staged;

pub use config::{PointEstimate, TrainConfig};
pub use log::{EpochRecord, TrainLog};
pub use metrics::{binary_rank, evaluate_validation, rank_of, ValidationMetrics};
pub use staged::{staged_train, train_stage, Stage, StageReport, TrainData, TrainFailure, Trained};

#[cfg(test)]
mod tests;
