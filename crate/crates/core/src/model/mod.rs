//! The temporal point process model and its checkpoint format.

mod checkpoint;
mod config;
mod mixture;
mod net;

pub use checkpoint::{Checkpoint, StoredParam, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{ModelConfig, RecipientMode};
pub use mixture::MixtureParams;
pub use net::{
    Arch, HistoryState, LogNormMixNet, MixtureVars, NllBreakdown, SequenceVars, StepOutput, StepVars, GROUPS,
    GROUP_ENCODER, GROUP_RECIPIENT, GROUP_SENDER, GROUP_TEMPORAL,
};

#[cfg(test)]
mod tests;
