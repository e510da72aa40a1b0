//! Neural temporal point process model of email traffic: a GRU-encoded event
//! history drives a lognormal-mixture inter-arrival density plus sender and
//! recipient-set heads. The crate covers ingestion, reverse-mode training,
//! sampling, threading into full emails, and realism evaluation.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod model;
pub mod sampling;
pub mod scalar;
pub mod text;
pub mod threads;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Real;

/// The model in double precision, as used for training and checkpoints.
pub type Net = model::LogNormMixNet<f64>;
/// Single-precision model for lighter inference.
pub type NetF32 = model::LogNormMixNet<f32>;
