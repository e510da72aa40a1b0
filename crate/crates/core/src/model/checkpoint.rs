//! Checkpoint container: a versioned JSON document holding the model config,
//! vocabularies, normalization statistics and every weight array with its shape.
//!
//! ```json
//! { "format": "dmn-checkpoint", "version": 1,
//!   "config": { ... }, "vocab": { ... }, "vocab_fingerprint": "<sha256 hex>",
//!   "norm": { "mean_log_tau": .., "std_log_tau": .. }, "tz_offset_minutes": 0,
//!   "params": [ { "name": "gru.w_input", "group": "encoder", "shape": [r, c], "data": [..] } ] }
//! ```
//!
//! Weights are stored as `f64` and round-trip bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LogNormMixNet, ModelConfig};
use crate::data::{NormStats, Vocabularies};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CHECKPOINT_FORMAT: &str = "dmn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredParam {
    pub name: String,
    pub group: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub vocab: Vocabularies,
    pub vocab_fingerprint: String,
    pub norm: NormStats,
    pub tz_offset_minutes: i32,
    /// Per sender, the recipient set it used most in training.
    #[serde(default)]
    pub sender_modes: Vec<usize>,
    pub params: Vec<StoredParam>,
}

impl Checkpoint {
    pub fn from_model<T: Real>(model: &LogNormMixNet<T>, vocab: &Vocabularies, norm: &NormStats, tz_offset_minutes: i32) -> Self {
        let store = model.params();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: model.config().clone(),
            vocab: vocab.clone(),
            vocab_fingerprint: vocab.fingerprint(),
            norm: *norm,
            tz_offset_minutes,
            sender_modes: Vec::new(),
            params: store
                .params()
                .map(|(id, p)| StoredParam {
                    name: p.name.clone(),
                    group: store.group_name(id).to_string(),
                    shape: [p.value.rows(), p.value.cols()],
                    data: p.value.data().iter().map(|x| x.to_f64_lossy()).collect(),
                })
                .collect(),
        }
    }

    pub fn with_sender_modes(mut self, modes: Vec<usize>) -> Self {
        self.sender_modes = modes;
        self
    }

    /// Rebuilds the model, checking every name, group and shape against the config.
    pub fn to_model<T: Real>(&self) -> Result<LogNormMixNet<T>> {
        let members = (0..self.vocab.n_sets()).map(|i| self.vocab.members(i).to_vec()).collect();
        let mut model = LogNormMixNet::<T>::zeros(self.config.clone(), members)?;
        let ids: Vec<_> = model.params().params().map(|(id, _)| id).collect();
        if ids.len() != self.params.len() {
            return Err(Error::Mismatch(format!("expected {} weight arrays, found {}", ids.len(), self.params.len())));
        }
        for (id, stored) in ids.into_iter().zip(&self.params) {
            let store = model.params_mut();
            let (name, group) = (store.param(id).name.clone(), store.group_name(id).to_string());
            let shape = store.value(id).shape();
            if stored.name != name || stored.group != group || stored.shape != [shape.0, shape.1] {
                return Err(Error::Mismatch(format!(
                    "weight `{}` ({}, {:?}) does not match `{name}` ({group}, {shape:?})",
                    stored.name, stored.group, stored.shape
                )));
            }
            if stored.data.len() != shape.0 * shape.1 {
                return Err(Error::Mismatch(format!("weight `{name}` has {} values", stored.data.len())));
            }
            for (d, &s) in store.value_mut(id).data_mut().iter_mut().zip(&stored.data) {
                *d = T::of(s);
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut ck: Checkpoint = serde_json::from_slice(&bytes)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Mismatch(format!("{}: not a checkpoint (format `{}`)", path.display(), ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Mismatch(format!("{}: unsupported checkpoint version {}", path.display(), ck.version)));
        }
        ck.vocab.reindex()?;
        if ck.vocab.fingerprint() != ck.vocab_fingerprint {
            return Err(Error::Mismatch(format!("{}: vocabulary fingerprint mismatch", path.display())));
        }
        Ok(ck)
    }
}
