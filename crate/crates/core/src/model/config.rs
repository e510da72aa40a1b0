use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recipient head variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipientMode {
    /// Softmax over the recipient-set vocabulary.
    #[default]
    MultiClass,
    /// Independent per-node Bernoulli inclusion (binary-relevance baseline).
    BinaryPerNode,
}

impl fmt::Display for RecipientMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecipientMode::MultiClass => "multi_class",
            RecipientMode::BinaryPerNode => "binary_per_node",
        })
    }
}

impl FromStr for RecipientMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multi_class" | "multiclass" | "net" => Ok(RecipientMode::MultiClass),
            "binary_per_node" | "bc" => Ok(RecipientMode::BinaryPerNode),
            other => Err(format!("unknown recipient mode `{other}`")),
        }
    }
}

/// Architecture hyperparameters. The vocabulary sizes are filled in from data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub n_nodes: usize,
    pub n_recipient_sets: usize,
    /// Mixture components K.
    pub components: usize,
    pub d_embed: usize,
    pub d_hidden: usize,
    /// Width of the sender head's hidden layer.
    pub d_sender_hidden: usize,
    pub recipient_mode: RecipientMode,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_nodes: 0,
            n_recipient_sets: 0,
            components: 16,
            d_embed: 32,
            d_hidden: 64,
            d_sender_hidden: 64,
            recipient_mode: RecipientMode::MultiClass,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.n_nodes >= 1, "n_nodes ≥ 1"),
            (self.n_recipient_sets >= 1, "n_recipient_sets ≥ 1"),
            (self.components >= 1, "components ≥ 1"),
            (self.d_embed >= 1, "d_embed ≥ 1"),
            (self.d_hidden >= 1, "d_hidden ≥ 1"),
            (self.d_sender_hidden >= 1, "d_sender_hidden ≥ 1"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::Config(format!("model config requires {what}")));
            }
        }
        Ok(())
    }

    /// Output width of the recipient head.
    pub fn recipient_outputs(&self) -> usize {
        match self.recipient_mode {
            RecipientMode::MultiClass => self.n_recipient_sets,
            RecipientMode::BinaryPerNode => self.n_nodes,
        }
    }

    /// Encoder input: normalized log τ plus sender, recipient-set and metadata embeddings.
    pub fn encoder_input(&self) -> usize {
        1 + 3 * self.d_embed
    }
}
