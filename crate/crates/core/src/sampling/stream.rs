use std::collections::HashMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::draw::{sample_categorical, sample_node_subset, sample_tau, RecipientDraw, MAX_EMPTY_RESAMPLES};
use crate::data::{derive_metadata_class, Event, MetadataClass, NormStats, Vocabularies};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, HistoryState, LogNormMixNet, RecipientMode};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMode {
    #[default]
    Batch,
    Realtime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Horizon {
    Events(usize),
    /// Last admissible timestamp, epoch seconds.
    Until(i64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub seed: u64,
    /// Epoch seconds of the stream origin.
    pub start_time: i64,
    pub events: Option<usize>,
    pub end_time: Option<i64>,
    pub mode: GenMode,
    /// Overrides the checkpoint's offset when set.
    pub tz_offset_minutes: Option<i32>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self { seed: 0, start_time: 0, events: Some(1000), end_time: None, mode: GenMode::Batch, tz_offset_minutes: None }
    }
}

impl GenConfig {
    pub fn horizon(&self) -> Result<Horizon> {
        match (self.events, self.end_time) {
            (Some(n), None) => Ok(Horizon::Events(n)),
            (None, Some(t)) if t >= self.start_time => Ok(Horizon::Until(t)),
            (None, Some(t)) => Err(Error::Config(format!("end_time {t} precedes start_time {}", self.start_time))),
            _ => Err(Error::Config("exactly one of `events` and `end_time` must be set".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledEvent {
    pub timestamp: i64,
    /// Realized gap in hours.
    pub tau: f64,
    pub sender: usize,
    pub recipients: Vec<usize>,
    pub recipient_set: Option<usize>,
    pub metadata: MetadataClass,
}

impl SampledEvent {
    /// Model-side view; unseen sets map to the encoder's spare row.
    pub fn as_event(&self, unseen_set: usize) -> Event {
        Event {
            tau: self.tau,
            sender: self.sender,
            recipient_set: self.recipient_set.unwrap_or(unseen_set),
            metadata: self.metadata,
        }
    }
}

/// One line of a generated stream file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub ts: i64,
    pub tau_h: f64,
    pub sender: String,
    pub recipients: Vec<String>,
    pub meta: MetadataClass,
}

impl StreamRecord {
    pub fn from_event(ev: &SampledEvent, vocab: &Vocabularies) -> Self {
        Self {
            ts: ev.timestamp,
            tau_h: ev.tau,
            sender: vocab.nodes.label(ev.sender).to_string(),
            recipients: ev.recipients.iter().map(|&r| vocab.nodes.label(r).to_string()).collect(),
            meta: ev.metadata,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenStats {
    pub events: u64,
    pub empty_resamples: u64,
    pub forced_fallbacks: u64,
    pub unseen_sets: u64,
}

/// Everything needed to continue a stream: encoder state, clock and RNG.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamState<T> {
    pub history: HistoryState<T>,
    pub last_timestamp: i64,
    pub rng: ChaCha8Rng,
    pub stats: GenStats,
}

/// Autoregressive sampler over a shared read-only model.
#[derive(Clone, Debug)]
pub struct Generator<T> {
    model: Arc<LogNormMixNet<T>>,
    norm: NormStats,
    tz_offset_minutes: i32,
    sender_modes: Vec<usize>,
    set_ids: HashMap<Vec<usize>, usize>,
}

impl<T: Real> Generator<T> {
    pub fn new(model: Arc<LogNormMixNet<T>>, norm: NormStats, tz_offset_minutes: i32, sender_modes: Vec<usize>) -> Result<Self> {
        let cfg = model.config();
        if !sender_modes.is_empty() && sender_modes.len() != cfg.n_nodes {
            return Err(Error::Contract(format!("{} sender modes for {} nodes", sender_modes.len(), cfg.n_nodes)));
        }
        if let Some(&bad) = sender_modes.iter().find(|&&s| s >= cfg.n_recipient_sets) {
            return Err(Error::IdOutOfRange { kind: "recipient set", id: bad, size: cfg.n_recipient_sets });
        }
        let set_ids = model.arch().set_members().iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        Ok(Self { model, norm, tz_offset_minutes, sender_modes, set_ids })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Self::new(Arc::new(ck.to_model()?), ck.norm, ck.tz_offset_minutes, ck.sender_modes.clone())
    }

    pub fn model(&self) -> &LogNormMixNet<T> {
        &self.model
    }

    pub fn tz_offset_minutes(&self) -> i32 {
        self.tz_offset_minutes
    }

    pub fn with_tz_offset(mut self, minutes: i32) -> Self {
        self.tz_offset_minutes = minutes;
        self
    }

    /// Fresh stream at `start_time`. `trial` selects an independent RNG stream
    /// under the same seed.
    pub fn start(&self, seed: u64, trial: u64, start_time: i64) -> StreamState<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        StreamState { history: self.model.initial_state(), last_timestamp: start_time, rng, stats: GenStats::default() }
    }

    /// Feeds observed events through the encoder without sampling.
    pub fn prime(&self, state: &mut StreamState<T>, prefix: &[Event], last_timestamp: i64) -> Result<()> {
        for ev in prefix {
            state.history = self.model.encode_step(&state.history, ev, &self.norm)?;
        }
        state.last_timestamp = last_timestamp;
        Ok(())
    }

    fn meta(&self, ts: i64) -> MetadataClass {
        derive_metadata_class(ts, self.tz_offset_minutes)
    }

    fn fallback_set(&self, sender: usize) -> usize {
        self.sender_modes.get(sender).copied().unwrap_or(0)
    }

    /// Recipients for `sender` under the model's recipient head.
    pub fn sample_recipient_set(&self, history: &HistoryState<T>, sender: usize, rng: &mut ChaCha8Rng) -> Result<RecipientDraw> {
        let logits = self.model.recipient_logits(history, sender)?;
        let members = self.model.arch().set_members();
        match self.model.config().recipient_mode {
            RecipientMode::MultiClass => {
                let id = sample_categorical(&logits, rng);
                Ok(RecipientDraw { members: members[id].clone(), set_id: Some(id), empty_draws: 0, forced_fallback: false })
            }
            RecipientMode::BinaryPerNode => {
                let mut empty_draws = 0;
                while empty_draws < MAX_EMPTY_RESAMPLES {
                    let subset = sample_node_subset(&logits, sender, rng);
                    if !subset.is_empty() {
                        let set_id = self.set_ids.get(&subset).copied();
                        return Ok(RecipientDraw { members: subset, set_id, empty_draws, forced_fallback: false });
                    }
                    empty_draws += 1;
                }
                let id = self.fallback_set(sender);
                Ok(RecipientDraw { members: members[id].clone(), set_id: Some(id), empty_draws, forced_fallback: true })
            }
        }
    }

    /// Draws the next event and advances the state. The gap is drawn with the
    /// metadata of the tentative arrival `last + median`, where the median comes
    /// from the mixture under the metadata of the last timestamp.
    pub fn step(&self, state: &mut StreamState<T>) -> Result<SampledEvent> {
        let prev = state.last_timestamp;
        let provisional = self.model.temporal_head(&state.history, self.meta(prev))?;
        let median_secs = (provisional.median(&self.norm) * 3600.0).round().clamp(1.0, 1e12) as i64;
        let mix = self.model.temporal_head(&state.history, self.meta(prev.saturating_add(median_secs)))?;
        let tau = sample_tau(&mix, &self.norm, &mut state.rng);
        let gap = (tau * 3600.0).round().clamp(1.0, 1e12) as i64;
        let timestamp = prev.saturating_add(gap);
        let sender_logits = self.model.sender_logits(&state.history)?;
        let sender = sample_categorical(&sender_logits, &mut state.rng);
        let draw = self.sample_recipient_set(&state.history, sender, &mut state.rng)?;
        state.stats.empty_resamples += u64::from(draw.empty_draws);
        state.stats.forced_fallbacks += u64::from(draw.forced_fallback);
        state.stats.unseen_sets += u64::from(draw.set_id.is_none());
        state.stats.events += 1;
        let ev = SampledEvent {
            timestamp,
            tau: gap as f64 / 3600.0,
            sender,
            recipients: draw.members,
            recipient_set: draw.set_id,
            metadata: self.meta(timestamp),
        };
        state.history = self.model.encode_step(&state.history, &ev.as_event(self.model.arch().unseen_set_id()), &self.norm)?;
        state.last_timestamp = timestamp;
        Ok(ev)
    }

    /// Batch generation up to the horizon.
    pub fn generate_stream(&self, state: &mut StreamState<T>, horizon: Horizon) -> Result<Vec<SampledEvent>> {
        let mut out = Vec::new();
        match horizon {
            Horizon::Events(n) => {
                out.reserve(n);
                for _ in 0..n {
                    out.push(self.step(state)?);
                }
            }
            Horizon::Until(end) => loop {
                let mut probe = state.clone();
                let ev = self.step(&mut probe)?;
                if ev.timestamp > end {
                    break;
                }
                *state = probe;
                out.push(ev);
            },
        }
        Ok(out)
    }
}

/// Convenience wrapper: one trial from a config.
pub fn generate_stream<T: Real>(gen: &Generator<T>, cfg: &GenConfig, trial: u64) -> Result<(Vec<SampledEvent>, GenStats)> {
    let horizon = cfg.horizon()?;
    let gen = match cfg.tz_offset_minutes {
        Some(tz) => gen.clone().with_tz_offset(tz),
        None => gen.clone(),
    };
    let mut state = gen.start(cfg.seed, trial, cfg.start_time);
    let events = gen.generate_stream(&mut state, horizon)?;
    Ok((events, state.stats))
}
