use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MetadataClass;
use crate::error::{Error, Result};

/// Smallest admissible inter-arrival time: one second, in hours.
pub const MIN_TAU_HOURS: f64 = 1.0 / 3600.0;

/// One event as seen by the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Inter-arrival time in hours, > 0.
    pub tau: f64,
    pub sender: usize,
    pub recipient_set: usize,
    pub metadata: MetadataClass,
}

/// An event with its absolute time, before inter-arrival times are known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub timestamp: i64,
    pub sender: usize,
    pub recipient_set: usize,
    pub metadata: MetadataClass,
}

/// Inter-arrival times in hours. The first gap is measured from `origin`; zero
/// gaps are clamped to one second.
pub fn inter_event_times(timestamps: &[i64], origin: i64) -> Result<Vec<f64>> {
    let mut prev = origin;
    let mut out = Vec::with_capacity(timestamps.len());
    for (i, &t) in timestamps.iter().enumerate() {
        if t < prev {
            return Err(Error::DecreasingTimestamps { index: i, prev, next: t });
        }
        out.push(((t - prev) as f64 / 3600.0).max(MIN_TAU_HOURS));
        prev = t;
    }
    Ok(out)
}

/// Standardization of `log τ`, fitted on the training split only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean_log_tau: f64,
    pub std_log_tau: f64,
}

impl NormStats {
    pub const IDENTITY: NormStats = NormStats { mean_log_tau: 0.0, std_log_tau: 1.0 };

    /// Fits on positive taus. A degenerate (constant) sample gets unit scale.
    pub fn fit(taus: impl IntoIterator<Item = f64>) -> Result<Self> {
        let logs: Vec<f64> = taus.into_iter().map(f64::ln).collect();
        if logs.is_empty() {
            return Err(Error::Data("cannot fit normalization on zero events".into()));
        }
        if logs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("non-positive inter-arrival time in training split".into()));
        }
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        Ok(Self { mean_log_tau: mean, std_log_tau: if std > 1e-9 { std } else { 1.0 } })
    }

    #[inline]
    pub fn normalize(&self, tau: f64) -> f64 {
        (tau.ln() - self.mean_log_tau) / self.std_log_tau
    }

    #[inline]
    pub fn denormalize(&self, y: f64) -> f64 {
        (self.std_log_tau * y + self.mean_log_tau).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    #[default]
    Random,
    Chronological,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub seq_len_days: u32,
    pub fractions: [f64; 3],
    pub seed: u64,
    pub mode: SplitMode,
    /// Drop windows with fewer events than this.
    pub min_events_per_window: Option<usize>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { seq_len_days: 7, fractions: [0.6, 0.2, 0.2], seed: 0, mode: SplitMode::Random, min_events_per_window: None }
    }
}

/// A contiguous time window of events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub start: i64,
    /// Index of the window's first event in the full filtered stream.
    pub first_index: usize,
    pub timestamps: Vec<i64>,
    pub events: Vec<Event>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Vec<Sequence>,
    pub dev: Vec<Sequence>,
    pub test: Vec<Sequence>,
    /// Window count dropped by the low-activity filter.
    pub windows_dropped: usize,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[Sequence] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }
}

/// Split sizes: train and dev rounded to nearest, test takes the rest.
pub fn split_counts(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let train = (fractions[0] * n as f64).round() as usize;
    let dev = ((fractions[1] * n as f64).round() as usize).min(n - train.min(n));
    let train = train.min(n);
    [train, dev, n - train - dev]
}

/// Cuts the stream into `seq_len_days` windows anchored at the UTC midnight before
/// the first event, discards empty windows, and assigns windows to train/dev/test
/// by a seeded permutation (or in time order).
pub fn split_sequences(records: &[EventRecord], cfg: &SplitConfig) -> Result<Splits> {
    let total: f64 = cfg.fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 || cfg.fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
        return Err(Error::Config(format!("split fractions {:?} must be in [0,1] and sum to 1", cfg.fractions)));
    }
    if cfg.seq_len_days == 0 {
        return Err(Error::Config("seq_len_days must be ≥ 1".into()));
    }
    let Some(first) = records.first() else {
        return Err(Error::Data("no events to split".into()));
    };
    let span = i64::from(cfg.seq_len_days) * 86_400;
    let origin = first.timestamp - first.timestamp.rem_euclid(86_400);

    let mut windows: Vec<(i64, usize, Vec<EventRecord>)> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if i > 0 && r.timestamp < records[i - 1].timestamp {
            return Err(Error::DecreasingTimestamps { index: i, prev: records[i - 1].timestamp, next: r.timestamp });
        }
        let start = origin + (r.timestamp - origin).div_euclid(span) * span;
        match windows.last_mut() {
            Some((s, _, evs)) if *s == start => evs.push(*r),
            _ => windows.push((start, i, vec![*r])),
        }
    }
    let before = windows.len();
    if let Some(min) = cfg.min_events_per_window {
        windows.retain(|(_, _, w)| w.len() >= min);
    }
    let windows_dropped = before - windows.len();
    if windows.len() < 5 {
        return Err(Error::Data(format!("need at least 5 sequences to split, found {}", windows.len())));
    }

    let mut sequences = windows
        .into_iter()
        .map(|(start, first_index, recs)| {
            let timestamps: Vec<i64> = recs.iter().map(|r| r.timestamp).collect();
            let taus = inter_event_times(&timestamps, start)?;
            let events = recs
                .iter()
                .zip(taus)
                .map(|(r, tau)| Event { tau, sender: r.sender, recipient_set: r.recipient_set, metadata: r.metadata })
                .collect();
            Ok(Sequence { start, first_index, timestamps, events })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = sequences.len();
    let mut order: Vec<usize> = (0..n).collect();
    if cfg.mode == SplitMode::Random {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    }
    let [n_train, n_dev, _] = split_counts(n, cfg.fractions);
    let mut slots: Vec<Option<Sequence>> = sequences.drain(..).map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<Sequence> {
        let mut v: Vec<usize> = idx.to_vec();
        v.sort_unstable();
        v.into_iter().map(|i| slots[i].take().unwrap()).collect()
    };
    let train = take(&order[..n_train]);
    let dev = take(&order[n_train..n_train + n_dev]);
    let test = take(&order[n_train + n_dev..]);
    Ok(Splits { train, dev, test, windows_dropped })
}
