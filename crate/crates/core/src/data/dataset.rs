use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    build_recipient_vocab, derive_metadata_class, parse_event_log, split_sequences, EventRecord, LogFormat,
    NodeVocabulary, NormStats, RawEvent, Sequence, Split, SplitConfig, SplitMode, Splits, Vocabularies,
};
use crate::error::{Error, Result};

/// Dataset recipe, read from a `key = value` TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub tz_offset_minutes: i32,
    pub min_count: usize,
    pub seq_len_days: u32,
    pub split_seed: u64,
    pub split_mode: SplitMode,
    pub fractions: [f64; 3],
    pub drop_low_activity: bool,
    pub low_activity_threshold: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            tz_offset_minutes: 0,
            min_count: 10,
            seq_len_days: 7,
            split_seed: 0,
            split_mode: SplitMode::Random,
            fractions: [0.6, 0.2, 0.2],
            drop_low_activity: false,
            low_activity_threshold: 80,
        }
    }
}

impl DatasetConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            seq_len_days: self.seq_len_days,
            fractions: self.fractions,
            seed: self.split_seed,
            mode: self.split_mode,
            min_events_per_window: self.drop_low_activity.then_some(self.low_activity_threshold),
        }
    }
}

/// An ingested log: vocabularies, windowed splits and training normalization.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub vocab: Vocabularies,
    /// Filtered raw events, sorted; `Sequence::first_index` points into this.
    pub raw: Vec<RawEvent>,
    pub splits: Splits,
    norm: NormStats,
    pub duplicates_dropped: usize,
    pub self_sends_dropped: usize,
}

impl Dataset {
    pub fn load(path: &Path, format: LogFormat, config: DatasetConfig) -> Result<Self> {
        let log = parse_event_log(path, format)?;
        let mut ds = Self::from_raw(log.events, config)?;
        ds.duplicates_dropped = log.duplicates_dropped;
        ds.self_sends_dropped = log.self_sends_dropped;
        Ok(ds)
    }

    pub fn from_raw(mut raw: Vec<RawEvent>, config: DatasetConfig) -> Result<Self> {
        raw.sort_by_key(|e| e.timestamp);
        let (sets, raw) = build_recipient_vocab(&raw, config.min_count)?;
        let nodes = NodeVocabulary::from_events(&raw);
        let vocab = Vocabularies::new(nodes, sets)?;
        let records: Vec<EventRecord> = raw
            .iter()
            .map(|e| EventRecord {
                timestamp: e.timestamp,
                sender: vocab.nodes.id(&e.sender).expect("sender indexed"),
                recipient_set: vocab.sets.id(&e.recipients).expect("set kept by filter"),
                metadata: derive_metadata_class(e.timestamp, config.tz_offset_minutes),
            })
            .collect();
        let splits = split_sequences(&records, &config.split_config())?;
        let norm = NormStats::fit(splits.train.iter().flat_map(|s| s.events.iter().map(|e| e.tau)))?;
        Ok(Self { config, vocab, raw, splits, norm, duplicates_dropped: 0, self_sends_dropped: 0 })
    }

    /// Normalization for any split; always the statistics fitted on train.
    pub fn norm_for(&self, _split: Split) -> &NormStats {
        &self.norm
    }

    pub fn norm(&self) -> &NormStats {
        &self.norm
    }

    pub fn split(&self, split: Split) -> &[Sequence] {
        self.splits.get(split)
    }

    /// Raw events belonging to one split, in time order.
    pub fn raw_events(&self, split: Split) -> Vec<&RawEvent> {
        self.split(split).iter().flat_map(|s| &self.raw[s.first_index..s.first_index + s.len()]).collect()
    }

    /// Most frequent training recipient set of each node as sender; nodes that
    /// never send fall back to the globally most frequent set, id 0.
    pub fn sender_mode_sets(&self) -> Vec<usize> {
        let mut counts = vec![vec![0usize; self.vocab.n_sets()]; self.vocab.n_nodes()];
        for s in self.split(Split::Train) {
            for e in &s.events {
                counts[e.sender][e.recipient_set] += 1;
            }
        }
        counts
            .iter()
            .map(|c| {
                let best = c.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)));
                match best {
                    Some((i, &n)) if n > 0 => i,
                    _ => 0,
                }
            })
            .collect()
    }

    pub fn event_count(&self, split: Split) -> usize {
        self.split(split).iter().map(Sequence::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_raw() -> Vec<RawEvent> {
        let mut out = Vec::new();
        for w in 0..10i64 {
            for k in 0..12i64 {
                let (s, r) = match k % 3 {
                    0 => ("a", vec!["b"]),
                    1 => ("b", vec!["a", "c"]),
                    _ => ("c", vec!["a"]),
                };
                out.push(RawEvent {
                    timestamp: 1_696_204_800 + w * 7 * 86_400 + k * 1800,
                    sender: s.into(),
                    recipients: r.into_iter().map(String::from).collect(),
                    subject: None,
                    body: None,
                });
            }
        }
        // one rare set, filtered at min_count = 2
        out.push(RawEvent {
            timestamp: 1_696_204_800 + 5,
            sender: "a".into(),
            recipients: ["z".to_string()].into(),
            subject: None,
            body: None,
        });
        out
    }

    #[test]
    fn build_pipeline() {
        let cfg = DatasetConfig { min_count: 2, ..Default::default() };
        let ds = Dataset::from_raw(toy_raw(), cfg).unwrap();
        assert_eq!(ds.vocab.sets.dropped_event_count, 1);
        assert_eq!(ds.vocab.n_sets(), 3);
        assert_eq!(ds.splits.train.len() + ds.splits.dev.len() + ds.splits.test.len(), 10);
        assert_eq!(ds.vocab.nodes.id("z"), None);
        for seq in ds.splits.train.iter().chain(&ds.splits.dev) {
            for e in &seq.events {
                assert!(e.tau > 0.0 && e.tau.is_finite());
                assert!(e.sender < ds.vocab.n_nodes());
                assert!(e.recipient_set < ds.vocab.n_sets());
            }
        }
        assert!(std::ptr::eq(ds.norm_for(Split::Train), ds.norm_for(Split::Dev)));
        assert!(std::ptr::eq(ds.norm_for(Split::Train), ds.norm_for(Split::Test)));
        let train_raw = ds.raw_events(Split::Train);
        assert_eq!(train_raw.len(), ds.event_count(Split::Train));
        let seq = &ds.splits.train[0];
        assert_eq!(train_raw[0].timestamp, seq.timestamps[0]);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let cfg = DatasetConfig::from_toml_str("tz_offset_minutes = 60\nmin_count = 3\n").unwrap();
        assert_eq!(cfg.tz_offset_minutes, 60);
        assert_eq!(cfg.seq_len_days, 7);
        assert!(DatasetConfig::from_toml_str("min_cnt = 3\n").is_err());
    }
}
