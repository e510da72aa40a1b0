use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RawEvent;
use crate::error::{Error, Result};

/// Participants of the network, ordered by descending sent count then label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeVocabulary {
    labels: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl NodeVocabulary {
    pub fn from_events(events: &[RawEvent]) -> Self {
        let mut sent: BTreeMap<&str, usize> = BTreeMap::new();
        for e in events {
            *sent.entry(&e.sender).or_default() += 1;
            for r in &e.recipients {
                sent.entry(r).or_default();
            }
        }
        let mut labels: Vec<(&str, usize)> = sent.into_iter().collect();
        labels.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Self::from_labels(labels.into_iter().map(|(l, _)| l.to_string()).collect())
    }

    pub fn from_labels(labels: Vec<String>) -> Self {
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Self { labels, index }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Distinct recipient-label sets seen in training, ids dense by descending frequency
/// (ties broken lexicographically).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipientVocabulary {
    sets: Vec<BTreeSet<String>>,
    counts: Vec<usize>,
    pub min_count: usize,
    pub dropped_event_count: usize,
    #[serde(skip)]
    index: HashMap<BTreeSet<String>, usize>,
}

impl RecipientVocabulary {
    fn rebuild_index(&mut self) {
        self.index = self.sets.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn id(&self, set: &BTreeSet<String>) -> Option<usize> {
        self.index.get(set).copied()
    }

    pub fn set(&self, id: usize) -> &BTreeSet<String> {
        &self.sets[id]
    }

    pub fn sets(&self) -> &[BTreeSet<String>] {
        &self.sets
    }

    /// Frequency of each set in the events the vocabulary was built from.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
}

/// Keeps recipient sets occurring at least `min_count` times; events addressed to
/// rarer sets are removed and counted.
pub fn build_recipient_vocab(events: &[RawEvent], min_count: usize) -> Result<(RecipientVocabulary, Vec<RawEvent>)> {
    if events.is_empty() {
        return Err(Error::VocabularyEmpty);
    }
    let mut freq: HashMap<&BTreeSet<String>, usize> = HashMap::new();
    for e in events {
        *freq.entry(&e.recipients).or_default() += 1;
    }
    let mut kept: Vec<(&BTreeSet<String>, usize)> = freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if kept.is_empty() {
        return Err(Error::VocabularyEmpty);
    }
    let mut vocab = RecipientVocabulary {
        sets: kept.iter().map(|(s, _)| (*s).clone()).collect(),
        counts: kept.iter().map(|&(_, c)| c).collect(),
        min_count,
        dropped_event_count: 0,
        index: HashMap::new(),
    };
    vocab.rebuild_index();
    let filtered: Vec<RawEvent> = events.iter().filter(|e| vocab.id(&e.recipients).is_some()).cloned().collect();
    vocab.dropped_event_count = events.len() - filtered.len();
    Ok((vocab, filtered))
}

/// Node and recipient-set vocabularies together, with each set's member node ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub nodes: NodeVocabulary,
    pub sets: RecipientVocabulary,
    #[serde(skip)]
    members: Vec<Vec<usize>>,
    #[serde(skip)]
    by_members: HashMap<Vec<usize>, usize>,
}

impl Vocabularies {
    pub fn new(nodes: NodeVocabulary, sets: RecipientVocabulary) -> Result<Self> {
        let mut v = Self { nodes, sets, members: Vec::new(), by_members: HashMap::new() };
        v.reindex()?;
        Ok(v)
    }

    /// Restores lookup tables after deserialization.
    pub fn reindex(&mut self) -> Result<()> {
        self.nodes = NodeVocabulary::from_labels(std::mem::take(&mut self.nodes.labels));
        self.sets.rebuild_index();
        self.members = self
            .sets
            .sets
            .iter()
            .map(|s| {
                let mut ids = s
                    .iter()
                    .map(|l| {
                        self.nodes.id(l).ok_or_else(|| Error::Data(format!("recipient `{l}` missing from node vocabulary")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ids.sort_unstable();
                Ok(ids)
            })
            .collect::<Result<_>>()?;
        self.by_members = self.members.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_sets(&self) -> usize {
        self.sets.len()
    }

    /// Sorted member node ids of a recipient set.
    pub fn members(&self, set_id: usize) -> &[usize] {
        &self.members[set_id]
    }

    /// Vocabulary id of a node subset, if that exact set was seen in training.
    pub fn set_id_of_members(&self, nodes: &[usize]) -> Option<usize> {
        let mut key = nodes.to_vec();
        key.sort_unstable();
        key.dedup();
        self.by_members.get(&key).copied()
    }

    /// Stable digest used to detect checkpoint/data mismatches.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for l in self.nodes.labels() {
            h.update(l.as_bytes());
            h.update([0u8]);
        }
        h.update([1u8]);
        for s in self.sets.sets() {
            for l in s {
                h.update(l.as_bytes());
                h.update([0u8]);
            }
            h.update([2u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
