use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CommType, ThreadConfig};
use crate::data::{RawEvent, Vocabularies};
use crate::error::{Error, Result};
use crate::text::{extract_keywords, resources::corpus_themes};

/// Static per-sender inputs of the thread engine, derived from training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SenderProfile {
    pub sender: usize,
    /// Training fractions of (new thread, reply, fwd).
    pub proportions: [f64; 3],
    pub keywords: Vec<String>,
    /// Whether `proportions` were measured rather than defaulted.
    pub measured: bool,
}

impl SenderProfile {
    pub fn fraction(&self, t: CommType) -> f64 {
        self.proportions[t.index()]
    }
}

/// Type of a training email from its subject prefix.
pub fn comm_type_of_subject(subject: &str) -> CommType {
    let s = subject.trim_start().to_ascii_lowercase();
    if s.starts_with("re:") {
        CommType::Reply
    } else if s.starts_with("fw:") || s.starts_with("fwd:") {
        CommType::Fwd
    } else {
        CommType::NewThread
    }
}

/// Profiles for every node. Type fractions come from subject prefixes when the
/// sender's training emails carry subjects, otherwise from the configured
/// defaults. Keywords come from the sender's own subjects and bodies; senders
/// without text get the keywords of one bundled corpus theme, chosen by id.
pub fn build_profiles(train: &[&RawEvent], vocab: &Vocabularies, cfg: &ThreadConfig) -> Result<Vec<SenderProfile>> {
    cfg.validate()?;
    let n = vocab.n_nodes();
    let mut counts = vec![[0usize; 3]; n];
    let mut texts: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for e in train {
        let s = vocab.nodes.id(&e.sender).ok_or_else(|| Error::Data(format!("unknown sender {}", e.sender)))?;
        if let Some(subj) = &e.subject {
            counts[s][comm_type_of_subject(subj).index()] += 1;
        }
        let text: Vec<&str> = [e.subject.as_deref(), e.body.as_deref()].into_iter().flatten().collect();
        if !text.is_empty() {
            texts.entry(s).or_default().push(text.join("\n"));
        }
    }
    let own = if texts.is_empty() { Vec::new() } else { extract_keywords(&texts, cfg.keywords, cfg.keyword_mode)? };
    let own: BTreeMap<usize, Vec<String>> = own
        .into_iter()
        .filter(|p| p.words.iter().any(|w| w.1 > 0.0))
        .map(|p| (p.sender, p.words.into_iter().map(|w| w.0).collect()))
        .collect();
    let themes: BTreeMap<usize, Vec<String>> = corpus_themes().into_iter().map(|t| vec![t]).enumerate().collect();
    let themed = extract_keywords(&themes, cfg.keywords, cfg.keyword_mode)?;
    Ok((0..n)
        .map(|s| {
            let c = counts[s];
            let total: usize = c.iter().sum();
            let (proportions, measured) = if total > 0 {
                (c.map(|x| x as f64 / total as f64), true)
            } else {
                (cfg.default_proportions, false)
            };
            let keywords = own
                .get(&s)
                .cloned()
                .unwrap_or_else(|| themed[s % themed.len()].words.iter().map(|w| w.0.clone()).collect());
            SenderProfile { sender: s, proportions, keywords, measured }
        })
        .collect())
}
