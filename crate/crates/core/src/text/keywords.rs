use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::tokenize::content_tokens;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordMode {
    #[default]
    TfIdf,
    Frequency,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeywordProfile {
    pub sender: usize,
    /// Descending score, ties by word.
    pub words: Vec<(String, f64)>,
}

impl KeywordProfile {
    pub fn top(&self) -> Option<&str> {
        self.words.first().map(|w| w.0.as_str())
    }
}

fn ranked(scores: BTreeMap<&str, f64>) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = scores.into_iter().map(|(w, s)| (w.to_string(), s)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Top-`k` keywords per sender. Each sender's texts form one document; TF is
/// the term's share of the document, IDF is `ln((1 + N) / (1 + df)) + 1`.
/// Profiles shorter than `k` are padded with the corpus-wide most frequent
/// words at score 0.
pub fn extract_keywords(corpus: &BTreeMap<usize, Vec<String>>, k: usize, mode: KeywordMode) -> Result<Vec<KeywordProfile>> {
    let docs: Vec<(usize, Vec<String>)> = corpus
        .iter()
        .map(|(&s, texts)| (s, texts.iter().flat_map(|t| content_tokens(t)).collect()))
        .collect();
    if docs.iter().all(|d| d.1.is_empty()) {
        return Err(Error::Data("keyword corpus has no content words".into()));
    }
    let n = docs.len() as f64;
    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    let mut global: BTreeMap<&str, f64> = BTreeMap::new();
    for (_, toks) in &docs {
        for w in toks.iter().map(String::as_str).collect::<BTreeSet<_>>() {
            *df.entry(w).or_default() += 1.0;
        }
        for w in toks {
            *global.entry(w.as_str()).or_default() += 1.0;
        }
    }
    let fallback = ranked(global);
    Ok(docs
        .iter()
        .map(|(sender, toks)| {
            let mut tf: BTreeMap<&str, f64> = BTreeMap::new();
            for w in toks {
                *tf.entry(w.as_str()).or_default() += 1.0;
            }
            let len = toks.len().max(1) as f64;
            for (w, v) in tf.iter_mut() {
                *v /= len;
                if mode == KeywordMode::TfIdf {
                    *v *= ((1.0 + n) / (1.0 + df[w])).ln() + 1.0;
                }
            }
            let mut words = ranked(tf);
            words.truncate(k);
            for (w, _) in &fallback {
                if words.len() >= k {
                    break;
                }
                if !words.iter().any(|x| &x.0 == w) {
                    words.push((w.clone(), 0.0));
                }
            }
            KeywordProfile { sender: *sender, words }
        })
        .collect())
}
