use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::resources::is_stopword;
use super::tokenize::{sentences, tokenize};

const BOS: u32 = 0;
const EOS: u32 = 1;
/// Pseudo-count added to every observed continuation.
pub const SMOOTHING: f64 = 0.1;
/// Continuations compared when picking a subject.
pub const SUBJECT_CANDIDATES: usize = 4;
/// Sentence draws compared when picking each body sentence.
pub const BODY_CANDIDATES: usize = 16;

type Counts = BTreeMap<u32, u32>;

/// Order-3 word model with backoff to bigrams and unigrams.
#[derive(Clone, Debug, Default)]
pub struct NgramModel {
    words: Vec<String>,
    index: HashMap<String, u32>,
    tri: HashMap<(u32, u32), Counts>,
    bi: HashMap<u32, Counts>,
    uni: Counts,
}

impl NgramModel {
    pub fn train<S: AsRef<str>>(texts: &[S]) -> Self {
        let mut m = Self {
            words: vec!["<s>".into(), "</s>".into()],
            ..Self::default()
        };
        for t in texts {
            for s in sentences(t.as_ref()) {
                let ids: Vec<u32> = s.iter().map(|w| m.intern(w)).collect();
                let mut padded = vec![BOS, BOS];
                padded.extend(&ids);
                padded.push(EOS);
                for w in padded.windows(3) {
                    *m.tri.entry((w[0], w[1])).or_default().entry(w[2]).or_default() += 1;
                    *m.bi.entry(w[1]).or_default().entry(w[2]).or_default() += 1;
                    *m.uni.entry(w[2]).or_default() += 1;
                }
            }
        }
        m
    }

    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&i) = self.index.get(w) {
            return i;
        }
        let i = self.words.len() as u32;
        self.words.push(w.to_string());
        self.index.insert(w.to_string(), i);
        i
    }

    pub fn vocabulary_size(&self) -> usize {
        self.words.len() - 2
    }

    pub fn contains(&self, w: &str) -> bool {
        self.index.contains_key(w)
    }

    fn next(&self, ctx: (u32, u32), rng: &mut ChaCha8Rng) -> Option<u32> {
        let dist = self.tri.get(&ctx).or_else(|| self.bi.get(&ctx.1)).unwrap_or(&self.uni);
        draw(dist, rng)
    }

    fn unigram(&self, rng: &mut ChaCha8Rng) -> Option<u32> {
        let no_end: Counts = self.uni.iter().filter(|(&w, _)| w != EOS).map(|(&w, &c)| (w, c)).collect();
        draw(&no_end, rng)
    }

    /// Continues `prefix` until a sentence end or `limit` total words. Unknown
    /// trailing words make the first draw come from the unigram table.
    fn continue_sentence(&self, prefix: &[String], limit: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
        let mut out: Vec<String> = prefix.iter().take(limit).cloned().collect();
        let id = |w: &String| self.index.get(w).copied();
        let mut ctx = match prefix {
            [] => (BOS, BOS),
            [.., a, b] if id(b).is_some() => (id(a).unwrap_or(BOS), id(b).unwrap()),
            [b] if id(b).is_some() => (BOS, id(b).unwrap()),
            _ => match self.unigram(rng) {
                Some(w) if out.len() < limit => {
                    out.push(self.words[w as usize].clone());
                    (BOS, w)
                }
                _ => return out,
            },
        };
        while out.len() < limit {
            match self.next(ctx, rng) {
                Some(w) if w != EOS => {
                    out.push(self.words[w as usize].clone());
                    ctx = (ctx.1, w);
                }
                _ => break,
            }
        }
        out
    }

    /// One sentence starting with the prompt's words: of [`SUBJECT_CANDIDATES`]
    /// continuations, the first with the most distinct content words.
    pub fn subject(&self, prompt: &str, max_tokens: usize, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prefix = tokenize(prompt);
        let mut best: Option<(usize, Vec<String>)> = None;
        for _ in 0..SUBJECT_CANDIDATES {
            let s = self.continue_sentence(&prefix, max_tokens, &mut rng);
            let score = s.iter().filter(|w| !is_stopword(w)).collect::<HashSet<_>>().len();
            if best.as_ref().map_or(true, |b| score > b.0) {
                best = Some((score, s));
            }
        }
        best.map(|b| b.1).unwrap_or_default()
    }

    /// Sentences until about `max_tokens` words. Each sentence is the candidate,
    /// out of [`BODY_CANDIDATES`] fresh draws, sharing the most distinct words
    /// with the prompt's content words.
    pub fn body(&self, prompt: &str, max_tokens: usize, seed: u64) -> Vec<Vec<String>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seeds: HashSet<String> = tokenize(prompt).into_iter().filter(|w| !is_stopword(w) && self.contains(w)).collect();
        let mut out: Vec<Vec<String>> = Vec::new();
        let mut used = 0;
        while used < max_tokens {
            let mut best: Option<(usize, Vec<String>)> = None;
            for _ in 0..BODY_CANDIDATES {
                let s = self.continue_sentence(&[], max_tokens - used, &mut rng);
                let score = s.iter().collect::<HashSet<_>>().into_iter().filter(|w| seeds.contains(*w)).count();
                if best.as_ref().map_or(true, |b| score > b.0) {
                    best = Some((score, s));
                }
                if seeds.is_empty() {
                    break;
                }
            }
            let Some((_, s)) = best.filter(|b| !b.1.is_empty()) else { break };
            used += s.len();
            out.push(s);
            if used * 2 >= max_tokens {
                break;
            }
        }
        out
    }
}

fn draw(dist: &Counts, rng: &mut ChaCha8Rng) -> Option<u32> {
    let total: f64 = dist.values().map(|&c| f64::from(c) + SMOOTHING).sum();
    if total <= 0.0 {
        return None;
    }
    let mut u = rng.gen::<f64>() * total;
    for (&w, &c) in dist {
        u -= f64::from(c) + SMOOTHING;
        if u < 0.0 {
            return Some(w);
        }
    }
    dist.keys().next_back().copied()
}

/// Capitalized words joined by spaces.
pub fn render_subject(words: &[String]) -> String {
    let mut s = words.join(" ");
    if let Some(c) = s.get(0..1) {
        s.replace_range(0..1, &c.to_uppercase());
    }
    s
}

pub fn render_body(sentences: &[Vec<String>]) -> String {
    sentences.iter().map(|s| format!("{}.", render_subject(s))).collect::<Vec<_>>().join(" ")
}
