use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const GREETINGS: &str = include_str!("../../resources/greetings.txt");
pub const SALUTATIONS: &str = include_str!("../../resources/salutations.txt");
pub const FORWARDS: &str = include_str!("../../resources/forwards.txt");
pub const STOPWORDS: &str = include_str!("../../resources/stopwords.txt");
/// Themed business prose, one sentence per line, blank line between themes.
pub const CORPUS: &str = include_str!("../../resources/corpus.txt");

pub fn lines(s: &str) -> Vec<String> {
    s.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
}

pub fn stopwords() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| lines(STOPWORDS).into_iter().map(|w| w.to_lowercase()).collect())
}

pub fn is_stopword(w: &str) -> bool {
    stopwords().contains(w)
}

/// Built-in corpus split into its themed paragraphs.
pub fn corpus_themes() -> Vec<String> {
    CORPUS.split("\n\n").map(str::trim).filter(|p| !p.is_empty()).map(String::from).collect()
}

/// Canned greeting, salutation and forward lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CannedText {
    pub greetings: Vec<String>,
    pub salutations: Vec<String>,
    pub forwards: Vec<String>,
}

impl Default for CannedText {
    fn default() -> Self {
        Self { greetings: lines(GREETINGS), salutations: lines(SALUTATIONS), forwards: lines(FORWARDS) }
    }
}

impl CannedText {
    /// Loads `greetings.txt`, `salutations.txt` and `forwards.txt` from `dir`,
    /// keeping the built-in list for any file that is absent.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut c = Self::default();
        for (name, slot) in [
            ("greetings.txt", &mut c.greetings),
            ("salutations.txt", &mut c.salutations),
            ("forwards.txt", &mut c.forwards),
        ] {
            let p = dir.join(name);
            if p.exists() {
                let s = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                let l = lines(&s);
                if l.is_empty() {
                    return Err(Error::Config(format!("{} has no entries", p.display())));
                }
                *slot = l;
            }
        }
        Ok(c)
    }
}
