mod keywords;
mod ngram;
mod provider;
pub mod resources;
mod similarity;
mod tokenize;

pub use keywords::{extract_keywords, KeywordMode, KeywordProfile};
pub use ngram::{render_body, render_subject, NgramModel, BODY_CANDIDATES, SMOOTHING, SUBJECT_CANDIDATES};
pub use provider::{BuiltinProvider, GenRequest, RemoteProvider, TextKind, TextProvider, DEFAULT_TIMEOUT};
pub use resources::CannedText;
pub use similarity::coherence_similarity;
pub use tokenize::{content_tokens, sentences, tokenize};
