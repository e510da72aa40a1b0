use super::resources::is_stopword;

/// Lowercase word tokens: runs of alphanumerics, inner apostrophes kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|w| w.trim_matches('\'').to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Tokens minus stopwords and bare numbers.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|w| !is_stopword(w) && !w.chars().all(|c| c.is_ascii_digit()))
        .collect()
}

/// Sentences as token lists, split on `.`, `!`, `?` and newlines.
pub fn sentences(text: &str) -> Vec<Vec<String>> {
    text.split(['.', '!', '?', '\n']).map(tokenize).filter(|s| !s.is_empty()).collect()
}
