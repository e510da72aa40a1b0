use std::collections::BTreeMap;

use super::tokenize::content_tokens;

fn counts(text: &str) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    for w in content_tokens(text) {
        *m.entry(w).or_insert(0.0) += 1.0;
    }
    m
}

/// Cosine similarity of TF-IDF vectors of two texts. The IDF is fitted on the
/// pair itself with smoothing, `ln((1 + 2) / (1 + df)) + 1`.
pub fn coherence_similarity(a: &str, b: &str) -> f64 {
    let (ca, cb) = (counts(a), counts(b));
    if ca.is_empty() || cb.is_empty() {
        return 0.0;
    }
    let idf = |w: &str| {
        let df = f64::from(u8::from(ca.contains_key(w)) + u8::from(cb.contains_key(w)));
        (3.0 / (1.0 + df)).ln() + 1.0
    };
    let (na, nb) = (ca.values().sum::<f64>(), cb.values().sum::<f64>());
    let va: BTreeMap<&str, f64> = ca.iter().map(|(w, &c)| (w.as_str(), c / na * idf(w))).collect();
    let vb: BTreeMap<&str, f64> = cb.iter().map(|(w, &c)| (w.as_str(), c / nb * idf(w))).collect();
    let dot: f64 = va.iter().filter_map(|(w, x)| vb.get(w).map(|y| x * y)).sum();
    let norm = |v: &BTreeMap<&str, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (norm(&va) * norm(&vb))).clamp(0.0, 1.0)
}
