use crate::error::{Error, Result};

fn check(side: &str, s: &[(f64, f64)]) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::Data(format!("EMD: {side} sample is empty")));
    }
    if s.iter().any(|&(x, w)| !x.is_finite() || !w.is_finite() || w < 0.0) {
        return Err(Error::Data(format!("EMD: {side} sample has a non-finite value or negative weight")));
    }
    let total: f64 = s.iter().map(|p| p.1).sum();
    if total <= 0.0 {
        return Err(Error::Data(format!("EMD: {side} sample has zero total weight")));
    }
    Ok(total)
}

/// 1-D Wasserstein-1 distance between weighted samples `(value, weight)`.
/// Each side's weights are normalized to 1; the distance is the integral of
/// `|F_a − F_b|` over the merged support.
pub fn emd_1d(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    let (ta, tb) = (check("first", a)?, check("second", b)?);
    let mut a: Vec<(f64, f64)> = a.iter().map(|&(x, w)| (x, w / ta)).collect();
    let mut b: Vec<(f64, f64)> = b.iter().map(|&(x, w)| (x, w / tb)).collect();
    a.sort_by(|p, q| p.0.total_cmp(&q.0));
    b.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut prev: Option<f64> = None;
    let mut dist = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        if let Some(px) = prev {
            dist += (fa - fb).abs() * (x - px);
        }
        while i < a.len() && a[i].0 == x {
            fa += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == x {
            fb += b[j].1;
            j += 1;
        }
        prev = Some(x);
    }
    Ok(dist)
}

/// EMD between two unweighted samples.
pub fn emd_samples(a: &[f64], b: &[f64]) -> Result<f64> {
    let w = |s: &[f64]| s.iter().map(|&x| (x, 1.0)).collect::<Vec<_>>();
    emd_1d(&w(a), &w(b))
}

/// EMD between two histograms over bins `0, 1, …`, in percentage points times
/// bins: proportions are scaled by 100. Shorter vectors are zero-padded.
pub fn emd_proportions(p: &[f64], q: &[f64]) -> Result<f64> {
    let w = |s: &[f64]| s.iter().enumerate().map(|(i, &x)| (i as f64, x)).collect::<Vec<_>>();
    Ok(100.0 * emd_1d(&w(p), &w(q))?)
}

/// Normalized histogram of bin indices.
pub fn proportions(bins: impl IntoIterator<Item = usize>, n_bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; n_bins];
    let mut n = 0usize;
    for b in bins {
        h[b] += 1.0;
        n += 1;
    }
    if n > 0 {
        h.iter_mut().for_each(|x| *x /= n as f64);
    }
    h
}
