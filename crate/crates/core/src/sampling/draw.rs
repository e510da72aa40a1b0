use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::NormStats;
use crate::model::MixtureParams;
use crate::scalar::{softmax, Real};

/// Index drawn by inverse CDF over non-negative `probs` summing to about one.
pub fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Categorical draw from unnormalized log-probabilities.
pub fn sample_categorical<T: Real>(logits: &[T], rng: &mut impl Rng) -> usize {
    let p: Vec<f64> = softmax(logits).into_iter().map(|x| x.to_f64_lossy()).collect();
    inverse_cdf(&p, rng.gen::<f64>())
}

pub fn sample_sender<T: Real>(logits: &[T], rng: &mut impl Rng) -> usize {
    sample_categorical(logits, rng)
}

/// Inter-arrival time in hours: component, then a unit normal pushed through the
/// component and the training normalization.
pub fn sample_tau<T: Real>(mix: &MixtureParams<T>, norm: &NormStats, rng: &mut impl Rng) -> f64 {
    let w: Vec<f64> = mix.weights.iter().map(|x| x.to_f64_lossy()).collect();
    let k = inverse_cdf(&w, rng.gen::<f64>());
    let eps: f64 = rng.sample(StandardNormal);
    let y = mix.scales[k].to_f64_lossy() * eps + mix.means[k].to_f64_lossy();
    norm.denormalize(y)
}

/// Outcome of one recipient draw.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecipientDraw {
    /// Sorted member node ids.
    pub members: Vec<usize>,
    /// Vocabulary id, `None` when the set was never seen in training.
    pub set_id: Option<usize>,
    /// Bernoulli rounds that came back empty.
    pub empty_draws: u32,
    pub forced_fallback: bool,
}

/// Bernoulli rounds attempted before falling back to the sender's usual set.
pub const MAX_EMPTY_RESAMPLES: u32 = 10;

/// One independent Bernoulli per node, the sender excluded.
pub fn sample_node_subset<T: Real>(logits: &[T], sender: usize, rng: &mut impl Rng) -> Vec<usize> {
    logits
        .iter()
        .enumerate()
        .filter_map(|(i, &x)| {
            let keep = rng.gen::<f64>() < x.sigmoid().to_f64_lossy();
            (keep && i != sender).then_some(i)
        })
        .collect()
}
