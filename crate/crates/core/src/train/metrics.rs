use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PointEstimate;
use crate::data::{NormStats, Sequence};
use crate::error::{Error, Result};
use crate::model::{LogNormMixNet, NllBreakdown, RecipientMode};
use crate::scalar::Real;

/// Dev-split scores. NLLs are per event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationMetrics {
    pub events: usize,
    pub tau_nll: f64,
    pub sender_nll: f64,
    pub recipient_nll: f64,
    pub total_nll: f64,
    /// Hours.
    pub time_rmse: f64,
    pub time_mae: f64,
    pub sender_top1: f64,
    pub sender_top3: f64,
    pub recipient_top1: f64,
    pub recipient_top3: f64,
}

#[derive(Default)]
struct Tally {
    nll: NllBreakdown<f64>,
    sq_err: f64,
    abs_err: f64,
    sender_hits: [usize; 2],
    recipient_hits: [usize; 2],
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.nll.merge(&o.nll);
        self.sq_err += o.sq_err;
        self.abs_err += o.abs_err;
        for k in 0..2 {
            self.sender_hits[k] += o.sender_hits[k];
            self.recipient_hits[k] += o.recipient_hits[k];
        }
        self
    }
}

/// Position of `target` when logits are ranked descending, ties broken by index.
pub fn rank_of<T: Real>(logits: &[T], target: usize) -> usize {
    let lt = logits[target];
    logits.iter().enumerate().filter(|&(j, &l)| l > lt || (l == lt && j < target)).count()
}

/// Rank of the true node subset among the most probable subsets under independent
/// per-node Bernoullis: the thresholded set, then that set with the least
/// confident node flipped, then with the second least confident flipped.
/// Returns `None` when the truth is not among those three.
pub fn binary_rank<T: Real>(logits: &[T], truth: &[usize]) -> Option<usize> {
    let mut want = vec![false; logits.len()];
    for &i in truth {
        want[i] = true;
    }
    let predicted: Vec<bool> = logits.iter().map(|&x| x > T::zero()).collect();
    let diff: Vec<usize> = (0..logits.len()).filter(|&i| predicted[i] != want[i]).collect();
    match diff.len() {
        0 => Some(0),
        1 => {
            let mut order: Vec<usize> = (0..logits.len()).collect();
            order.sort_by(|&a, &b| logits[a].abs().partial_cmp(&logits[b].abs()).unwrap().then(a.cmp(&b)));
            order.iter().take(2).position(|&i| i == diff[0]).map(|p| p + 1)
        }
        _ => None,
    }
}

/// Teacher-forced per-task NLL, time errors of the point prediction and top-k accuracies.
pub fn evaluate_validation<T: Real>(
    model: &LogNormMixNet<T>,
    seqs: &[Sequence],
    norm: &NormStats,
    point: PointEstimate,
) -> Result<ValidationMetrics> {
    let mode = model.config().recipient_mode;
    let members = model.arch().set_members();
    let parts: Vec<Tally> = seqs
        .par_iter()
        .filter(|s| !s.is_empty())
        .map(|seq| -> Result<Tally> {
            let mut t = Tally::default();
            for (out, ev) in model.score_sequence(&seq.events, norm)?.iter().zip(&seq.events) {
                let pred = match point {
                    PointEstimate::Median => out.mixture.median(norm),
                    PointEstimate::Mean => out.mixture.mean(norm),
                };
                let err = pred - ev.tau;
                t.sq_err += err * err;
                t.abs_err += err.abs();
                let sr = rank_of(&out.sender_logits, ev.sender);
                let rr = match mode {
                    RecipientMode::MultiClass => Some(rank_of(&out.recipient_logits, ev.recipient_set)),
                    RecipientMode::BinaryPerNode => binary_rank(&out.recipient_logits, &members[ev.recipient_set]),
                };
                for (k, cut) in [1usize, 3].into_iter().enumerate() {
                    t.sender_hits[k] += usize::from(sr < cut);
                    t.recipient_hits[k] += usize::from(rr.is_some_and(|r| r < cut));
                }
                let (a, b, c) = (out.tau_nll.to_f64_lossy(), out.sender_nll.to_f64_lossy(), out.recipient_nll.to_f64_lossy());
                t.nll.merge(&NllBreakdown { tau: a, sender: b, recipient: c, total: a + b + c, events: 1 });
            }
            Ok(t)
        })
        .collect::<Result<_>>()?;
    let t = parts.into_iter().fold(Tally::default(), Tally::merge);
    let n = t.nll.events;
    if n == 0 {
        return Err(Error::Data("validation split has no events".into()));
    }
    let nf = n as f64;
    let avg = t.nll.per_event();
    Ok(ValidationMetrics {
        events: n,
        tau_nll: avg.tau,
        sender_nll: avg.sender,
        recipient_nll: avg.recipient,
        total_nll: avg.total,
        time_rmse: (t.sq_err / nf).sqrt(),
        time_mae: t.abs_err / nf,
        sender_top1: t.sender_hits[0] as f64 / nf,
        sender_top3: t.sender_hits[1] as f64 / nf,
        recipient_top1: t.recipient_hits[0] as f64 / nf,
        recipient_top3: t.recipient_hits[1] as f64 / nf,
    })
}
