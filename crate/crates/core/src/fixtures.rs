//! Synthetic event sources with known generating laws.

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{NormStats, RawEvent};
use crate::error::{Error, Result};
use crate::model::MixtureParams;

/// Markov sender chain, i.i.d. lognormal-mixture gaps and sender-conditional
/// recipient sets.
#[derive(Clone, Debug)]
pub struct SyntheticSource {
    pub labels: Vec<String>,
    /// Gap law in hours, parameters of `ln τ`.
    pub gaps: MixtureParams<f64>,
    /// `transition[i][j]`: probability the next sender is `j` after `i`.
    pub transition: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    /// Per sender: recipient sets (node indices) with weights.
    pub sets: Vec<Vec<(Vec<usize>, f64)>>,
}

impl SyntheticSource {
    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        let bad = |m: &str| Err(Error::Contract(format!("synthetic source: {m}")));
        if self.transition.len() != n || self.sets.len() != n || self.initial.len() != n {
            return bad("per-sender tables must have one entry per label");
        }
        for (s, opts) in self.sets.iter().enumerate() {
            for (set, _) in opts {
                if set.is_empty() || set.iter().any(|&r| r >= n || r == s) {
                    return bad("recipient sets must be non-empty and exclude the sender");
                }
            }
        }
        Ok(())
    }

    /// Density of one gap in hours.
    pub fn gap_nll(&self, tau: f64) -> f64 {
        self.gaps.nll(tau, &NormStats::IDENTITY).expect("tau > 0")
    }

    pub fn sample_gap(&self, rng: &mut impl Rng) -> f64 {
        let k = WeightedIndex::new(&self.gaps.weights).expect("valid weights").sample(rng);
        let e: f64 = StandardNormal.sample(rng);
        (self.gaps.means[k] + self.gaps.scales[k] * e).exp()
    }

    /// `n` events starting at `start` (epoch seconds). Gaps are rounded to whole
    /// seconds, at least one.
    pub fn generate(&self, n: usize, start: i64, seed: u64) -> Result<Vec<RawEvent>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = WeightedIndex::new(&self.initial).map_err(|e| Error::Contract(e.to_string()))?;
        let rows = self
            .transition
            .iter()
            .map(|r| WeightedIndex::new(r))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Contract(e.to_string()))?;
        let set_dists = self
            .sets
            .iter()
            .map(|o| if o.is_empty() { Ok(None) } else { WeightedIndex::new(o.iter().map(|x| x.1)).map(Some) })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Contract(e.to_string()))?;
        let mut out = Vec::with_capacity(n);
        let mut t = start;
        let mut sender = init.sample(&mut rng);
        while out.len() < n {
            t += ((self.sample_gap(&mut rng) * 3600.0).round() as i64).max(1);
            let Some(d) = &set_dists[sender] else {
                return Err(Error::Contract(format!("sender {} has no recipient sets", self.labels[sender])));
            };
            let set = &self.sets[sender][d.sample(&mut rng)].0;
            out.push(RawEvent {
                timestamp: t,
                sender: self.labels[sender].clone(),
                recipients: set.iter().map(|&r| self.labels[r].clone()).collect::<BTreeSet<_>>(),
                subject: None,
                body: None,
            });
            sender = rows[sender].sample(&mut rng);
        }
        Ok(out)
    }

    /// E Corp: the CEO writes either to the chair alone or to the COO, CFO and
    /// CMO together, with equal odds. The other executives also pick among
    /// mutually exclusive sets: the COO and CMO write to two of the other three
    /// executives, the CFO to exactly one, each option equally likely.
    pub fn ecorp() -> Self {
        const CEO: usize = 0;
        const CHAIR: usize = 1;
        const COO: usize = 2;
        const CFO: usize = 3;
        const CMO: usize = 4;
        let labels = ["ceo", "chair", "coo", "cfo", "cmo"].map(String::from).to_vec();
        let share = vec![0.1, 0.0, 0.3, 0.3, 0.3];
        let third = 1.0 / 3.0;
        Self {
            labels,
            gaps: MixtureParams::new(vec![0.7, 0.3], vec![(0.3f64).ln(), (2.0f64).ln()], vec![0.6, 0.8]).unwrap(),
            transition: vec![share.clone(); 5],
            initial: share,
            sets: vec![
                vec![(vec![CHAIR], 0.5), (vec![COO, CFO, CMO], 0.5)],
                vec![],
                vec![(vec![CEO, CFO], third), (vec![CEO, CMO], third), (vec![CFO, CMO], third)],
                vec![(vec![CEO], third), (vec![COO], third), (vec![CMO], third)],
                vec![(vec![CEO, COO], third), (vec![CEO, CFO], third), (vec![COO, CFO], third)],
            ],
        }
    }

    pub fn ecorp_ceo_sets() -> [BTreeSet<String>; 2] {
        [
            ["chair"].map(String::from).into(),
            ["cfo", "cmo", "coo"].map(String::from).into(),
        ]
    }

    /// Three senders on a sticky Markov chain, four recipient sets and a
    /// two-component gap mixture with modes near 12 minutes and 3 hours.
    pub fn markov_mixture() -> Self {
        let labels = ["a", "b", "c", "d"].map(String::from).to_vec();
        Self {
            labels,
            gaps: MixtureParams::new(vec![0.6, 0.4], vec![(0.2f64).ln(), (3.0f64).ln()], vec![0.5, 0.7]).unwrap(),
            transition: vec![
                vec![0.7, 0.2, 0.1, 0.0],
                vec![0.1, 0.7, 0.2, 0.0],
                vec![0.2, 0.1, 0.7, 0.0],
                vec![1.0, 0.0, 0.0, 0.0],
            ],
            initial: vec![1.0, 1.0, 1.0, 0.0],
            sets: vec![
                vec![(vec![1], 0.8), (vec![1, 3], 0.2)],
                vec![(vec![2], 0.6), (vec![0, 3], 0.4)],
                vec![(vec![1, 3], 0.5), (vec![0, 3], 0.5)],
                vec![],
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecorp_ceo_uses_only_two_sets() {
        let src = SyntheticSource::ecorp();
        let ev = src.generate(5000, 0, 1).unwrap();
        let sets = SyntheticSource::ecorp_ceo_sets();
        let ceo: Vec<_> = ev.iter().filter(|e| e.sender == "ceo").collect();
        assert!(ceo.len() > 350 && ceo.len() < 650, "{}", ceo.len());
        assert!(ceo.iter().all(|e| sets.contains(&e.recipients)));
        let chair = ceo.iter().filter(|e| e.recipients == sets[0]).count() as f64 / ceo.len() as f64;
        assert!((chair - 0.5).abs() < 0.06);
        assert!(ev.iter().all(|e| e.sender != "chair"));
        assert!(ev.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
    }

    #[test]
    fn markov_source_is_seeded() {
        let src = SyntheticSource::markov_mixture();
        assert_eq!(src.generate(300, 10, 4).unwrap(), src.generate(300, 10, 4).unwrap());
        assert_ne!(src.generate(300, 10, 4).unwrap(), src.generate(300, 10, 5).unwrap());
        let ev = src.generate(2000, 0, 3).unwrap();
        let distinct: BTreeSet<_> = ev.iter().map(|e| e.recipients.clone()).collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn invalid_sources_are_rejected() {
        let mut src = SyntheticSource::markov_mixture();
        src.sets[0][0].0 = vec![0];
        assert!(src.generate(1, 0, 0).is_err());
    }
}
