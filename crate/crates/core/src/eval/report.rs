use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::emd::{emd_proportions, emd_samples, proportions};
use crate::data::{local_time, Dataset, Split, Vocabularies};
use crate::error::{Error, Result};
use crate::sampling::SampledEvent;
use crate::text::coherence_similarity;
use crate::threads::{EmailRecord, GeneratedEmail};
use crate::train::ValidationMetrics;

/// Inter-arrival EMD uses at most this many leading taus per side.
pub const MAX_TAUS: usize = 100_000;

/// Ground metric statement carried in every report.
pub const GROUND_METRIC: &str = "1-D Wasserstein-1. Inter-arrival times in hours and hyperedge sizes in recipients. \
Hour-of-day (24 bins, local time, linear), day-of-week (7 bins, Monday first), sender outdegree (node ids by \
descending training sent count) and recipient-set indegree (set ids by descending training frequency, unseen sets \
in one extra final bin) as proportions in percentage points over the bin index line.";

/// One email as the distribution comparisons see it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observed {
    pub timestamp: i64,
    /// Hours since the previous event.
    pub tau: f64,
    pub sender: usize,
    /// `None` for a set absent from the vocabulary.
    pub recipient_set: Option<usize>,
    pub recipients: usize,
}

impl From<&SampledEvent> for Observed {
    fn from(e: &SampledEvent) -> Self {
        Self {
            timestamp: e.timestamp,
            tau: e.tau,
            sender: e.sender,
            recipient_set: e.recipient_set,
            recipients: e.recipients.len(),
        }
    }
}

/// Events of one split in stream order.
pub fn observed_split(ds: &Dataset, split: Split) -> Vec<Observed> {
    ds.split(split)
        .iter()
        .flat_map(|s| s.timestamps.iter().zip(&s.events))
        .map(|(&ts, e)| Observed {
            timestamp: ts,
            tau: e.tau,
            sender: e.sender,
            recipient_set: Some(e.recipient_set),
            recipients: ds.vocab.members(e.recipient_set).len(),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DistributionEmd {
    pub tau: f64,
    pub hour: f64,
    pub weekday: f64,
    pub sender: f64,
    pub recipient_set: f64,
    pub hyperedge: f64,
}

impl DistributionEmd {
    pub const NAMES: [&'static str; 6] = ["tau", "hour", "weekday", "sender", "recipient_set", "hyperedge"];

    pub fn values(&self) -> [f64; 6] {
        [self.tau, self.hour, self.weekday, self.sender, self.recipient_set, self.hyperedge]
    }
}

/// The six empirical distributions of one side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distributions {
    pub taus: Vec<f64>,
    pub hour: Vec<f64>,
    pub weekday: Vec<f64>,
    pub sender: Vec<f64>,
    pub recipient_set: Vec<f64>,
    pub hyperedge: Vec<f64>,
}

impl Distributions {
    pub fn of(events: &[Observed], n_nodes: usize, n_sets: usize, tz_offset_minutes: i32) -> Result<Self> {
        if let Some(e) = events.iter().find(|e| e.sender >= n_nodes || e.recipient_set.is_some_and(|r| r >= n_sets)) {
            return Err(Error::Data(format!("event at {} has ids outside the vocabulary", e.timestamp)));
        }
        let local = |e: &Observed| local_time(e.timestamp, tz_offset_minutes);
        Ok(Self {
            taus: events.iter().take(MAX_TAUS).map(|e| e.tau).collect(),
            hour: proportions(events.iter().map(|e| local(e).hour as usize), 24),
            weekday: proportions(events.iter().map(|e| local(e).weekday as usize), 7),
            sender: proportions(events.iter().map(|e| e.sender), n_nodes),
            recipient_set: proportions(events.iter().map(|e| e.recipient_set.unwrap_or(n_sets)), n_sets + 1),
            hyperedge: events.iter().map(|e| e.recipients as f64).collect(),
        })
    }

    pub fn emd(&self, other: &Self) -> Result<DistributionEmd> {
        Ok(DistributionEmd {
            tau: emd_samples(&self.taus, &other.taus)?,
            hour: emd_proportions(&self.hour, &other.hour)?,
            weekday: emd_proportions(&self.weekday, &other.weekday)?,
            sender: emd_proportions(&self.sender, &other.sender)?,
            recipient_set: emd_proportions(&self.recipient_set, &other.recipient_set)?,
            hyperedge: emd_samples(&self.hyperedge, &other.hyperedge)?,
        })
    }
}

/// EMDs of the six distributions between a generated stream and a reference.
pub fn distribution_report(generated: &[Observed], reference: &[Observed], vocab: &Vocabularies, tz_offset_minutes: i32) -> Result<DistributionEmd> {
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::Data("distribution report needs events on both sides".into()));
    }
    let (n, r) = (vocab.n_nodes(), vocab.n_sets());
    Distributions::of(generated, n, r, tz_offset_minutes)?.emd(&Distributions::of(reference, n, r, tz_offset_minutes)?)
}

/// Matched empirical quantiles `(reference, generated)` at `k/(q+1)`, `k = 1..=q`,
/// by linear interpolation between order statistics.
pub fn qq_points(generated: &[f64], reference: &[f64], q: usize) -> Result<Vec<(f64, f64)>> {
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::Data("Q-Q needs non-empty samples".into()));
    }
    let sorted = |s: &[f64]| {
        let mut v = s.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (g, r) = (sorted(generated), sorted(reference));
    let quantile = |v: &[f64], p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Ok((1..=q)
        .map(|k| {
            let p = k as f64 / (q + 1) as f64;
            (quantile(&r, p), quantile(&g, p))
        })
        .collect())
}

/// Fraction of multicast emails (two or more recipients) whose exact set never
/// appears in the vocabulary. An empty or unicast-only stream scores 0.
pub fn invalid_set_rate(generated: &[SampledEvent], vocab: &Vocabularies) -> (f64, usize) {
    let multicast: Vec<&SampledEvent> = generated.iter().filter(|e| e.recipients.len() >= 2).collect();
    if multicast.is_empty() {
        return (0.0, 0);
    }
    let bad = multicast.iter().filter(|e| vocab.set_id_of_members(&e.recipients).is_none()).count();
    (bad as f64 / multicast.len() as f64, multicast.len())
}

/// Fraction of cases whose truth is among the first `k` ranked labels.
pub fn topk_accuracy<L: PartialEq>(ranked: &[Vec<L>], truth: &[L], k: usize) -> Result<f64> {
    if ranked.len() != truth.len() {
        return Err(Error::Contract("one ranking per truth label".into()));
    }
    if ranked.iter().any(|r| r.len() < k) {
        return Err(Error::Contract(format!("rankings must hold at least {k} labels")));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let hits = ranked.iter().zip(truth).filter(|(r, t)| r[..k].contains(t)).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub pairs: usize,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

/// Similarity of each email to its successor within a thread, on subject plus body.
pub fn coherence_report(emails: &[GeneratedEmail]) -> CoherenceReport {
    coherence_of(emails.iter().map(|e| (e.thread_id, e.email_id, format!("{}\n{}", e.subject, e.body))))
}

/// As [`coherence_report`], for emails read back from output files.
pub fn coherence_of_records(emails: &[EmailRecord]) -> CoherenceReport {
    coherence_of(emails.iter().map(|e| (e.thread_id, e.email_id, format!("{}\n{}", e.subject, e.body))))
}

/// Items are `(thread_id, email_id, text)`.
fn coherence_of(items: impl IntoIterator<Item = (u64, u64, String)>) -> CoherenceReport {
    let mut threads: BTreeMap<u64, Vec<(u64, String)>> = BTreeMap::new();
    for (thread, id, text) in items {
        threads.entry(thread).or_default().push((id, text));
    }
    let mut sims = Vec::new();
    for t in threads.values_mut() {
        t.sort_by_key(|e| e.0);
        sims.extend(t.windows(2).map(|w| coherence_similarity(&w[0].1, &w[1].1)));
    }
    if sims.is_empty() {
        return CoherenceReport { pairs: 0, mean: None, min: None, max: None };
    }
    CoherenceReport {
        pairs: sims.len(),
        mean: Some(sims.iter().sum::<f64>() / sims.len() as f64),
        min: sims.iter().copied().reduce(f64::min),
        max: sims.iter().copied().reduce(f64::max),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; absent for a single trial.
    pub std: Option<f64>,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Data("cannot summarize zero trials".into()));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.len() >= 2).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Ok(Self { mean, std })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: u64,
    pub events: usize,
    pub emd: DistributionEmd,
    pub invalid_set_rate: f64,
    pub multicast: usize,
}

impl TrialReport {
    pub fn evaluate(trial: u64, generated: &[SampledEvent], reference: &[Observed], vocab: &Vocabularies, tz_offset_minutes: i32) -> Result<Self> {
        let obs: Vec<Observed> = generated.iter().map(Observed::from).collect();
        let emd = distribution_report(&obs, reference, vocab, tz_offset_minutes)?;
        let (invalid_set_rate, multicast) = invalid_set_rate(generated, vocab);
        Ok(Self { trial, events: generated.len(), emd, invalid_set_rate, multicast })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub tau: Summary,
    pub hour: Summary,
    pub weekday: Summary,
    pub sender: Summary,
    pub recipient_set: Summary,
    pub hyperedge: Summary,
    pub invalid_set_rate: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ground_metric: String,
    pub tz_offset_minutes: i32,
    pub trials: Vec<TrialReport>,
    pub summary: ReportSummary,
    #[serde(default)]
    pub prediction: Option<ValidationMetrics>,
    #[serde(default)]
    pub coherence: Option<CoherenceReport>,
}

impl EvalReport {
    /// Aggregates trials (sorted by trial index, so merge order does not matter).
    pub fn from_trials(mut trials: Vec<TrialReport>, tz_offset_minutes: i32) -> Result<Self> {
        trials.sort_by_key(|t| t.trial);
        let col = |f: fn(&TrialReport) -> f64| Summary::of(&trials.iter().map(f).collect::<Vec<_>>());
        let summary = ReportSummary {
            tau: col(|t| t.emd.tau)?,
            hour: col(|t| t.emd.hour)?,
            weekday: col(|t| t.emd.weekday)?,
            sender: col(|t| t.emd.sender)?,
            recipient_set: col(|t| t.emd.recipient_set)?,
            hyperedge: col(|t| t.emd.hyperedge)?,
            invalid_set_rate: col(|t| t.invalid_set_rate)?,
        };
        Ok(Self { ground_metric: GROUND_METRIC.into(), tz_offset_minutes, trials, summary, prediction: None, coherence: None })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Data(format!("report serialization: {e}")))
    }

    /// One row per statistic (`mean`, `std`), one column per distribution.
    pub fn summary_csv(&self) -> Result<String> {
        let s = &self.summary;
        let cols = [s.tau, s.hour, s.weekday, s.sender, s.recipient_set, s.hyperedge, s.invalid_set_rate];
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Data(format!("csv: {e}"));
        let mut header = vec!["statistic"];
        header.extend(DistributionEmd::NAMES);
        header.push("invalid_set_rate");
        w.write_record(&header).map_err(csv_err)?;
        w.write_record(std::iter::once("mean".to_string()).chain(cols.iter().map(|c| c.mean.to_string()))).map_err(csv_err)?;
        w.write_record(
            std::iter::once("std".to_string()).chain(cols.iter().map(|c| c.std.map(|x| x.to_string()).unwrap_or_default())),
        )
        .map_err(csv_err)?;
        String::from_utf8(w.into_inner().map_err(|e| Error::Data(e.to_string()))?).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn trials_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Data(format!("csv: {e}"));
        let mut header = vec!["trial", "events"];
        header.extend(DistributionEmd::NAMES);
        header.extend(["invalid_set_rate", "multicast"]);
        w.write_record(&header).map_err(csv_err)?;
        for t in &self.trials {
            let mut row = vec![t.trial.to_string(), t.events.to_string()];
            row.extend(t.emd.values().iter().map(f64::to_string));
            row.extend([t.invalid_set_rate.to_string(), t.multicast.to_string()]);
            w.write_record(&row).map_err(csv_err)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Data(e.to_string()))?).map_err(|e| Error::Data(e.to_string()))
    }
}
