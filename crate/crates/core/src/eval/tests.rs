use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{build_recipient_vocab, MetadataClass, NodeVocabulary, RawEvent, Vocabularies};
use crate::sampling::SampledEvent;
use crate::threads::{CommType, GeneratedEmail};

/// Optimal transport between equal-size uniform samples by trying every pairing.
fn brute_force(a: &[f64], b: &[f64]) -> f64 {
    fn perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }
    perms(a.len())
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        / a.len() as f64
}

#[test]
fn emd_unit_cases() {
    assert_eq!(emd_samples(&[1.0, 2.0, 5.0], &[5.0, 1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(emd_samples(&[0.0], &[1.0]).unwrap(), 1.0);
    assert_eq!(emd_samples(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 2.0);
    assert_eq!(brute_force(&[0.0, 0.0], &[1.0, 3.0]), 2.0);
    assert!(emd_samples(&[], &[1.0]).is_err());
    assert!(emd_1d(&[(0.0, -1.0)], &[(1.0, 1.0)]).is_err());
    assert!(emd_1d(&[(0.0, 0.0)], &[(1.0, 1.0)]).is_err());
    assert!(emd_samples(&[f64::NAN], &[1.0]).is_err());
    // weights need not be pre-normalized
    assert_eq!(emd_1d(&[(0.0, 3.0)], &[(2.0, 0.5)]).unwrap(), 2.0);
}

#[test]
fn emd_matches_exhaustive_pairing() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=7 {
        for _ in 0..20 {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let d = emd_samples(&a, &b).unwrap();
            assert!((d - brute_force(&a, &b)).abs() < 1e-12, "n={n}");
        }
    }
}

/// Unequal sizes: replicate each side up to the common multiple, which turns
/// the weighted problem into a uniform pairing.
#[test]
fn weighted_emd_matches_replicated_pairing() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (na, nb) in [(2, 3), (3, 2), (1, 4), (2, 4), (3, 6)] {
        let a: Vec<f64> = (0..na).map(|_| rng.gen_range(0.0..10.0f64).round()).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.gen_range(0.0..10.0)).collect();
        let l = (1..).find(|m| m % na == 0 && m % nb == 0).unwrap();
        let ra: Vec<f64> = a.iter().flat_map(|&x| std::iter::repeat_n(x, l / na)).collect();
        let rb: Vec<f64> = b.iter().flat_map(|&x| std::iter::repeat_n(x, l / nb)).collect();
        assert!((emd_samples(&a, &b).unwrap() - brute_force(&ra, &rb)).abs() < 1e-12);
    }
}

#[test]
fn emd_is_a_metric_on_small_supports() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<(f64, f64)> {
        (0..rng.gen_range(1..=6)).map(|_| (rng.gen_range(0..5) as f64, rng.gen_range(0.1..1.0))).collect()
    };
    for _ in 0..300 {
        let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let ab = emd_1d(&a, &b).unwrap();
        assert!((ab - emd_1d(&b, &a).unwrap()).abs() < 1e-12);
        assert!(emd_1d(&a, &a).unwrap().abs() < 1e-12);
        assert!(ab <= emd_1d(&a, &c).unwrap() + emd_1d(&c, &b).unwrap() + 1e-12);
        assert!(ab >= 0.0);
    }
}

#[test]
fn proportion_shift_is_percentage_points() {
    let mut p = vec![0.0; 24];
    let mut q = vec![0.0; 24];
    p[9] = 0.6;
    p[14] = 0.4;
    q[10] = 0.6;
    q[14] = 0.4;
    assert!((emd_proportions(&p, &q).unwrap() - 60.0).abs() < 1e-9);
    assert_eq!(proportions([0, 0, 2, 1], 3), vec![0.5, 0.25, 0.25]);
}

fn vocab() -> Vocabularies {
    let raw = |s: &str, r: &[&str]| RawEvent {
        timestamp: 0,
        sender: s.into(),
        recipients: r.iter().map(|x| x.to_string()).collect(),
        subject: None,
        body: None,
    };
    let events = vec![raw("a", &["b"]), raw("a", &["b"]), raw("b", &["a", "c"]), raw("c", &["a"])];
    let (sets, _) = build_recipient_vocab(&events, 1).unwrap();
    Vocabularies::new(NodeVocabulary::from_events(&events), sets).unwrap()
}

fn sampled(ts: i64, sender: usize, recipients: &[usize], set: Option<usize>) -> SampledEvent {
    SampledEvent { timestamp: ts, tau: 1.0, sender, recipients: recipients.to_vec(), recipient_set: set, metadata: MetadataClass::OfficeHours }
}

#[test]
fn stream_against_itself_is_all_zero() {
    let v = vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let obs: Vec<Observed> = (0..500)
        .map(|i| Observed {
            timestamp: 1_700_000_000 + i * 977,
            tau: rng.gen_range(0.01..10.0),
            sender: rng.gen_range(0..3),
            recipient_set: Some(rng.gen_range(0..3)),
            recipients: rng.gen_range(1..3),
        })
        .collect();
    let d = distribution_report(&obs, &obs, &v, 120).unwrap();
    assert_eq!(d.values(), [0.0; 6]);
    let mut moved = obs.clone();
    moved.iter_mut().for_each(|o| o.recipient_set = None);
    let d = distribution_report(&moved, &obs, &v, 120).unwrap();
    assert!(d.recipient_set > 0.0 && d.sender == 0.0);
    assert!(distribution_report(&[], &obs, &v, 0).is_err());
}

#[test]
fn hour_bins_use_local_time() {
    let v = vocab();
    let at = |h: i64| Observed { timestamp: h * 3600, tau: 1.0, sender: 0, recipient_set: Some(0), recipients: 1 };
    // 09:00 UTC read at UTC+1 lands in hour 10
    let d = distribution_report(&[at(9)], &[at(9)], &v, 60).unwrap();
    assert_eq!(d.hour, 0.0);
    let a = Distributions::of(&[at(9)], 3, 3, 60).unwrap();
    assert_eq!(a.hour[10], 1.0);
    assert!((distribution_report(&[at(9)], &[at(10)], &v, 0).unwrap().hour - 100.0).abs() < 1e-9);
}

#[test]
fn qq_cases() {
    let r: Vec<f64> = (1..=99).map(f64::from).collect();
    for (x, y) in qq_points(&r, &r, 9).unwrap() {
        assert_eq!(x, y);
    }
    let g: Vec<f64> = r.iter().map(|x| 2.0 * x).collect();
    let pts = qq_points(&g, &r, 4).unwrap();
    assert_eq!(pts.len(), 4);
    assert!(pts.iter().all(|(x, y)| (y - 2.0 * x).abs() < 1e-9));
    assert_eq!(pts[1].0, 40.2);
    assert!(qq_points(&[], &r, 3).is_err());
}

#[test]
fn invalid_set_rate_cases() {
    let v = vocab();
    let (b, c) = (v.nodes.id("b").unwrap(), v.nodes.id("c").unwrap());
    let a = v.nodes.id("a").unwrap();
    assert_eq!(invalid_set_rate(&[], &v), (0.0, 0));
    let valid = sampled(0, b, &[a, c], v.set_id_of_members(&[a, c]));
    let invalid = sampled(0, a, &[b, c], None);
    let unicast = sampled(0, a, &[b], Some(0));
    assert_eq!(invalid_set_rate(&[valid.clone(), unicast.clone()], &v), (0.0, 1));
    assert_eq!(invalid_set_rate(&[valid, invalid, unicast], &v), (0.5, 2));
}

#[test]
fn topk_cases() {
    let ranked = vec![vec![1, 2, 3], vec![4, 5, 6]];
    assert_eq!(topk_accuracy(&ranked, &[1, 4], 1).unwrap(), 1.0);
    assert_eq!(topk_accuracy(&ranked, &[3, 6], 1).unwrap(), 0.0);
    assert_eq!(topk_accuracy(&ranked, &[3, 6], 3).unwrap(), 1.0);
    assert!(topk_accuracy(&ranked, &[3], 1).is_err());
    assert!(topk_accuracy(&ranked, &[3, 6], 4).is_err());
}

fn email(id: u64, thread: u64, body: &str) -> GeneratedEmail {
    GeneratedEmail {
        email_id: id,
        thread_id: thread,
        comm_type: CommType::Reply,
        timestamp: id as i64,
        tau: 1.0,
        sender: 0,
        recipients: vec![1],
        recipient_set: Some(0),
        metadata: MetadataClass::OfficeHours,
        subject: "Pipeline".into(),
        greeting: "Hi".into(),
        body: body.into(),
        salutation: "Thanks".into(),
        in_reply_to: None,
        references: vec![],
    }
}

#[test]
fn coherence_cases() {
    let r = coherence_report(&[email(0, 0, "gas capacity report"), email(1, 0, "gas capacity report"), email(2, 1, "other")]);
    assert_eq!(r.pairs, 1);
    assert!((r.mean.unwrap() - 1.0).abs() < 1e-12);
    let none = coherence_report(&[email(0, 0, "a"), email(1, 1, "b")]);
    assert_eq!(none.pairs, 0);
    assert!(none.mean.is_none());
}

fn trial(t: u64, x: f64) -> TrialReport {
    TrialReport {
        trial: t,
        events: 10,
        emd: DistributionEmd { tau: x, hour: x, weekday: x, sender: x, recipient_set: x, hyperedge: x },
        invalid_set_rate: 0.0,
        multicast: 0,
    }
}

#[test]
fn aggregation() {
    let one = EvalReport::from_trials(vec![trial(0, 2.0)], 0).unwrap();
    assert_eq!(one.summary.tau, Summary { mean: 2.0, std: None });
    let many = EvalReport::from_trials(vec![trial(2, 3.0), trial(0, 1.0), trial(1, 2.0)], 0).unwrap();
    assert_eq!(many.summary.hour, Summary { mean: 2.0, std: Some(1.0) });
    assert_eq!(many.trials.iter().map(|t| t.trial).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert!(EvalReport::from_trials(vec![], 0).is_err());
    let csv = many.summary_csv().unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "statistic,tau,hour,weekday,sender,recipient_set,hyperedge,invalid_set_rate");
    assert_eq!(lines[1], "mean,2,2,2,2,2,2,0");
    assert_eq!(lines[2], "std,1,1,1,1,1,1,0");
    assert_eq!(many.trials_csv().unwrap().lines().count(), 4);
    let single = one.summary_csv().unwrap();
    assert_eq!(single.lines().nth(2).unwrap(), "std,,,,,,,");
}

#[test]
fn report_json_matches_schema() {
    let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let v = vocab();
    let stream = vec![sampled(1_700_000_000, 0, &[1], Some(0)), sampled(1_700_003_600, 1, &[0, 2], None)];
    let reference: Vec<Observed> = stream.iter().map(Observed::from).collect();
    let trials = (0..3).map(|t| TrialReport::evaluate(t, &stream, &reference, &v, 0).unwrap()).collect();
    let mut report = EvalReport::from_trials(trials, 0).unwrap();
    report.coherence = Some(coherence_report(&[email(0, 0, "x y"), email(1, 0, "x z")]));
    let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    let errors: Vec<String> = validator.iter_errors(&json).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    let back: EvalReport = serde_json::from_value(json.clone()).unwrap();
    assert_eq!(back, report);
    let mut broken = json;
    broken["trials"][0]["emd"]["tau"] = serde_json::json!(-1.0);
    assert!(!validator.is_valid(&broken));
}

#[test]
fn svg_output_is_well_formed() {
    let s = qq_svg(&[(0.1, 0.2), (1.0, 1.5), (10.0, 30.0)], "Q-Q <tau>");
    assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
    assert_eq!(s.matches("<circle").count(), 3);
    assert!(s.contains("Q-Q &lt;tau&gt;"));
    let h = histogram_svg(&[0.5, 0.5], &[1.0, 0.0], "hours");
    assert_eq!(h.matches("<rect").count(), 5);
}
