use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{finite_diff_check, Tape};
use crate::data::{Event, MetadataClass, NormStats};

fn cfg(n: usize, r: usize, k: usize, d: usize, mode: RecipientMode) -> ModelConfig {
    ModelConfig {
        n_nodes: n,
        n_recipient_sets: r,
        components: k,
        d_embed: d,
        d_hidden: d,
        d_sender_hidden: d,
        recipient_mode: mode,
        init_seed: 7,
    }
}

fn members(n: usize, r: usize) -> Vec<Vec<usize>> {
    (0..r).map(|i| if i % 2 == 0 { vec![i % n] } else { vec![i % n, (i + 1) % n] }).collect()
}

fn random_events(rng: &mut ChaCha8Rng, len: usize, n: usize, r: usize) -> Vec<Event> {
    (0..len)
        .map(|_| Event {
            tau: rng.gen_range(0.01..20.0),
            sender: rng.gen_range(0..n),
            recipient_set: rng.gen_range(0..r),
            metadata: MetadataClass::ALL[rng.gen_range(0..3)],
        })
        .collect()
}

const NORM: NormStats = NormStats { mean_log_tau: 0.3, std_log_tau: 1.7 };

#[test]
fn zero_weights_keep_zero_state() {
    let m = LogNormMixNet::<f64>::zeros(cfg(3, 2, 2, 4, RecipientMode::MultiClass), members(3, 2)).unwrap();
    let ev = Event { tau: 2.5, sender: 1, recipient_set: 1, metadata: MetadataClass::Shoulder };
    let s = m.encode_step(&m.initial_state(), &ev, &NORM).unwrap();
    assert!(s.h.iter().all(|&x| x == 0.0));
}

#[test]
fn encode_is_deterministic_and_checks_ids() {
    let m = LogNormMixNet::<f64>::new(cfg(3, 2, 2, 4, RecipientMode::MultiClass), members(3, 2)).unwrap();
    let ev = Event { tau: 2.5, sender: 1, recipient_set: 1, metadata: MetadataClass::Shoulder };
    let a = m.encode_step(&m.initial_state(), &ev, &NORM).unwrap();
    let b = m.encode_step(&m.initial_state(), &ev, &NORM).unwrap();
    assert_eq!(a, b);
    assert!(a.h.iter().any(|&x| x != 0.0));
    let bad = Event { sender: 3, ..ev };
    assert!(m.encode_step(&a, &bad, &NORM).is_err());
    let bad = Event { recipient_set: 3, ..ev };
    assert!(m.encode_step(&a, &bad, &NORM).is_err());
    // the unseen-set row is addressable
    let oov = Event { recipient_set: 2, ..ev };
    assert!(m.encode_step(&a, &oov, &NORM).is_ok());
}

#[test]
fn state_stays_finite_over_long_streams() {
    let m = LogNormMixNet::<f64>::new(cfg(5, 6, 3, 8, RecipientMode::MultiClass), members(5, 6)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut s = m.initial_state();
    for ev in random_events(&mut rng, 10_000, 5, 6) {
        s = m.encode_step(&s, &ev, &NORM).unwrap();
        assert!(s.norm().is_finite());
    }
    assert!(s.h.iter().all(|x| x.abs() <= 1.0));
}

#[test]
fn zero_weight_heads() {
    let m = LogNormMixNet::<f64>::zeros(cfg(4, 5, 3, 4, RecipientMode::MultiClass), members(4, 5)).unwrap();
    let s = m.initial_state();
    let mix = m.temporal_head(&s, MetadataClass::OfficeHours).unwrap();
    for k in 0..3 {
        assert!((mix.weights[k] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mix.means[k], 0.0);
        assert!((mix.scales[k] - std::f64::consts::LN_2).abs() < 1e-15);
    }
    let p = crate::scalar::softmax(&m.sender_logits(&s).unwrap());
    assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    let p = crate::scalar::softmax(&m.recipient_logits(&s, 2).unwrap());
    assert_eq!(p.len(), 5);
    assert!(p.iter().all(|&x| (x - 0.2).abs() < 1e-15));
    assert!(m.recipient_logits(&s, 4).is_err());

    let bc = LogNormMixNet::<f64>::zeros(cfg(4, 5, 3, 4, RecipientMode::BinaryPerNode), members(4, 5)).unwrap();
    let l = bc.recipient_logits(&s, 0).unwrap();
    assert_eq!(l.len(), 4);
    assert!(l.iter().all(|&x| crate::Real::sigmoid(x) == 0.5));
}

#[test]
fn random_heads_respect_invariants_even_for_large_states() {
    let m = LogNormMixNet::<f64>::new(cfg(4, 5, 6, 8, RecipientMode::MultiClass), members(4, 5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for scale in [1.0, 10.0, 1e3] {
        let s = HistoryState { h: (0..8).map(|_| rng.gen_range(-scale..scale)).collect() };
        for meta in MetadataClass::ALL {
            let mix = m.temporal_head(&s, meta).unwrap();
            assert!((mix.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(mix.weights.iter().all(|&w| w >= 0.0));
            assert!(mix.scales.iter().all(|&x| x > 0.0 && x.is_finite()));
            assert!(mix.means.iter().all(|x| x.is_finite()));
        }
        assert!(m.sender_logits(&s).unwrap().iter().all(|x| x.is_finite()));
        assert!(m.recipient_logits(&s, 1).unwrap().iter().all(|x| x.is_finite()));
    }
}

#[test]
fn tape_nll_matches_value_nll() {
    let m = LogNormMixNet::<f64>::new(cfg(3, 4, 4, 6, RecipientMode::MultiClass), members(3, 4)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let seq = random_events(&mut rng, 12, 3, 4);
    let steps = m.score_sequence(&seq, &NORM).unwrap();
    for (s, ev) in steps.iter().zip(&seq) {
        let direct = s.mixture.nll(ev.tau, &NORM).unwrap();
        assert!((direct - s.tau_nll).abs() < 1e-10, "{direct} vs {}", s.tau_nll);
    }
}

#[test]
fn temporal_head_ignores_current_marks() {
    let m = LogNormMixNet::<f64>::new(cfg(3, 4, 4, 6, RecipientMode::MultiClass), members(3, 4)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let seq = random_events(&mut rng, 8, 3, 4);
    let mut perturbed = seq.clone();
    perturbed[7].sender = (seq[7].sender + 1) % 3;
    perturbed[7].recipient_set = (seq[7].recipient_set + 1) % 4;
    let a = m.score_sequence(&seq, &NORM).unwrap();
    let b = m.score_sequence(&perturbed, &NORM).unwrap();
    assert_eq!(a[7].mixture, b[7].mixture);
    assert_eq!(a[7].tau_nll, b[7].tau_nll);
    assert_ne!(a[7].sender_nll, b[7].sender_nll);
}

#[test]
fn single_event_uniform_losses() {
    let m = LogNormMixNet::<f64>::zeros(cfg(2, 2, 1, 3, RecipientMode::MultiClass), members(2, 2)).unwrap();
    let ev = Event { tau: 1.0, sender: 0, recipient_set: 1, metadata: MetadataClass::NonWorking };
    let l = m.batch_nll(&[ev], &NormStats::IDENTITY).unwrap();
    let ln2 = std::f64::consts::LN_2;
    assert!((l.sender - ln2).abs() < 1e-15);
    assert!((l.recipient - ln2).abs() < 1e-15);
    assert_eq!(l.total, l.tau + l.sender + l.recipient);
    // K = 1, μ = 0, σ = ln 2, τ = 1 under identity normalization
    let expected_tau = 0.5 * (2.0 * std::f64::consts::PI).ln() + ln2.ln();
    assert!((l.tau - expected_tau).abs() < 1e-14);
    assert!(m.batch_nll(&[], &NormStats::IDENTITY).is_err());
}

#[test]
fn binary_head_loss_is_sum_of_bernoullis() {
    let m = LogNormMixNet::<f64>::zeros(cfg(3, 2, 1, 3, RecipientMode::BinaryPerNode), members(3, 2)).unwrap();
    let ev = Event { tau: 1.0, sender: 0, recipient_set: 1, metadata: MetadataClass::NonWorking };
    let l = m.batch_nll(&[ev], &NormStats::IDENTITY).unwrap();
    assert!((l.recipient - 3.0 * std::f64::consts::LN_2).abs() < 1e-14);
}

fn full_model_error(seed: u64, mode: RecipientMode) -> f64 {
    let mut c = cfg(4, 3, 3, 8, mode);
    c.init_seed = seed;
    let mut m = LogNormMixNet::<f64>::new(c, members(4, 3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let seq = random_events(&mut rng, 5, 4, 3);
    let (arch, store) = m.parts_mut();
    finite_diff_check(store, 1e-5, |t: &mut Tape<'_, f64>| Ok(arch.sequence(t, &seq, &NORM)?.total)).unwrap()
}

#[test]
fn full_model_gradients_match_finite_differences() {
    for seed in 0..3 {
        for mode in [RecipientMode::MultiClass, RecipientMode::BinaryPerNode] {
            let err = full_model_error(seed, mode);
            assert!(err < 1e-4, "seed {seed} {mode}: {err}");
        }
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    use crate::data::{build_recipient_vocab, NodeVocabulary, RawEvent, Vocabularies};
    let raw: Vec<RawEvent> = (0..6)
        .map(|i| RawEvent {
            timestamp: i,
            sender: ["a", "b", "c"][i as usize % 3].into(),
            recipients: if i % 2 == 0 { ["x".to_string()].into() } else { ["a".to_string(), "x".to_string()].into() },
            subject: None,
            body: None,
        })
        .map(|mut e| {
            e.recipients.remove(&e.sender);
            e
        })
        .collect();
    let (sets, kept) = build_recipient_vocab(&raw, 1).unwrap();
    let vocab = Vocabularies::new(NodeVocabulary::from_events(&kept), sets).unwrap();
    let members = (0..vocab.n_sets()).map(|i| vocab.members(i).to_vec()).collect();
    let c = cfg(vocab.n_nodes(), vocab.n_sets(), 3, 5, RecipientMode::MultiClass);
    let m = LogNormMixNet::<f64>::new(c, members).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    Checkpoint::from_model(&m, &vocab, &NORM, 60).save(&path).unwrap();
    let ck = Checkpoint::load(&path).unwrap();
    assert_eq!(ck.tz_offset_minutes, 60);
    assert_eq!(ck.vocab, vocab);
    let back: LogNormMixNet<f64> = ck.to_model().unwrap();
    assert_eq!(back, m);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seq = random_events(&mut rng, 9, vocab.n_nodes(), vocab.n_sets());
    let a = m.batch_nll(&seq, &NORM).unwrap();
    let b = back.batch_nll(&seq, &ck.norm).unwrap();
    assert_eq!(a.total.to_bits(), b.total.to_bits());

    let mut broken = ck.clone();
    broken.params[0].shape = [1, 1];
    assert!(broken.to_model::<f64>().is_err());
}

#[test]
fn f32_model_runs() {
    let m = LogNormMixNet::<f64>::new(cfg(3, 4, 2, 6, RecipientMode::MultiClass), members(3, 4)).unwrap();
    let m32: LogNormMixNet<f32> = m.cast();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seq = random_events(&mut rng, 10, 3, 4);
    let a = m.batch_nll(&seq, &NORM).unwrap().total;
    let b = m32.batch_nll(&seq, &NORM).unwrap().total;
    assert!((a - b as f64).abs() / a.abs() < 1e-4);
}
