use super::*;
use crate::data::{Dataset, DatasetConfig, Event, MetadataClass, NormStats, Sequence};
use crate::fixtures::SyntheticSource;
use crate::model::{LogNormMixNet, ModelConfig, RecipientMode, GROUP_ENCODER, GROUP_TEMPORAL};

fn seq(events: Vec<Event>) -> Sequence {
    Sequence { start: 0, first_index: 0, timestamps: vec![0; events.len()], events }
}

fn tiny(n: usize, r: usize, k: usize, mode: RecipientMode) -> ModelConfig {
    ModelConfig {
        n_nodes: n,
        n_recipient_sets: r,
        components: k,
        d_embed: 4,
        d_hidden: 6,
        d_sender_hidden: 6,
        recipient_mode: mode,
        init_seed: 1,
    }
}

#[test]
fn ranks_break_ties_by_index() {
    assert_eq!(rank_of(&[0.0, 0.0, 0.0], 0), 0);
    assert_eq!(rank_of(&[0.0, 0.0, 0.0], 2), 2);
    assert_eq!(rank_of(&[1.0, 3.0, 2.0], 0), 2);
    assert_eq!(rank_of(&[1.0, 3.0, 2.0], 1), 0);
}

#[test]
fn binary_rank_flips_least_confident_nodes() {
    let logits = [2.0, -0.1, -3.0, 0.5];
    assert_eq!(binary_rank(&logits, &[0, 3]), Some(0));
    assert_eq!(binary_rank(&logits, &[0, 1, 3]), Some(1));
    assert_eq!(binary_rank(&logits, &[0]), Some(2));
    assert_eq!(binary_rank(&logits, &[3]), None);
    assert_eq!(binary_rank(&logits, &[0, 2, 3]), None);
}

#[test]
fn one_hot_heads_are_always_right() {
    let cfg = tiny(3, 3, 1, RecipientMode::MultiClass);
    let mut m = LogNormMixNet::<f64>::zeros(cfg, vec![vec![0], vec![1], vec![2]]).unwrap();
    let store = m.params_mut();
    let ids: Vec<_> = store.params().map(|(id, p)| (id, p.name.clone())).collect();
    for (id, name) in ids {
        let v = store.value_mut(id);
        if name == "sender.b2" {
            v.data_mut()[1] = 50.0;
        }
        if name == "recipient.b" {
            v.data_mut()[2] = 50.0;
        }
    }
    let ev = Event { tau: 1.0, sender: 1, recipient_set: 2, metadata: MetadataClass::OfficeHours };
    let r = evaluate_validation(&m, &[seq(vec![ev; 20])], &NormStats::IDENTITY, PointEstimate::Median).unwrap();
    assert_eq!((r.sender_top1, r.sender_top3, r.recipient_top1, r.recipient_top3), (1.0, 1.0, 1.0, 1.0));
}

#[test]
fn uniform_heads_score_chance() {
    let r_sets = 130;
    let cfg = tiny(4, r_sets, 1, RecipientMode::MultiClass);
    let members = (0..r_sets).map(|i| vec![i % 4]).collect();
    let m = LogNormMixNet::<f64>::zeros(cfg, members).unwrap();
    let events: Vec<Event> = (0..13_000)
        .map(|i| Event { tau: 1.0, sender: i % 4, recipient_set: i % r_sets, metadata: MetadataClass::OfficeHours })
        .collect();
    let r = evaluate_validation(&m, &[seq(events)], &NormStats::IDENTITY, PointEstimate::Median).unwrap();
    assert!((r.recipient_top1 - 1.0 / 130.0).abs() < 1e-3, "{}", r.recipient_top1);
    assert!((r.recipient_top3 - 3.0 / 130.0).abs() < 1e-3);
    assert!((r.sender_top1 - 0.25).abs() < 1e-3);
    assert!((r.recipient_nll - (130f64).ln()).abs() < 1e-9);
}

#[test]
fn single_component_point_prediction_is_lognormal_median() {
    let cfg = tiny(2, 2, 1, RecipientMode::MultiClass);
    let mut m = LogNormMixNet::<f64>::zeros(cfg, vec![vec![0], vec![1]]).unwrap();
    let mu = 0.7f64;
    m.temporal_bias_mut().data_mut()[1] = mu;
    let taus = [0.5, 2.0, 4.0];
    let events: Vec<Event> = taus
        .iter()
        .map(|&tau| Event { tau, sender: 0, recipient_set: 1, metadata: MetadataClass::Shoulder })
        .collect();
    let r = evaluate_validation(&m, &[seq(events)], &NormStats::IDENTITY, PointEstimate::Median).unwrap();
    // zero encoder weights keep h = 0, so every step predicts exp(μ)
    let pred = mu.exp();
    let rmse = (taus.iter().map(|t| (t - pred).powi(2)).sum::<f64>() / 3.0).sqrt();
    let mae = taus.iter().map(|t| (t - pred).abs()).sum::<f64>() / 3.0;
    assert!((r.time_rmse - rmse).abs() < 1e-8);
    assert!((r.time_mae - mae).abs() < 1e-8);
    let mean = evaluate_validation(&m, &[seq(vec![Event { tau: 1.0, sender: 0, recipient_set: 0, metadata: MetadataClass::Shoulder }])], &NormStats::IDENTITY, PointEstimate::Mean).unwrap();
    let sigma = std::f64::consts::LN_2;
    assert!((mean.time_mae - ((mu + sigma * sigma / 2.0).exp() - 1.0)).abs() < 1e-9);
}

fn ecorp_dataset(events: usize, seed: u64) -> Dataset {
    let raw = SyntheticSource::ecorp().generate(events, 1_600_000_000, seed).unwrap();
    Dataset::from_raw(raw, DatasetConfig { min_count: 1, ..Default::default() }).unwrap()
}

fn model_for(ds: &Dataset, mode: RecipientMode) -> LogNormMixNet<f64> {
    let cfg = ModelConfig {
        n_nodes: ds.vocab.n_nodes(),
        n_recipient_sets: ds.vocab.n_sets(),
        components: 2,
        d_embed: 4,
        d_hidden: 8,
        d_sender_hidden: 8,
        recipient_mode: mode,
        init_seed: 3,
    };
    let members = (0..ds.vocab.n_sets()).map(|i| ds.vocab.members(i).to_vec()).collect();
    LogNormMixNet::new(cfg, members).unwrap()
}

fn quick_cfg() -> TrainConfig {
    TrainConfig { lr: 1e-2, batch: 4, max_epochs: 6, patience: 2, stage3_enabled: true, seed: 5, ..Default::default() }
}

#[test]
fn stages_freeze_and_restore_best() {
    let ds = ecorp_dataset(3000, 2);
    let data = TrainData::from_dataset(&ds);
    let mut model = model_for(&ds, RecipientMode::MultiClass);
    let cfg = quick_cfg();
    let mut log = TrainLog::default();
    train_stage(&mut model, &data, &cfg, Stage::ALL_GROUPS, &mut log).unwrap();
    let temporal = model.params().group_snapshot(GROUP_TEMPORAL);
    let encoder = model.params().group_snapshot(GROUP_ENCODER);
    let sender = model.params().group_snapshot(crate::model::GROUP_SENDER);
    let r2 = train_stage(&mut model, &data, &cfg, Stage::MARKS, &mut log).unwrap();
    let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
    assert_eq!(bits(model.params().group_snapshot(GROUP_TEMPORAL)), bits(temporal.clone()));
    assert_eq!(bits(model.params().group_snapshot(GROUP_ENCODER)), bits(encoder));
    assert_ne!(bits(model.params().group_snapshot(crate::model::GROUP_SENDER)), bits(sender));
    assert_eq!(log.stage_min(2), Some(r2.best_criterion));
    let dev = evaluate_validation(&model, data.dev, &data.norm, cfg.point).unwrap();
    assert_eq!(Stage::MARKS.criterion(&dev), r2.best_criterion);
    assert!(r2.best_criterion <= log.stage(2).next().unwrap().criterion);
}

#[test]
fn staged_train_is_reproducible_and_logs_every_epoch() {
    let ds = ecorp_dataset(2000, 4);
    let data = TrainData::from_dataset(&ds);
    let cfg = quick_cfg();
    let a = staged_train(model_for(&ds, RecipientMode::BinaryPerNode), &data, &cfg).unwrap();
    let b = staged_train(model_for(&ds, RecipientMode::BinaryPerNode), &data, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.log.to_csv().unwrap(), b.log.to_csv().unwrap());
    assert_eq!(a.stages.len(), 3);
    for s in &a.stages {
        assert_eq!(a.log.stage(s.stage).count(), s.epochs_run + 1);
        assert_eq!(a.log.stage_min(s.stage), Some(s.best_criterion));
    }
    assert!(a.model.params().groups().iter().all(|g| !g.frozen));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    a.log.write_csv(&path).unwrap();
    let back = TrainLog::read_csv(&path).unwrap();
    assert_eq!(back.records().len(), a.log.records().len());
    assert_eq!(back.to_csv().unwrap(), a.log.to_csv().unwrap());
}

#[test]
fn stage_one_reduces_dev_time_error_on_synthetic_data() {
    let raw = SyntheticSource::markov_mixture().generate(4000, 1_600_000_000, 8).unwrap();
    let ds = Dataset::from_raw(raw, DatasetConfig { min_count: 1, ..Default::default() }).unwrap();
    let data = TrainData::from_dataset(&ds);
    let mut model = model_for(&ds, RecipientMode::MultiClass);
    let mut log = TrainLog::default();
    let cfg = TrainConfig { lr: 1e-2, batch: 4, max_epochs: 15, patience: 3, seed: 1, ..Default::default() };
    let r = train_stage(&mut model, &data, &cfg, Stage::ALL_GROUPS, &mut log).unwrap();
    let first = log.records()[0].dev_tau_nll;
    let best = log.records()[r.best_epoch].dev_tau_nll;
    assert!(r.best_criterion < log.records()[0].criterion);
    assert!(best < first, "{best} vs {first}");
}

#[test]
fn divergence_returns_last_good_weights() {
    let ds = ecorp_dataset(1500, 6);
    let mut data = TrainData::from_dataset(&ds);
    data.norm = NormStats { mean_log_tau: 0.0, std_log_tau: 1e-300 };
    let model = model_for(&ds, RecipientMode::MultiClass);
    let err = staged_train(model.clone(), &data, &quick_cfg()).unwrap_err();
    assert!(matches!(err.error, crate::Error::Diverged { stage: 1, .. }), "{}", err.error);
    assert_eq!(err.last_good, model);
}

#[test]
fn config_validation() {
    assert!(TrainConfig { patience: 0, ..Default::default() }.validate().is_err());
    assert!(TrainConfig { lr: 0.0, ..Default::default() }.validate().is_err());
    assert!(TrainConfig::default().validate().is_ok());
    let t: TrainConfig = toml::from_str("lr = 0.01\npoint = \"mean\"").unwrap();
    assert_eq!(t.point, PointEstimate::Mean);
    assert!(toml::from_str::<TrainConfig>("learning_rate = 0.01").is_err());
}
