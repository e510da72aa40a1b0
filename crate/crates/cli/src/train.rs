use std::path::Path;

use dmn_core::data::{Dataset, Split};
use dmn_core::model::Checkpoint;
use dmn_core::threads::{build_profiles, SenderProfile};
use dmn_core::train::{evaluate_validation, staged_train, TrainData, ValidationMetrics};
use dmn_core::Net;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::files;

/// Thread-engine inputs saved next to the checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfilesFile {
    pub vocab_fingerprint: String,
    pub profiles: Vec<SenderProfile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub nodes: usize,
    pub recipient_sets: usize,
    pub events: [usize; 3],
    pub sequences: [usize; 3],
    pub rare_set_events_dropped: usize,
    pub duplicates_dropped: usize,
    pub self_sends_dropped: usize,
    pub mean_log_tau: f64,
    pub std_log_tau: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: u8,
    pub best_epoch: usize,
    pub best_criterion: f64,
    pub epochs_run: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub dataset: DatasetSummary,
    pub stages: Vec<StageSummary>,
    pub dev: ValidationMetrics,
    pub test: Option<ValidationMetrics>,
}

pub fn load_dataset(cfg: &RunConfig) -> CliResult<Dataset> {
    let path = cfg.data_path()?;
    Ok(Dataset::load(path, cfg.data_format()?, cfg.dataset.clone())?)
}

pub fn summarize(ds: &Dataset) -> DatasetSummary {
    let splits = [Split::Train, Split::Dev, Split::Test];
    DatasetSummary {
        nodes: ds.vocab.n_nodes(),
        recipient_sets: ds.vocab.n_sets(),
        events: splits.map(|s| ds.event_count(s)),
        sequences: splits.map(|s| ds.split(s).len()),
        rare_set_events_dropped: ds.vocab.sets.dropped_event_count,
        duplicates_dropped: ds.duplicates_dropped,
        self_sends_dropped: ds.self_sends_dropped,
        mean_log_tau: ds.norm().mean_log_tau,
        std_log_tau: ds.norm().std_log_tau,
    }
}

/// Training-split subjects and bodies, one sample per line.
pub fn training_corpus(ds: &Dataset) -> Vec<String> {
    let flat = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    ds.raw_events(Split::Train)
        .into_iter()
        .flat_map(|e| [e.subject.as_deref(), e.body.as_deref()])
        .flatten()
        .map(flat)
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn ingest(cfg: &RunConfig) -> CliResult<DatasetSummary> {
    let ds = load_dataset(cfg)?;
    let summary = summarize(&ds);
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(summary)
}

pub fn train(cfg: &RunConfig) -> CliResult<TrainSummary> {
    let ds = load_dataset(cfg)?;
    let out = &cfg.output_dir;
    files::create_dir(out)?;

    let mut mc = cfg.model.clone();
    mc.n_nodes = ds.vocab.n_nodes();
    mc.n_recipient_sets = ds.vocab.n_sets();
    let members = (0..ds.vocab.n_sets()).map(|i| ds.vocab.members(i).to_vec()).collect();
    let model = Net::new(mc, members)?;
    let tz = cfg.dataset.tz_offset_minutes;
    let modes = ds.sender_mode_sets();
    let save = |m: &Net, name: &str| -> CliResult<()> {
        Ok(Checkpoint::from_model(m, &ds.vocab, ds.norm(), tz).with_sender_modes(modes.clone()).save(&out.join(name))?)
    };

    let data = TrainData::from_dataset(&ds);
    let trained = match staged_train(model, &data, &cfg.train) {
        Ok(t) => t,
        Err(f) => {
            f.log.write_csv(&out.join(files::TRAIN_LOG))?;
            save(&f.last_good, "checkpoint_failed.json")?;
            return Err(f.error.into());
        }
    };
    for st in &trained.stages {
        save(&st.model, &files::stage_checkpoint(st.stage))?;
    }
    save(&trained.model, files::CHECKPOINT)?;
    trained.log.write_csv(&out.join(files::TRAIN_LOG))?;

    let profiles = build_profiles(&ds.raw_events(Split::Train), &ds.vocab, &cfg.threads)?;
    files::write_json(&out.join(files::PROFILES), &ProfilesFile { vocab_fingerprint: ds.vocab.fingerprint(), profiles })?;
    let mut corpus = training_corpus(&ds).join("\n");
    corpus.push('\n');
    files::write_text(&out.join(files::CORPUS), &corpus)?;

    let norm = ds.norm();
    let dev = evaluate_validation(&trained.model, ds.split(Split::Dev), norm, cfg.train.point)?;
    let test = if ds.event_count(Split::Test) > 0 {
        Some(evaluate_validation(&trained.model, ds.split(Split::Test), norm, cfg.train.point)?)
    } else {
        None
    };
    let summary = TrainSummary {
        dataset: summarize(&ds),
        stages: trained
            .stages
            .iter()
            .map(|s| StageSummary { stage: s.stage, best_epoch: s.best_epoch, best_criterion: s.best_criterion, epochs_run: s.epochs_run })
            .collect(),
        dev,
        test,
    };
    files::write_json(&out.join(files::METRICS), &summary)?;
    for s in &summary.stages {
        eprintln!("stage {}: best epoch {} of {}, criterion {:.4}", s.stage, s.best_epoch, s.epochs_run, s.best_criterion);
    }
    eprintln!(
        "dev: time RMSE {:.3} h, sender top-1 {:.3}, recipient top-1 {:.3} / top-3 {:.3}",
        dev.time_rmse, dev.sender_top1, dev.recipient_top1, dev.recipient_top3
    );
    Ok(summary)
}

/// Loads a checkpoint that must exist.
pub fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    if !path.is_file() {
        return Err(crate::error::CliError::Usage(format!("checkpoint not found: {}", path.display())));
    }
    Ok(Checkpoint::load(path)?)
}
