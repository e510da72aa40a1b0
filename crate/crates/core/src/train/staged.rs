use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{evaluate_validation, EpochRecord, TrainConfig, TrainLog, ValidationMetrics};
use crate::autodiff::{Adam, Gradients, ParamStore};
use crate::data::{Dataset, NormStats, Sequence, Split};
use crate::error::{Error, Result};
use crate::model::{LogNormMixNet, NllBreakdown, GROUP_ENCODER, GROUP_SENDER, GROUP_TEMPORAL};
use crate::scalar::Real;

/// Train and dev sequences plus the training normalization.
#[derive(Clone, Copy, Debug)]
pub struct TrainData<'a> {
    pub train: &'a [Sequence],
    pub dev: &'a [Sequence],
    pub norm: NormStats,
}

impl<'a> TrainData<'a> {
    pub fn from_dataset(ds: &'a Dataset) -> Self {
        Self { train: ds.split(Split::Train), dev: ds.split(Split::Dev), norm: *ds.norm() }
    }
}

/// What a stage optimizes and which groups it leaves alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stage {
    pub index: u8,
    pub frozen: &'static [&'static str],
}

impl Stage {
    pub const ALL_GROUPS: Stage = Stage { index: 1, frozen: &[] };
    pub const MARKS: Stage = Stage { index: 2, frozen: &[GROUP_TEMPORAL, GROUP_ENCODER] };
    pub const RECIPIENT: Stage = Stage { index: 3, frozen: &[GROUP_TEMPORAL, GROUP_ENCODER, GROUP_SENDER] };

    /// Dev selection criterion, lower is better.
    pub fn criterion(&self, m: &ValidationMetrics) -> f64 {
        match self.index {
            1 => m.time_rmse,
            2 => m.sender_nll + m.recipient_nll,
            _ => m.recipient_nll,
        }
    }

    pub fn schedule(cfg: &TrainConfig) -> Vec<Stage> {
        let mut v = vec![Stage::ALL_GROUPS, Stage::MARKS];
        if cfg.stage3_enabled {
            v.push(Stage::RECIPIENT);
        }
        v
    }
}

#[derive(Clone, Debug)]
pub struct StageReport<T> {
    pub stage: u8,
    pub best_epoch: usize,
    pub best_criterion: f64,
    pub epochs_run: usize,
    /// Weights restored at the end of the stage.
    pub model: LogNormMixNet<T>,
}

#[derive(Clone, Debug)]
pub struct Trained<T> {
    pub model: LogNormMixNet<T>,
    pub log: TrainLog,
    pub stages: Vec<StageReport<T>>,
}

/// A run that stopped on a non-finite loss or gradient. `last_good` holds the
/// best weights of the failing stage, or its starting weights.
#[derive(Debug)]
pub struct TrainFailure<T> {
    pub error: Error,
    pub last_good: LogNormMixNet<T>,
    pub log: TrainLog,
    pub stages: Vec<StageReport<T>>,
}

impl<T> fmt::Display for TrainFailure<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl<T: fmt::Debug> std::error::Error for TrainFailure<T> {}

impl<T> From<TrainFailure<T>> for Error {
    fn from(f: TrainFailure<T>) -> Self {
        f.error
    }
}

fn restore<T: Real>(store: &mut ParamStore<T>, snapshot: &ParamStore<T>) {
    let frozen: Vec<(String, bool)> = store.groups().iter().map(|g| (g.name.clone(), g.frozen)).collect();
    *store = snapshot.clone();
    for (name, f) in frozen {
        store.set_frozen(&name, f).expect("group exists");
    }
}

/// One pass over the training sequences in a seeded order. Gradients are summed
/// over each batch in sequence order and divided by its event count.
fn run_epoch<T: Real>(
    model: &mut LogNormMixNet<T>,
    adam: &mut Adam<T>,
    data: &TrainData<'_>,
    batch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<NllBreakdown<f64>> {
    let mut order: Vec<usize> = (0..data.train.len()).filter(|&i| !data.train[i].is_empty()).collect();
    order.shuffle(rng);
    let mut total = NllBreakdown::<f64>::default();
    let mut grads = Gradients::for_store(model.params());
    for chunk in order.chunks(batch) {
        let m = &*model;
        let parts: Vec<(Gradients<T>, NllBreakdown<T>)> = chunk
            .par_iter()
            .map(|&i| {
                let mut g = Gradients::for_store(m.params());
                let l = m.accumulate_gradients(&data.train[i].events, &data.norm, &mut g)?;
                Ok((g, l))
            })
            .collect::<Result<_>>()?;
        grads.zero();
        let mut events = 0;
        for (g, l) in &parts {
            grads.add_from(g);
            events += l.events;
            let l = NllBreakdown {
                tau: l.tau.to_f64_lossy(),
                sender: l.sender.to_f64_lossy(),
                recipient: l.recipient.to_f64_lossy(),
                total: l.total.to_f64_lossy(),
                events: l.events,
            };
            if !l.total.is_finite() {
                return Err(Error::Contract("non-finite training loss".into()));
            }
            total.merge(&l);
        }
        grads.scale(T::one() / T::of(events as f64));
        adam.step(model.params_mut(), &grads)?;
    }
    Ok(total.per_event())
}

fn record(stage: u8, epoch: usize, train: Option<&NllBreakdown<f64>>, dev: &ValidationMetrics, criterion: f64, best: bool) -> EpochRecord {
    let nan = f64::NAN;
    EpochRecord {
        stage,
        epoch,
        train_tau_nll: train.map_or(nan, |t| t.tau),
        train_sender_nll: train.map_or(nan, |t| t.sender),
        train_recipient_nll: train.map_or(nan, |t| t.recipient),
        train_total_nll: train.map_or(nan, |t| t.total),
        dev_tau_nll: dev.tau_nll,
        dev_sender_nll: dev.sender_nll,
        dev_recipient_nll: dev.recipient_nll,
        dev_total_nll: dev.total_nll,
        dev_time_rmse: dev.time_rmse,
        dev_time_mae: dev.time_mae,
        dev_sender_top1: dev.sender_top1,
        dev_sender_top3: dev.sender_top3,
        dev_recipient_top1: dev.recipient_top1,
        dev_recipient_top3: dev.recipient_top3,
        criterion,
        best,
    }
}

/// Runs one stage in place. On failure the model holds the stage's best weights.
pub fn train_stage<T: Real>(
    model: &mut LogNormMixNet<T>,
    data: &TrainData<'_>,
    cfg: &TrainConfig,
    stage: Stage,
    log: &mut TrainLog,
) -> Result<StageReport<T>> {
    model.params_mut().unfreeze_all();
    for g in stage.frozen {
        model.params_mut().set_frozen(g, true)?;
    }
    let mut adam = Adam::new(T::of(cfg.lr));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::from(stage.index));

    let dev = evaluate_validation(model, data.dev, &data.norm, cfg.point)?;
    let mut best = stage.criterion(&dev);
    if !best.is_finite() {
        return Err(Error::Diverged { stage: stage.index, epoch: 0 });
    }
    log.push(record(stage.index, 0, None, &dev, best, true));
    let mut snapshot = model.params().clone();
    let (mut best_epoch, mut reference, mut stall, mut epochs_run) = (0, best, 0, 0);

    for epoch in 1..=cfg.max_epochs {
        let step = run_epoch(model, &mut adam, data, cfg.batch, &mut rng);
        let outcome = step.and_then(|train| {
            let dev = evaluate_validation(model, data.dev, &data.norm, cfg.point)?;
            let c = stage.criterion(&dev);
            if !c.is_finite() || !model.params().all_finite() {
                return Err(Error::Contract("non-finite dev criterion".into()));
            }
            Ok((train, dev, c))
        });
        let (train, dev, c) = match outcome {
            Ok(v) => v,
            Err(e) => {
                restore(model.params_mut(), &snapshot);
                return Err(match e {
                    Error::NonFiniteGradient { .. } => e,
                    _ => Error::Diverged { stage: stage.index, epoch },
                });
            }
        };
        epochs_run = epoch;
        let improved = c < best;
        if improved {
            best = c;
            best_epoch = epoch;
            snapshot = model.params().clone();
        }
        if c < reference - cfg.min_delta {
            reference = c;
            stall = 0;
        } else {
            stall += 1;
        }
        log.push(record(stage.index, epoch, Some(&train), &dev, c, improved));
        if epoch >= cfg.min_epochs && stall >= cfg.patience {
            break;
        }
    }
    restore(model.params_mut(), &snapshot);
    Ok(StageReport { stage: stage.index, best_epoch, best_criterion: best, epochs_run, model: model.clone() })
}

/// Full staged schedule: all groups on dev time RMSE, then sender and recipient
/// heads with the temporal and encoder groups frozen, then optionally the
/// recipient head alone.
pub fn staged_train<T: Real>(
    mut model: LogNormMixNet<T>,
    data: &TrainData<'_>,
    cfg: &TrainConfig,
) -> std::result::Result<Trained<T>, Box<TrainFailure<T>>> {
    let mut log = TrainLog::default();
    let mut stages = Vec::new();
    let check = cfg.validate().and_then(|_| {
        if data.train.iter().all(Sequence::is_empty) || data.dev.iter().all(Sequence::is_empty) {
            Err(Error::Data("train and dev splits must both contain events".into()))
        } else {
            Ok(())
        }
    });
    if let Err(error) = check {
        return Err(Box::new(TrainFailure { error, last_good: model, log, stages }));
    }
    for stage in Stage::schedule(cfg) {
        match train_stage(&mut model, data, cfg, stage, &mut log) {
            Ok(r) => stages.push(r),
            Err(error) => {
                model.params_mut().unfreeze_all();
                return Err(Box::new(TrainFailure { error, last_good: model, log, stages }));
            }
        }
    }
    model.params_mut().unfreeze_all();
    Ok(Trained { model, log, stages })
}
