use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dmn_core::model::Checkpoint;
use dmn_core::sampling::{generate_stream, spawn_realtime, GenStats, Generator, StreamRecord, SystemClock};
use dmn_core::text::{CannedText, TextProvider};
use dmn_core::threads::{write_mbox_message, EmailRecord, GeneratedEmail, ThreadEngine};
use dmn_core::Error;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::files;
use crate::train::{load_checkpoint, ProfilesFile};

#[derive(Clone, Debug, Default)]
pub struct GenerateArgs {
    pub trials: Option<usize>,
    pub events: Option<usize>,
    pub emails: bool,
    pub realtime: bool,
    pub checkpoint: Option<PathBuf>,
}

/// Checkpoint from an explicit path or the output directory.
pub fn checkpoint_path(cfg: &RunConfig, explicit: Option<&Path>) -> PathBuf {
    explicit.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.join(files::CHECKPOINT))
}

/// Everything the thread engine needs besides the events.
pub struct ThreadInputs {
    pub profiles: ProfilesFile,
    pub provider: Arc<dyn TextProvider>,
    pub labels: Vec<String>,
}

impl ThreadInputs {
    /// Reads profiles and corpus saved beside `checkpoint`, checks the vocabulary
    /// and the provider.
    pub fn load(cfg: &RunConfig, ck: &Checkpoint, checkpoint: &Path) -> CliResult<Self> {
        let dir = checkpoint.parent().unwrap_or(Path::new("."));
        let profiles: ProfilesFile = files::read_json(&dir.join(files::PROFILES))?;
        if profiles.vocab_fingerprint != ck.vocab_fingerprint {
            return Err(Error::Mismatch("sender profiles were built for a different vocabulary".into()).into());
        }
        let corpus_path = dir.join(files::CORPUS);
        let corpus: Vec<String> = match std::fs::read_to_string(&corpus_path) {
            Ok(s) => s.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect(),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(CliError::io(corpus_path, e)),
        };
        let provider = cfg.provider(&corpus);
        provider.check()?;
        Ok(Self { profiles, provider, labels: ck.vocab.nodes.labels().to_vec() })
    }

    pub fn engine(&self, cfg: &RunConfig, seed: u64) -> CliResult<ThreadEngine> {
        Ok(ThreadEngine::new(
            cfg.threads.clone(),
            self.profiles.profiles.clone(),
            &self.labels,
            CannedText::default(),
            self.provider.clone(),
            seed,
        )?)
    }
}

/// Thread-engine seed for one trial.
pub fn engine_seed(seed: u64, trial: u64) -> u64 {
    seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn write_emails(dir: &Path, trial: usize, emails: &[GeneratedEmail], ck: &Checkpoint, cfg: &RunConfig, tz: i32) -> CliResult<()> {
    files::write_jsonl(&dir.join(files::trial_file(trial, "jsonl")), emails.iter().map(|e| EmailRecord::from_email(e, &ck.vocab)))?;
    let path = dir.join(files::trial_file(trial, "mbox"));
    let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(f);
    for e in emails {
        write_mbox_message(&mut w, e, ck.vocab.nodes.labels(), &cfg.threads.domain, tz)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))
}

pub fn generate(cfg: &RunConfig, args: &GenerateArgs) -> CliResult<Vec<GenStats>> {
    let ck_path = checkpoint_path(cfg, args.checkpoint.as_deref());
    let ck = load_checkpoint(&ck_path)?;
    let gen = Generator::<f64>::from_checkpoint(&ck)?;
    let mut gc = cfg.generate.clone();
    if let Some(n) = args.events {
        gc.events = Some(n);
        gc.end_time = None;
    }
    gc.horizon()?;
    let tz = gc.tz_offset_minutes.unwrap_or(ck.tz_offset_minutes);
    if args.realtime {
        return realtime(gen.with_tz_offset(tz), &gc, &ck).map(|s| vec![s]);
    }
    let trials = args.trials.unwrap_or(cfg.trials);
    if trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    let threads = if args.emails || cfg.emails { Some(ThreadInputs::load(cfg, &ck, &ck_path)?) } else { None };
    let streams = cfg.output_dir.join(files::STREAMS);
    let emails_dir = cfg.output_dir.join(files::EMAILS);
    files::create_dir(&streams)?;
    if threads.is_some() {
        files::create_dir(&emails_dir)?;
    }
    let stats = (0..trials)
        .into_par_iter()
        .map(|t| -> CliResult<GenStats> {
            let (events, stats) = generate_stream(&gen, &gc, t as u64)?;
            files::write_jsonl(&streams.join(files::trial_file(t, "jsonl")), events.iter().map(|e| StreamRecord::from_event(e, &ck.vocab)))?;
            if let Some(ti) = &threads {
                let mut engine = ti.engine(cfg, engine_seed(gc.seed, t as u64))?;
                let emails = events.iter().map(|e| engine.process(e)).collect::<Result<Vec<_>, _>>()?;
                write_emails(&emails_dir, t, &emails, &ck, cfg, tz)?;
            }
            Ok(stats)
        })
        .collect::<CliResult<Vec<_>>>()?;
    files::write_json(&cfg.output_dir.join("generate_stats.json"), &stats)?;
    let total: u64 = stats.iter().map(|s| s.events).sum();
    eprintln!("{trials} trial(s), {total} events written to {}", streams.display());
    Ok(stats)
}

/// Streams one trial live to stdout, each event at its timestamp.
fn realtime(gen: Generator<f64>, gc: &dmn_core::sampling::GenConfig, ck: &Checkpoint) -> CliResult<GenStats> {
    let clock = SystemClock;
    let now_s = (dmn_core::sampling::Clock::now_ms(&clock) + 999) / 1000;
    let start = if gc.start_time > 0 { gc.start_time } else { now_s };
    let limit = gc.events.map(|n| n as u64);
    let handle = spawn_realtime(gen.clone(), gen.start(gc.seed, 0, start), clock, limit);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut stats = GenStats::default();
    for item in handle.events.iter() {
        let em = item?;
        let end = gc.end_time.is_some_and(|t| em.event.timestamp > t);
        if end {
            break;
        }
        serde_json::to_writer(&mut out, &StreamRecord::from_event(&em.event, &ck.vocab))?;
        writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::io("<stdout>", e))?;
        stats = em.state.stats;
    }
    handle.shutdown();
    Ok(stats)
}
