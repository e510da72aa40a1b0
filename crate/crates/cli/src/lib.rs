//! Command-line front end: ingest, train, generate, evaluate and serve, each
//! driven by one TOML run configuration.

pub mod config;
pub mod error;
pub mod evaluate;
pub mod files;
pub mod generate;
pub mod serve;
pub mod train;

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dmn_core::data::{write_event_log, LogFormat};
use dmn_core::fixtures::SyntheticSource;

pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "dmn", version, about = "Train, sample and evaluate a neural point-process model of email traffic")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FixtureName {
    /// Five executives with mutually exclusive recipient sets.
    Ecorp,
    /// Three senders with sticky Markov turns and a two-component gap law.
    Markov,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic event log with a known generating law.
    Fixture {
        #[arg(value_enum)]
        name: FixtureName,
        #[arg(long, default_value_t = 5000)]
        events: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Epoch seconds of the first gap's origin.
        #[arg(long, default_value_t = 1_577_836_800)]
        start: i64,
        /// Output path; `.jsonl` selects JSON lines, anything else CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and split the event log, print a summary.
    Ingest(Common),
    /// Staged training; writes checkpoints, the epoch log and thread-engine inputs.
    Train(Common),
    /// Sample independent event streams, optionally threaded into emails.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        events: Option<usize>,
        /// Also write threaded emails (JSONL and mbox).
        #[arg(long)]
        emails: bool,
        /// Stream one trial live to stdout at wall-clock pace.
        #[arg(long, conflicts_with = "trials")]
        realtime: bool,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare generated streams with the training split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Directory written by `generate` (defaults to the output directory).
        #[arg(long)]
        generated: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write Q-Q and histogram figures.
        #[arg(long)]
        svg: bool,
    },
    /// Emit emails live until interrupted; state is saved for resuming.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Listen on `host:port` and send to every connected client instead of stdout.
        #[arg(long)]
        endpoint: Option<String>,
        /// Resume file (defaults to `serve_state.json` in the output directory).
        #[arg(long)]
        state: Option<PathBuf>,
        /// Start a new stream even if a resume file exists.
        #[arg(long)]
        fresh: bool,
        #[arg(long)]
        max_events: Option<u64>,
    },
}

fn load(c: &Common) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fixture { name, events, seed, start, out } => {
            let src = match name {
                FixtureName::Ecorp => SyntheticSource::ecorp(),
                FixtureName::Markov => SyntheticSource::markov_mixture(),
            };
            let log = src.generate(events, start, seed)?;
            Ok(write_event_log(&out, &log, LogFormat::from_path(&out))?)
        }
        Command::Ingest(c) => train::ingest(&load(&c)?).map(drop),
        Command::Train(c) => train::train(&load(&c)?).map(drop),
        Command::Generate { common, trials, events, emails, realtime, checkpoint } => {
            let args = generate::GenerateArgs { trials, events, emails, realtime, checkpoint };
            generate::generate(&load(&common)?, &args).map(drop)
        }
        Command::Evaluate { common, generated, checkpoint, svg } => {
            evaluate::evaluate(&load(&common)?, &evaluate::EvaluateArgs { generated, checkpoint, svg }).map(drop)
        }
        Command::Serve { common, checkpoint, endpoint, state, fresh, max_events } => {
            let cfg = load(&common)?;
            let stop = Arc::new(AtomicBool::new(false));
            let flag = stop.clone();
            ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst))
                .map_err(|e| CliError::Usage(format!("cannot install signal handler: {e}")))?;
            serve::serve(&cfg, &serve::ServeArgs { checkpoint, endpoint, state, fresh, max_events }, stop).map(drop)
        }
    }
}
