use std::io::{self, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use dmn_core::sampling::{Clock, Generator, StreamState, SystemClock};
use dmn_core::threads::{EmailRecord, EngineState};
use dmn_core::Error;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::files;
use crate::generate::{checkpoint_path, engine_seed, ThreadInputs};
use crate::train::load_checkpoint;

#[derive(Clone, Debug, Default)]
pub struct ServeArgs {
    pub checkpoint: Option<PathBuf>,
    /// `host:port` to listen on; stdout when absent.
    pub endpoint: Option<String>,
    pub state: Option<PathBuf>,
    /// Ignore an existing state file.
    pub fresh: bool,
    pub max_events: Option<u64>,
}

/// Everything needed to pick a stopped stream back up.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResumeState {
    pub vocab_fingerprint: String,
    pub emitted: u64,
    pub stream: StreamState<f64>,
    pub engine: EngineState,
}

enum Sink {
    Stdout(io::Stdout),
    Clients(Arc<Mutex<Vec<TcpStream>>>),
}

impl Sink {
    fn open(endpoint: Option<&str>) -> CliResult<Self> {
        let Some(addr) = endpoint else { return Ok(Sink::Stdout(io::stdout())) };
        let listener = TcpListener::bind(addr).map_err(|e| CliError::Usage(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::io(addr, e))?;
        eprintln!("listening on {local}");
        let clients = Arc::new(Mutex::new(Vec::new()));
        let c = clients.clone();
        std::thread::spawn(move || {
            for s in listener.incoming().flatten() {
                c.lock().expect("client list").push(s);
            }
        });
        Ok(Sink::Clients(clients))
    }

    fn send(&mut self, line: &str) -> CliResult<()> {
        match self {
            Sink::Stdout(out) => {
                let mut o = out.lock();
                writeln!(o, "{line}").and_then(|_| o.flush()).map_err(|e| CliError::io("<stdout>", e))
            }
            Sink::Clients(c) => {
                let mut list = c.lock().expect("client list");
                // drop clients that went away
                list.retain_mut(|s| writeln!(s, "{line}").and_then(|_| s.flush()).is_ok());
                Ok(())
            }
        }
    }
}

/// Runs one live stream of emails until interrupted or `max_events` is reached,
/// then writes the resume state. Returns the number of emails emitted in this run.
pub fn serve(cfg: &RunConfig, args: &ServeArgs, stop: Arc<AtomicBool>) -> CliResult<u64> {
    let ck_path = checkpoint_path(cfg, args.checkpoint.as_deref());
    let ck = load_checkpoint(&ck_path)?;
    let tz = cfg.generate.tz_offset_minutes.unwrap_or(ck.tz_offset_minutes);
    let gen = Generator::<f64>::from_checkpoint(&ck)?.with_tz_offset(tz);
    let inputs = ThreadInputs::load(cfg, &ck, &ck_path)?;
    let mut engine = inputs.engine(cfg, engine_seed(cfg.generate.seed, 0))?;
    let state_path = args.state.clone().unwrap_or_else(|| cfg.output_dir.join(files::SERVE_STATE));
    let mut clock = SystemClock;
    let now_s = (clock.now_ms() + 999) / 1000;

    let (mut stream, mut emitted) = if state_path.is_file() && !args.fresh {
        let r: ResumeState = files::read_json(&state_path)?;
        if r.vocab_fingerprint != ck.vocab_fingerprint {
            return Err(Error::Mismatch(format!("{} belongs to a different vocabulary", state_path.display())).into());
        }
        engine.restore(r.engine);
        let mut s = r.stream;
        // time spent stopped is skipped rather than replayed
        s.last_timestamp = s.last_timestamp.max(now_s);
        eprintln!("resuming after {} emails", r.emitted);
        (s, r.emitted)
    } else {
        (gen.start(cfg.generate.seed, 0, now_s), 0)
    };
    let mut sink = Sink::open(args.endpoint.as_deref())?;
    if let Some(p) = state_path.parent() {
        files::create_dir(p)?;
    }

    let mut sent = 0u64;
    let mut saved = (stream.clone(), engine.state());
    while !stop.load(Ordering::SeqCst) && args.max_events.map_or(true, |m| sent < m) {
        let ev = gen.step(&mut stream)?;
        let email = engine.process(&ev)?;
        let line = serde_json::to_string(&EmailRecord::from_email(&email, &ck.vocab))?;
        let due = ev.timestamp.saturating_mul(1000);
        while clock.now_ms() < due && !stop.load(Ordering::SeqCst) {
            let t = due.min(clock.now_ms() + 50);
            clock.sleep_until_ms(t);
        }
        if stop.load(Ordering::SeqCst) {
            break;
        }
        sink.send(&line)?;
        sent += 1;
        emitted += 1;
        saved = (stream.clone(), engine.state());
    }
    let (stream, engine_state) = saved;
    files::write_json(&state_path, &ResumeState { vocab_fingerprint: ck.vocab_fingerprint.clone(), emitted, stream, engine: engine_state })?;
    eprintln!("stopped after {sent} emails; state saved to {}", state_path.display());
    Ok(sent)
}
