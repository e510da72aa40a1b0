use std::path::{Path, PathBuf};

use dmn_core::data::{derive_metadata_class, Split, Vocabularies};
use dmn_core::eval::{
    coherence_of_records, histogram_svg, observed_split, qq_points, qq_svg, Distributions, EvalReport, Observed, TrialReport,
};
use dmn_core::sampling::{SampledEvent, StreamRecord};
use dmn_core::threads::EmailRecord;
use dmn_core::train::evaluate_validation;
use dmn_core::{Error, Net};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::files;
use crate::generate::checkpoint_path;
use crate::train::{load_checkpoint, load_dataset};

#[derive(Clone, Debug, Default)]
pub struct EvaluateArgs {
    /// Root of a `generate` output (holding `streams/` and maybe `emails/`).
    pub generated: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub svg: bool,
}

/// Q-Q plot resolution.
const QQ_POINTS: usize = 99;

/// Maps a stream line back to ids; recipient sets outside the vocabulary stay `None`.
pub fn event_from_record(r: &StreamRecord, vocab: &Vocabularies, tz: i32) -> Result<SampledEvent, Error> {
    let id = |l: &str| vocab.nodes.id(l).ok_or_else(|| Error::Data(format!("unknown node `{l}` in generated stream")));
    let sender = id(&r.sender)?;
    let recipients = r.recipients.iter().map(|l| id(l)).collect::<Result<Vec<_>, _>>()?;
    Ok(SampledEvent {
        timestamp: r.ts,
        tau: r.tau_h,
        sender,
        recipient_set: vocab.set_id_of_members(&recipients),
        recipients,
        metadata: derive_metadata_class(r.ts, tz),
    })
}

pub fn evaluate(cfg: &RunConfig, args: &EvaluateArgs) -> CliResult<EvalReport> {
    let ck = load_checkpoint(&checkpoint_path(cfg, args.checkpoint.as_deref()))?;
    let ds = load_dataset(cfg)?;
    if ds.vocab.fingerprint() != ck.vocab_fingerprint {
        return Err(Error::Mismatch("reference dataset vocabulary differs from the checkpoint's".into()).into());
    }
    let root = args.generated.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let stream_files = files::list(&root.join(files::STREAMS), "jsonl")?;
    if stream_files.is_empty() {
        return Err(crate::error::CliError::Usage(format!("no generated streams under {}", root.join(files::STREAMS).display())));
    }
    let tz = cfg.generate.tz_offset_minutes.unwrap_or(ck.tz_offset_minutes);
    let reference = observed_split(&ds, Split::Train);
    let streams: Vec<Vec<SampledEvent>> = stream_files
        .par_iter()
        .map(|p| -> CliResult<Vec<SampledEvent>> {
            let recs: Vec<StreamRecord> = files::read_jsonl(p)?;
            Ok(recs.iter().map(|r| event_from_record(r, &ck.vocab, tz)).collect::<Result<_, _>>()?)
        })
        .collect::<CliResult<_>>()?;
    let trials = streams
        .par_iter()
        .enumerate()
        .map(|(i, s)| TrialReport::evaluate(i as u64, s, &reference, &ck.vocab, tz))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = EvalReport::from_trials(trials, tz)?;

    if ds.event_count(Split::Test) > 0 {
        let model: Net = ck.to_model()?;
        report.prediction = Some(evaluate_validation(&model, ds.split(Split::Test), &ck.norm, cfg.train.point)?);
    }
    let email_dir = root.join(files::EMAILS);
    if email_dir.is_dir() {
        let mut all = Vec::new();
        for (t, p) in files::list(&email_dir, "jsonl")?.iter().enumerate() {
            let mut recs: Vec<EmailRecord> = files::read_jsonl(p)?;
            // thread ids restart in every trial
            recs.iter_mut().for_each(|r| r.thread_id += (t as u64) << 40);
            all.extend(recs);
        }
        if !all.is_empty() {
            report.coherence = Some(coherence_of_records(&all));
        }
    }

    let out = &cfg.output_dir;
    files::create_dir(out)?;
    files::write_text(&out.join("report.json"), &(report.to_json()? + "\n"))?;
    files::write_text(&out.join("report_summary.csv"), &report.summary_csv()?)?;
    files::write_text(&out.join("report_trials.csv"), &report.trials_csv()?)?;
    if args.svg {
        write_figures(out, &streams[0], &reference, &ck.vocab, tz)?;
    }
    let s = &report.summary;
    eprintln!(
        "EMD over {} trial(s): tau {:.4} h, hour {:.3}, weekday {:.3}, sender {:.3}, recipient set {:.3}, size {:.4}; invalid sets {:.4}",
        report.trials.len(),
        s.tau.mean,
        s.hour.mean,
        s.weekday.mean,
        s.sender.mean,
        s.recipient_set.mean,
        s.hyperedge.mean,
        s.invalid_set_rate.mean
    );
    Ok(report)
}

fn write_figures(out: &Path, first: &[SampledEvent], reference: &[Observed], vocab: &Vocabularies, tz: i32) -> CliResult<()> {
    let gen: Vec<Observed> = first.iter().map(Observed::from).collect();
    let (n, r) = (vocab.n_nodes(), vocab.n_sets());
    let g = Distributions::of(&gen, n, r, tz)?;
    let f = Distributions::of(reference, n, r, tz)?;
    if !g.taus.is_empty() {
        let pts = qq_points(&g.taus, &f.taus, QQ_POINTS)?;
        files::write_text(&out.join("qq_tau.svg"), &qq_svg(&pts, "Inter-arrival Q-Q (hours)"))?;
    }
    files::write_text(&out.join("hour_of_day.svg"), &histogram_svg(&f.hour, &g.hour, "Hour of day"))?;
    files::write_text(&out.join("day_of_week.svg"), &histogram_svg(&f.weekday, &g.weekday, "Day of week"))?;
    Ok(())
}
