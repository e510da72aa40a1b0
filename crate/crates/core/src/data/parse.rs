use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One logged communication before vocabulary mapping.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEvent {
    /// UTC epoch seconds.
    pub timestamp: i64,
    pub sender: String,
    pub recipients: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Csv,
    Jsonl,
}

impl LogFormat {
    /// Guess from the file extension; anything but `.jsonl`/`.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") | Some("ndjson") => LogFormat::Jsonl,
            _ => LogFormat::Csv,
        }
    }
}

impl FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(LogFormat::Csv),
            "jsonl" => Ok(LogFormat::Jsonl),
            other => Err(format!("unknown log format `{other}`")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParsedLog {
    pub events: Vec<RawEvent>,
    pub duplicates_dropped: usize,
    pub self_sends_dropped: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Recipients {
    List(Vec<String>),
    Joined(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    timestamp: i64,
    sender: String,
    recipients: Recipients,
    #[serde(default)]
    subject: Option<String>,
    #[serde(default)]
    body: Option<String>,
}

fn split_recipients(s: &str) -> BTreeSet<String> {
    s.split(';').map(str::trim).filter(|r| !r.is_empty()).map(str::to_string).collect()
}

/// Reads a CSV (`timestamp,sender,recipients[,subject,body]`, recipients
/// `;`-separated) or JSONL log. The result is sorted by timestamp, with the sender
/// removed from its own recipient list, self-only rows dropped and exact
/// `(timestamp, sender, recipients)` duplicates collapsed.
pub fn parse_event_log(path: &Path, format: LogFormat) -> Result<ParsedLog> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let rows = match format {
        LogFormat::Csv => read_csv(path, file)?,
        LogFormat::Jsonl => read_jsonl(path, file)?,
    };
    if rows.is_empty() {
        return Err(Error::EmptyLog(path.to_path_buf()));
    }
    Ok(clean(rows))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

fn read_csv(path: &Path, file: File) -> Result<Vec<RawEvent>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(BufReader::new(file));
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(ts_col), Some(sender_col), Some(rcpt_col)) = (col("timestamp"), col("sender"), col("recipients"))
    else {
        return Err(parse_err(path, 1, "header must contain timestamp,sender,recipients"));
    };
    for h in headers.iter() {
        if !matches!(h.trim(), "timestamp" | "sender" | "recipients" | "subject" | "body") {
            return Err(parse_err(path, 1, format!("unknown column `{h}`")));
        }
    }
    let (subject_col, body_col) = (col("subject"), col("body"));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let ts = rec[ts_col]
            .trim()
            .parse::<i64>()
            .map_err(|_| parse_err(path, line, format!("bad timestamp `{}`", &rec[ts_col])))?;
        let sender = rec[sender_col].trim().to_string();
        if sender.is_empty() {
            return Err(parse_err(path, line, "empty sender"));
        }
        let recipients = split_recipients(&rec[rcpt_col]);
        if recipients.is_empty() {
            return Err(parse_err(path, line, "empty recipient list"));
        }
        let text = |c: Option<usize>| c.map(|c| rec[c].to_string()).filter(|s| !s.is_empty());
        out.push(RawEvent { timestamp: ts, sender, recipients, subject: text(subject_col), body: text(body_col) });
    }
    Ok(out)
}

fn read_jsonl(path: &Path, file: File) -> Result<Vec<RawEvent>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(&line).map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        let recipients = match row.recipients {
            Recipients::List(v) => v.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            Recipients::Joined(s) => split_recipients(&s),
        };
        if row.sender.trim().is_empty() || recipients.is_empty() {
            return Err(parse_err(path, i + 1, "empty sender or recipient list"));
        }
        out.push(RawEvent {
            timestamp: row.timestamp,
            sender: row.sender.trim().to_string(),
            recipients,
            subject: row.subject,
            body: row.body,
        });
    }
    Ok(out)
}

fn clean(rows: Vec<RawEvent>) -> ParsedLog {
    let mut log = ParsedLog::default();
    let mut seen = HashSet::new();
    for mut ev in rows {
        if ev.recipients.remove(&ev.sender) && ev.recipients.is_empty() {
            log.self_sends_dropped += 1;
            continue;
        }
        if !seen.insert((ev.timestamp, ev.sender.clone(), ev.recipients.clone())) {
            log.duplicates_dropped += 1;
            continue;
        }
        log.events.push(ev);
    }
    // Stable: rows sharing a timestamp keep file order.
    log.events.sort_by_key(|e| e.timestamp);
    log
}

pub fn write_event_log(path: &Path, events: &[RawEvent], format: LogFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    match format {
        LogFormat::Csv => {
            let with_text = events.iter().any(|e| e.subject.is_some() || e.body.is_some());
            let mut cw = csv::Writer::from_writer(&mut w);
            let mut header = vec!["timestamp", "sender", "recipients"];
            if with_text {
                header.extend(["subject", "body"]);
            }
            cw.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
            for e in events {
                let rcpt = e.recipients.iter().cloned().collect::<Vec<_>>().join(";");
                let mut rec = vec![e.timestamp.to_string(), e.sender.clone(), rcpt];
                if with_text {
                    rec.push(e.subject.clone().unwrap_or_default());
                    rec.push(e.body.clone().unwrap_or_default());
                }
                cw.write_record(&rec).map_err(|e| Error::Data(e.to_string()))?;
            }
            cw.flush().map_err(io)?;
        }
        LogFormat::Jsonl => {
            for e in events {
                serde_json::to_writer(&mut w, e)?;
                w.write_all(b"\n").map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(contents: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_row() {
        let f = write("timestamp,sender,recipients\n1696233600,alice,bob;carol\n", ".csv");
        let log = parse_event_log(f.path(), LogFormat::Csv).unwrap();
        assert_eq!(log.events.len(), 1);
        let e = &log.events[0];
        assert_eq!(e.timestamp, 1_696_233_600);
        assert_eq!(e.sender, "alice");
        assert_eq!(e.recipients, ["bob", "carol"].iter().map(|s| s.to_string()).collect());
    }

    #[test]
    fn self_send_dropped_and_sender_stripped() {
        let f = write("timestamp,sender,recipients\n10,alice,alice\n11,alice,alice;bob\n", ".csv");
        let log = parse_event_log(f.path(), LogFormat::Csv).unwrap();
        assert_eq!(log.self_sends_dropped, 1);
        assert_eq!(log.events.len(), 1);
        assert!(!log.events[0].recipients.contains("alice"));
    }

    #[test]
    fn duplicates_collapsed_and_sorted() {
        let f = write("timestamp,sender,recipients\n20,b,a\n10,a,b;c\n10,a,c;b\n", ".csv");
        let log = parse_event_log(f.path(), LogFormat::Csv).unwrap();
        assert_eq!(log.duplicates_dropped, 1);
        assert_eq!(log.events.iter().map(|e| e.timestamp).collect::<Vec<_>>(), vec![10, 20]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let f = write("timestamp,sender,recipients\n10,a,b\nnot-a-number,a,b\n", ".csv");
        match parse_event_log(f.path(), LogFormat::Csv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write("timestamp,sender,recipients\n", ".csv");
        assert!(matches!(parse_event_log(f.path(), LogFormat::Csv), Err(Error::EmptyLog(_))));
        let f = write("", ".jsonl");
        assert!(matches!(parse_event_log(f.path(), LogFormat::Jsonl), Err(Error::EmptyLog(_))));
    }

    #[test]
    fn jsonl_accepts_list_or_joined() {
        let f = write(
            "{\"timestamp\":5,\"sender\":\"a\",\"recipients\":[\"b\",\"c\"]}\n\n{\"timestamp\":6,\"sender\":\"b\",\"recipients\":\"a;c\"}\n",
            ".jsonl",
        );
        let log = parse_event_log(f.path(), LogFormat::Jsonl).unwrap();
        assert_eq!(log.events.len(), 2);
        assert_eq!(log.events[1].recipients.len(), 2);
        let bad = write("{\"timestamp\":5}\n", ".jsonl");
        assert!(matches!(parse_event_log(bad.path(), LogFormat::Jsonl), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn round_trip_both_formats() {
        let f = write(
            "timestamp,sender,recipients,subject,body\n10,a,b;c,Weekly update,\"hello, there\"\n30,c,a,,\n",
            ".csv",
        );
        let log = parse_event_log(f.path(), LogFormat::Csv).unwrap();
        for fmt in [LogFormat::Csv, LogFormat::Jsonl] {
            let out = tempfile::NamedTempFile::new().unwrap();
            write_event_log(out.path(), &log.events, fmt).unwrap();
            assert_eq!(parse_event_log(out.path(), fmt).unwrap().events, log.events);
        }
    }
}
