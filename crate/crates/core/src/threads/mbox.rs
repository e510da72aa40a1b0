use std::io::{self, Write};

use chrono::{DateTime, FixedOffset};

use super::GeneratedEmail;
use crate::error::{Error, Result};

/// Address for a node label; bare labels get `@domain`.
pub fn address(label: &str, domain: &str) -> String {
    if label.contains('@') {
        label.to_string()
    } else {
        format!("{label}@{domain}")
    }
}

fn message_id(id: u64, domain: &str) -> String {
    format!("<{id}@{domain}>")
}

fn local(ts: i64, tz_offset_minutes: i32) -> Result<DateTime<FixedOffset>> {
    let tz = FixedOffset::east_opt(tz_offset_minutes * 60)
        .ok_or_else(|| Error::Config(format!("timezone offset {tz_offset_minutes} min out of range")))?;
    DateTime::from_timestamp(ts, 0)
        .map(|d| d.with_timezone(&tz))
        .ok_or_else(|| Error::Data(format!("timestamp {ts} out of range")))
}

/// Writes one mbox message. Body lines that begin with `From ` are quoted.
pub fn write_mbox_message(
    w: &mut impl Write,
    email: &GeneratedEmail,
    labels: &[String],
    domain: &str,
    tz_offset_minutes: i32,
) -> Result<()> {
    let date = local(email.timestamp, tz_offset_minutes)?;
    let from = address(&labels[email.sender], domain);
    let io = |e: io::Error| Error::Data(format!("mbox write failed: {e}"));
    writeln!(w, "From {from} {}", date.format("%a %b %e %H:%M:%S %Y")).map_err(io)?;
    writeln!(w, "Message-ID: {}", message_id(email.email_id, domain)).map_err(io)?;
    if let Some(parent) = email.in_reply_to {
        writeln!(w, "In-Reply-To: {}", message_id(parent, domain)).map_err(io)?;
    }
    if !email.references.is_empty() {
        let refs: Vec<String> = email.references.iter().map(|&r| message_id(r, domain)).collect();
        writeln!(w, "References: {}", refs.join(" ")).map_err(io)?;
    }
    writeln!(w, "Date: {}", date.to_rfc2822()).map_err(io)?;
    writeln!(w, "From: {} <{from}>", super::display_name(&labels[email.sender])).map_err(io)?;
    let to: Vec<String> = email.recipients.iter().map(|&r| address(&labels[r], domain)).collect();
    writeln!(w, "To: {}", to.join(", ")).map_err(io)?;
    writeln!(w, "Subject: {}", email.subject).map_err(io)?;
    writeln!(w, "X-Thread-ID: {}", email.thread_id).map_err(io)?;
    writeln!(w, "X-Comm-Type: {}", email.comm_type).map_err(io)?;
    writeln!(w).map_err(io)?;
    for line in email.message().lines() {
        if line.starts_with("From ") || line.starts_with(">From ") {
            write!(w, ">").map_err(io)?;
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    Ok(())
}
