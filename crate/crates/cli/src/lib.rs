//! Helpers shared by the command-line tools.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use baitmail_core::archive::{parse_time, MetricsReport};
use chrono::{DateTime, Utc};

/// Exit code when inputs were skipped but the run otherwise succeeded.
pub const EXIT_SKIPPED: i32 = 2;

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Accepts RFC 3339 or the transcript layout `YYYY-MM-DD HH:MM:SS` (UTC).
pub fn parse_end(raw: &str) -> Result<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Ok(t.with_timezone(&Utc));
    }
    parse_time(raw).ok_or_else(|| anyhow!("`{raw}` is neither RFC 3339 nor `YYYY-MM-DD HH:MM:SS`"))
}

/// Plain-text table of per-strategy reports.
pub fn metrics_table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a MetricsReport)>) -> String {
    let mut out = format!(
        "{:<24} {:>9} {:>8} {:>11} {:>8} {:>12}  {}\n",
        "strategy", "attempted", "engaged", "valid conv.", "replies", "avg replies", "longest distraction"
    );
    for (name, r) in rows {
        out.push_str(&format!(
            "{:<24} {:>9} {:>8} {:>11} {:>8} {:>12}  {}\n",
            name,
            r.attempted_targets,
            r.engaged_targets,
            r.conversations_valid,
            r.replies,
            r.avg_replies_display.as_deref().unwrap_or("-"),
            r.longest_distraction
        ));
    }
    out
}
