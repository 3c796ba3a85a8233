//! Pluggable report feeds.
//!
//! Each adapter keeps an opaque high-water mark. The registry only advances an
//! adapter's mark after every report it returned has been enqueued, so a crash
//! between fetch and enqueue re-delivers instead of losing reports.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::UNIX_EPOCH;

use chrono::{DateTime, Utc};
use log::warn;
use thiserror::Error;

use super::report::ScamReport;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed report {path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("state file error: {0}")]
    State(String),
}

/// A batch returned by one adapter, plus the mark to commit once it is enqueued.
#[derive(Debug, Clone, PartialEq)]
pub struct FetchedBatch {
    pub reports: Vec<ScamReport>,
    pub next_mark: Option<String>,
    /// Entries the adapter could not turn into reports. They are skipped.
    pub skipped: Vec<String>,
}

pub trait ReportSource: Send {
    fn id(&self) -> &str;

    /// Returns reports strictly newer than `mark`.
    fn fetch(&mut self, mark: Option<&str>, now: DateTime<Utc>) -> Result<FetchedBatch, SourceError>;
}

/// Reads one report per file: `From: <addr>`, `Subject: <subj>`, blank line, body.
///
/// The mark is `<mtime-nanos>:<file name>`; files are visited in that order.
pub struct DirectorySource {
    id: String,
    dir: PathBuf,
}

impl DirectorySource {
    pub fn new(id: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        Self {
            id: id.into(),
            dir: dir.into(),
        }
    }
}

fn file_key(path: &Path) -> io::Result<String> {
    let nanos = fs::metadata(path)?
        .modified()?
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(format!("{nanos:024}:{name}"))
}

/// Parses the reference report file layout.
pub fn parse_report_file(
    source_id: &str,
    text: &str,
    reported_at: DateTime<Utc>,
) -> Result<ScamReport, String> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
    let from = lines
        .next()
        .and_then(|l| l.strip_prefix("From:"))
        .ok_or("first line must be `From: <addr>`")?
        .trim()
        .to_owned();
    let subject = lines
        .next()
        .and_then(|l| l.strip_prefix("Subject:"))
        .ok_or("second line must be `Subject: <subj>`")?;
    let subject = subject.strip_prefix(' ').unwrap_or(subject).to_owned();
    match lines.next() {
        Some(l) if l.trim().is_empty() => {}
        _ => return Err("third line must be blank".into()),
    }
    let body: Vec<&str> = lines.collect();
    let body = body.join("\n").trim_end().to_owned();
    ScamReport::new(source_id, &from, subject, body, reported_at).map_err(|e| e.to_string())
}

impl ReportSource for DirectorySource {
    fn id(&self) -> &str {
        &self.id
    }

    fn fetch(&mut self, mark: Option<&str>, now: DateTime<Utc>) -> Result<FetchedBatch, SourceError> {
        let mut entries = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if !path.is_file() {
                continue;
            }
            if path
                .file_name()
                .is_some_and(|n| n.to_string_lossy().starts_with('.'))
            {
                continue;
            }
            let key = file_key(&path)?;
            if mark.is_some_and(|m| key.as_str() <= m) {
                continue;
            }
            entries.push((key, path));
        }
        entries.sort();

        let mut batch = FetchedBatch {
            reports: Vec::new(),
            next_mark: mark.map(str::to_owned),
            skipped: Vec::new(),
        };
        for (key, path) in entries {
            let parsed = fs::read(&path)
                .map_err(|e| e.to_string())
                .and_then(|b| String::from_utf8(b).map_err(|e| e.to_string()))
                .and_then(|text| parse_report_file(&self.id, &text, now));
            match parsed {
                Ok(report) => batch.reports.push(report),
                Err(reason) => {
                    warn!("source {}: skipping {}: {reason}", self.id, path.display());
                    batch.skipped.push(format!("{}: {reason}", path.display()));
                }
            }
            batch.next_mark = Some(key);
        }
        Ok(batch)
    }
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct PollOutcome {
    pub reports: Vec<ScamReport>,
    pub failed_sources: Vec<(String, String)>,
    pub skipped: Vec<String>,
}

/// Registered adapters and their persisted high-water marks.
#[derive(Default)]
pub struct SourceRegistry {
    sources: Vec<Box<dyn ReportSource>>,
    marks: BTreeMap<String, String>,
    state_file: Option<PathBuf>,
}

impl SourceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads marks from `path` if it exists; marks are written back there
    /// after every committed batch.
    pub fn with_state_file(path: impl Into<PathBuf>) -> Result<Self, SourceError> {
        let path = path.into();
        let marks = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| SourceError::State(e.to_string()))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            sources: Vec::new(),
            marks,
            state_file: Some(path),
        })
    }

    pub fn register(&mut self, source: Box<dyn ReportSource>) {
        self.sources.push(source);
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn mark(&self, source_id: &str) -> Option<&str> {
        self.marks.get(source_id).map(String::as_str)
    }

    /// Fetches from every adapter and hands each report to `enqueue`. A failing
    /// adapter is logged and skipped; a failing enqueue leaves that adapter's
    /// mark where it was.
    pub fn poll_sources<E, F>(&mut self, now: DateTime<Utc>, mut enqueue: F) -> PollOutcome
    where
        E: std::fmt::Display,
        F: FnMut(&ScamReport) -> Result<(), E>,
    {
        let mut outcome = PollOutcome::default();
        for source in &mut self.sources {
            let id = source.id().to_owned();
            let batch = match source.fetch(self.marks.get(&id).map(String::as_str), now) {
                Ok(b) => b,
                Err(e) => {
                    warn!("source {id} failed: {e}");
                    outcome.failed_sources.push((id, e.to_string()));
                    continue;
                }
            };
            let mut all_enqueued = true;
            for report in &batch.reports {
                if let Err(e) = enqueue(report) {
                    warn!("source {id}: enqueue failed: {e}");
                    outcome.failed_sources.push((id.clone(), e.to_string()));
                    all_enqueued = false;
                    break;
                }
            }
            if !all_enqueued {
                continue;
            }
            outcome.skipped.extend(batch.skipped);
            outcome.reports.extend(batch.reports);
            if let Some(mark) = batch.next_mark {
                self.marks.insert(id, mark);
            }
        }
        if let Err(e) = self.persist() {
            warn!("could not persist source marks: {e}");
        }
        outcome
    }

    fn persist(&self) -> Result<(), SourceError> {
        if let Some(path) = &self.state_file {
            let text =
                serde_json::to_string_pretty(&self.marks).map_err(|e| SourceError::State(e.to_string()))?;
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, text)?;
            fs::rename(tmp, path)?;
        }
        Ok(())
    }
}
