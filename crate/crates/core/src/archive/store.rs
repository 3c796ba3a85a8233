//! Directory interchange: `<dir>/<strategy>/<id>.txt`, plus an optional
//! `index.json` carrying metadata the transcript layout cannot express.

use super::{parse_transcript, Archive, ArchivedConversation, Direction, CRAWLER};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const INDEX_FILE: &str = "index.json";
const ROOT_STRATEGY: &str = "default";

#[derive(Debug, Error)]
pub enum ArchiveIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Index { path: PathBuf, source: serde_json::Error },
    #[error("conversation {0}: {1}")]
    Export(String, super::TranscriptError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ArchiveIoError + '_ {
    move |source| ArchiveIoError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub file: String,
    pub id: String,
    pub strategy: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<String>,
    #[serde(default)]
    pub unreachable_at_first_send: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedArchive {
    pub archive: Archive,
    pub skipped: Vec<SkippedFile>,
}

fn safe_component(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Writes every conversation plus `index.json`. Files are written in archive
/// order, so equal archives yield byte-identical directories.
pub fn write_archive_dir(archive: &Archive, dir: &Path) -> Result<(), ArchiveIoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut index = Vec::with_capacity(archive.conversations.len());
    for conv in &archive.conversations {
        let text = conv
            .transcript()
            .map_err(|e| ArchiveIoError::Export(conv.id.clone(), e))?;
        let rel = format!("{}/{}.txt", safe_component(&conv.strategy), safe_component(&conv.id));
        let path = dir.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, text).map_err(io_err(&path))?;
        index.push(IndexEntry {
            file: rel,
            id: conv.id.clone(),
            strategy: conv.strategy.clone(),
            target: conv.target.clone(),
            stop_reason: conv.stop_reason.clone(),
            unreachable_at_first_send: conv.unreachable_at_first_send,
        });
    }
    let path = dir.join(INDEX_FILE);
    let json = serde_json::to_string_pretty(&index).map_err(|source| ArchiveIoError::Index {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, json + "\n").map_err(io_err(&path))
}

fn transcript_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, ArchiveIoError> {
    let mut out = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .collect();
    entries.sort();
    for path in entries {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with('.') {
            continue;
        }
        if path.is_dir() {
            let mut inner: Vec<_> = fs::read_dir(&path)
                .map_err(io_err(&path))?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            inner.sort();
            out.extend(inner.into_iter().map(|p| (name.to_owned(), p)));
        } else if path.extension().is_some_and(|x| x == "txt") {
            out.push((ROOT_STRATEGY.to_owned(), path));
        }
    }
    Ok(out)
}

fn infer_target(messages: &[super::TranscriptMessage]) -> String {
    messages
        .iter()
        .find(|m| m.to == CRAWLER)
        .or_else(|| messages.iter().find(|m| m.direction == Direction::Inbound))
        .map(|m| m.from.clone())
        .unwrap_or_default()
}

/// Reads an archive directory. Malformed transcripts are reported in
/// `skipped` rather than aborting the load.
pub fn read_archive_dir(dir: &Path) -> Result<LoadedArchive, ArchiveIoError> {
    let index_path = dir.join(INDEX_FILE);
    let mut loaded = LoadedArchive::default();

    if index_path.exists() {
        let raw = fs::read_to_string(&index_path).map_err(io_err(&index_path))?;
        let index: Vec<IndexEntry> =
            serde_json::from_str(&raw).map_err(|source| ArchiveIoError::Index {
                path: index_path.clone(),
                source,
            })?;
        for entry in index {
            let path = dir.join(&entry.file);
            let parsed = fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| parse_transcript(&t, Some(&entry.target)).map_err(|e| e.to_string()));
            match parsed {
                Ok(messages) => loaded.archive.conversations.push(ArchivedConversation {
                    id: entry.id,
                    strategy: entry.strategy,
                    target: entry.target,
                    messages,
                    stop_reason: entry.stop_reason,
                    unreachable_at_first_send: entry.unreachable_at_first_send,
                }),
                Err(reason) => loaded.skipped.push(SkippedFile { path, reason }),
            }
        }
        return Ok(loaded);
    }

    for (strategy, path) in transcript_files(dir)? {
        let parsed = fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| parse_transcript(&t, None).map_err(|e| e.to_string()));
        match parsed {
            Ok(messages) => {
                let id = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_owned();
                loaded.archive.conversations.push(ArchivedConversation {
                    id,
                    strategy: strategy.clone(),
                    target: infer_target(&messages),
                    messages,
                    stop_reason: None,
                    unreachable_at_first_send: false,
                });
            }
            Err(reason) => loaded.skipped.push(SkippedFile { path, reason }),
        }
    }
    Ok(loaded)
}
