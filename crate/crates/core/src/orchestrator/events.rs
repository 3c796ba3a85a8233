//! Every state change is an [`Event`]. The event log is one JSON object per
//! line; replaying it through [`OrchestratorState::apply`] rebuilds the state.
//!
//! [`OrchestratorState::apply`]: super::OrchestratorState::apply

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::{ConversationId, Message, Persona, Solicitation, StopReason};
use crate::address::EmailAddress;
use crate::gateway::{DeliveryStatus, InboundEmail};
use crate::ingestion::{ReviewDecision, ScamReport, TargetState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuarantineReason {
    /// Sender is not the target of the conversation it wrote to.
    UnknownSender,
    /// Sender is a known target writing to another conversation's persona.
    AddressMismatch,
    /// Recipient is not a persona of this instance.
    UnknownRecipient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    ReportIngested {
        report: ScamReport,
    },
    TargetReviewed {
        at: DateTime<Utc>,
        address: EmailAddress,
        decision: ReviewDecision,
        reviewer: String,
        note: String,
    },
    TargetTransitioned {
        at: DateTime<Utc>,
        address: EmailAddress,
        to: TargetState,
    },
    ConversationCreated {
        at: DateTime<Utc>,
        conversation: ConversationId,
        address: EmailAddress,
        responder_id: String,
        persona: Persona,
        rng_seed: u64,
        solicitation: Solicitation,
    },
    MessageAppended {
        conversation: ConversationId,
        message: Message,
    },
    /// An inbound is deliberately left without a reply.
    InboundSkipped {
        at: DateTime<Utc>,
        conversation: ConversationId,
        through: usize,
        reason: String,
    },
    DeliveryUpdated {
        at: DateTime<Utc>,
        conversation: ConversationId,
        index: usize,
        status: DeliveryStatus,
    },
    ConversationStopped {
        at: DateTime<Utc>,
        conversation: ConversationId,
        reason: StopReason,
    },
    InboundQuarantined {
        inbound: InboundEmail,
        reason: QuarantineReason,
    },
    SendLoopHalted {
        at: DateTime<Utc>,
        reason: String,
    },
    SendLoopResumed {
        at: DateTime<Utc>,
    },
}

/// Append-only JSON-lines event file.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    pub fn open(path: &Path) -> io::Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(EventLog {
            path: path.to_owned(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &Event) -> io::Result<()> {
        let mut line = serde_json::to_string(event).map_err(io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()
    }

    pub fn read_all(path: &Path) -> io::Result<Vec<Event>> {
        if !path.exists() {
            return Ok(Vec::new());
        }
        let reader = BufReader::new(File::open(path)?);
        let mut out = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event = serde_json::from_str(&line).map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("event line {}: {e}", n + 1))
            })?;
            out.push(event);
        }
        Ok(out)
    }
}
