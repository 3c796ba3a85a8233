use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::report::ScamReport;
use crate::address::{AddressError, EmailAddress};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetState {
    PendingReview,
    Approved,
    Rejected,
    Contacted,
    Unreachable,
    DoNotContact,
}

impl TargetState {
    pub fn can_transition_to(self, next: TargetState) -> bool {
        use TargetState::*;
        matches!(
            (self, next),
            (PendingReview, Approved)
                | (PendingReview, Rejected)
                | (Approved, Contacted)
                // a conversation stopped before its bait went out
                | (Approved, DoNotContact)
                | (Contacted, Unreachable)
                | (Contacted, DoNotContact)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            TargetState::Rejected | TargetState::Unreachable | TargetState::DoNotContact
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TargetState::PendingReview => "pending_review",
            TargetState::Approved => "approved",
            TargetState::Rejected => "rejected",
            TargetState::Contacted => "contacted",
            TargetState::Unreachable => "unreachable",
            TargetState::DoNotContact => "do_not_contact",
        }
    }
}

impl fmt::Display for TargetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TargetState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "pending_review" => TargetState::PendingReview,
            "approved" => TargetState::Approved,
            "rejected" => TargetState::Rejected,
            "contacted" => TargetState::Contacted,
            "unreachable" => TargetState::Unreachable,
            "do_not_contact" => TargetState::DoNotContact,
            other => return Err(format!("unknown target state `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewDecision {
    Approve,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub reviewer: String,
    pub decision: ReviewDecision,
    pub decided_at: DateTime<Utc>,
    pub note: String,
}

/// A verified scammer address. One per address per instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub address: EmailAddress,
    pub state: TargetState,
    /// `raw_hash` of the report that created this target.
    pub first_report: String,
    /// Every distinct report hash filed against this address, in arrival order.
    pub reports: Vec<String>,
    pub review: Option<Review>,
    pub history: Vec<TargetState>,
}

impl Target {
    pub fn was_approved(&self) -> bool {
        self.history.contains(&TargetState::Approved)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestOutcome {
    NewTarget,
    DuplicateAddress,
    DuplicateReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub at: DateTime<Utc>,
    pub address: EmailAddress,
    pub report_hash: String,
    pub outcome: IngestOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestionError {
    #[error("report rejected: {0}")]
    InvalidAddress(#[from] AddressError),
    #[error("report rejected: field `{0}` is empty")]
    EmptyField(&'static str),
    #[error("no target for address `{0}`")]
    UnknownTarget(String),
    #[error("illegal transition for `{address}`: {from} -> {to}")]
    IllegalTransition {
        address: String,
        from: TargetState,
        to: TargetState,
    },
}

/// All targets and reports known to one service instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetRegistry {
    targets: BTreeMap<EmailAddress, Target>,
    reports: BTreeMap<String, ScamReport>,
    seen_hashes: BTreeSet<String>,
    audit: Vec<AuditEntry>,
}

impl TargetRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn validate(report: &ScamReport) -> Result<(), IngestionError> {
        if report.source_id.trim().is_empty() {
            return Err(IngestionError::EmptyField("source_id"));
        }
        if report.body_text.trim().is_empty() {
            return Err(IngestionError::EmptyField("body_text"));
        }
        // Re-parse: the address may have been deserialized from elsewhere.
        EmailAddress::parse(report.sender_address.as_str())?;
        Ok(())
    }

    /// Files a report. New addresses get a `PendingReview` target; repeated
    /// addresses only accumulate reports.
    pub fn ingest_report(&mut self, report: ScamReport) -> Result<IngestOutcome, IngestionError> {
        Self::validate(&report)?;
        let address = report.sender_address.clone();
        let hash = report.raw_hash.clone();
        let outcome = if self.seen_hashes.contains(&hash) {
            IngestOutcome::DuplicateReport
        } else if let Some(target) = self.targets.get_mut(&address) {
            target.reports.push(hash.clone());
            IngestOutcome::DuplicateAddress
        } else {
            self.targets.insert(
                address.clone(),
                Target {
                    address: address.clone(),
                    state: TargetState::PendingReview,
                    first_report: hash.clone(),
                    reports: vec![hash.clone()],
                    review: None,
                    history: vec![TargetState::PendingReview],
                },
            );
            IngestOutcome::NewTarget
        };
        self.audit.push(AuditEntry {
            at: report.reported_at,
            address,
            report_hash: hash.clone(),
            outcome,
        });
        if outcome != IngestOutcome::DuplicateReport {
            self.seen_hashes.insert(hash.clone());
            self.reports.insert(hash, report);
        }
        Ok(outcome)
    }

    pub fn review_target(
        &mut self,
        address: &EmailAddress,
        decision: ReviewDecision,
        reviewer: &str,
        note: &str,
        at: DateTime<Utc>,
    ) -> Result<&Target, IngestionError> {
        let next = match decision {
            ReviewDecision::Approve => TargetState::Approved,
            ReviewDecision::Reject => TargetState::Rejected,
        };
        let target = self
            .targets
            .get_mut(address)
            .ok_or_else(|| IngestionError::UnknownTarget(address.to_string()))?;
        if target.state != TargetState::PendingReview {
            return Err(IngestionError::IllegalTransition {
                address: address.to_string(),
                from: target.state,
                to: next,
            });
        }
        target.state = next;
        target.history.push(next);
        target.review = Some(Review {
            reviewer: reviewer.to_owned(),
            decision,
            decided_at: at,
            note: note.to_owned(),
        });
        Ok(target)
    }

    pub fn transition(
        &mut self,
        address: &EmailAddress,
        next: TargetState,
    ) -> Result<&Target, IngestionError> {
        let target = self
            .targets
            .get_mut(address)
            .ok_or_else(|| IngestionError::UnknownTarget(address.to_string()))?;
        if !target.state.can_transition_to(next) {
            return Err(IngestionError::IllegalTransition {
                address: address.to_string(),
                from: target.state,
                to: next,
            });
        }
        target.state = next;
        target.history.push(next);
        Ok(target)
    }

    pub fn get(&self, address: &EmailAddress) -> Option<&Target> {
        self.targets.get(address)
    }

    pub fn targets(&self) -> impl Iterator<Item = &Target> {
        self.targets.values()
    }

    pub fn in_state(&self, state: TargetState) -> impl Iterator<Item = &Target> {
        self.targets.values().filter(move |t| t.state == state)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn report(&self, hash: &str) -> Option<&ScamReport> {
        self.reports.get(hash)
    }

    pub fn first_report_of(&self, address: &EmailAddress) -> Option<&ScamReport> {
        self.get(address).and_then(|t| self.report(&t.first_report))
    }

    pub fn audit_log(&self) -> &[AuditEntry] {
        &self.audit
    }
}
