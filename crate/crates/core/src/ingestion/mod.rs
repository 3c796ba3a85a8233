//! Scam report acquisition, per-address deduplication and the review gate.

mod report;
mod sources;
mod target;

pub use report::{report_digest, ScamReport};
pub use sources::{
    parse_report_file, DirectorySource, FetchedBatch, PollOutcome, ReportSource, SourceError,
    SourceRegistry,
};
pub use target::{
    AuditEntry, IngestOutcome, IngestionError, Review, ReviewDecision, Target, TargetRegistry,
    TargetState,
};
