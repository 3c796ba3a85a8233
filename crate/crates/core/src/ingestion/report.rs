use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::address::{AddressError, EmailAddress};

/// A crawled scam solicitation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScamReport {
    pub source_id: String,
    pub sender_address: EmailAddress,
    pub subject: String,
    pub body_text: String,
    pub reported_at: DateTime<Utc>,
    pub raw_hash: String,
}

impl ScamReport {
    pub fn new(
        source_id: impl Into<String>,
        sender: &str,
        subject: impl Into<String>,
        body_text: impl Into<String>,
        reported_at: DateTime<Utc>,
    ) -> Result<Self, AddressError> {
        let sender_address = EmailAddress::parse(sender)?;
        let subject = subject.into();
        let body_text = body_text.into();
        let raw_hash = report_digest(&sender_address, &subject, &body_text);
        Ok(ScamReport {
            source_id: source_id.into(),
            sender_address,
            subject,
            body_text,
            reported_at,
            raw_hash,
        })
    }
}

/// SHA-256 over `sender \0 subject \0 body`, hex encoded.
pub fn report_digest(sender: &EmailAddress, subject: &str, body: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(sender.as_str().as_bytes());
    hasher.update([0u8]);
    hasher.update(subject.as_bytes());
    hasher.update([0u8]);
    hasher.update(body.as_bytes());
    hex::encode(hasher.finalize())
}
