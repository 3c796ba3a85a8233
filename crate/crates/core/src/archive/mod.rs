//! Conversation archive, transcript interchange and experiment metrics.

mod metrics;
mod store;
mod transcript;

pub use metrics::*;
pub use store::*;
pub use transcript::*;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchivedConversation {
    pub id: String,
    pub strategy: String,
    /// Scammer address as it appears in the transcript headers.
    pub target: String,
    pub messages: Vec<TranscriptMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<String>,
    /// The very first send to this target bounced.
    #[serde(default)]
    pub unreachable_at_first_send: bool,
}

impl ArchivedConversation {
    pub fn inbound(&self) -> impl Iterator<Item = &TranscriptMessage> {
        self.messages
            .iter()
            .filter(|m| m.direction == Direction::Inbound)
    }

    pub fn count(&self, direction: Direction) -> usize {
        self.messages
            .iter()
            .filter(|m| m.direction == direction)
            .count()
    }

    pub fn transcript(&self) -> Result<String, TranscriptError> {
        export_transcript(&self.messages)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Archive {
    pub conversations: Vec<ArchivedConversation>,
}

impl Archive {
    pub fn new(conversations: Vec<ArchivedConversation>) -> Self {
        Archive { conversations }
    }

    pub fn strategies(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .conversations
            .iter()
            .map(|c| c.strategy.clone())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn by_strategy(&self) -> BTreeMap<&str, Vec<&ArchivedConversation>> {
        let mut out: BTreeMap<&str, Vec<&ArchivedConversation>> = BTreeMap::new();
        for c in &self.conversations {
            out.entry(c.strategy.as_str()).or_default().push(c);
        }
        out
    }
}
