use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::fmt;

use super::Persona;
use crate::address::EmailAddress;
use crate::gateway::DeliveryStatus;
use crate::responders::Turn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConversationId(pub u64);

impl fmt::Display for ConversationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{:06}", self.0)
    }
}

impl std::str::FromStr for ConversationId {
    type Err = std::num::ParseIntError;

    /// Accepts `c000042` as well as `42`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('c').unwrap_or(s).parse().map(ConversationId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    OperatorStop,
    Undeliverable,
    ExperimentEnd,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::OperatorStop => "operator_stop",
            StopReason::Undeliverable => "undeliverable",
            StopReason::ExperimentEnd => "experiment_end",
        }
    }

    /// Lenient parse used by the REST surface (`"operator"` is accepted).
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "operator" | "operator_stop" => Some(StopReason::OperatorStop),
            "undeliverable" | "bounce" => Some(StopReason::Undeliverable),
            "experiment_end" | "end" => Some(StopReason::ExperimentEnd),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "state", content = "reason", rename_all = "snake_case")]
pub enum ConversationState {
    Initialized,
    Baited,
    Engaged,
    Stopped(StopReason),
}

impl ConversationState {
    pub fn is_stopped(self) -> bool {
        matches!(self, ConversationState::Stopped(_))
    }

    pub fn label(self) -> &'static str {
        match self {
            ConversationState::Initialized => "initialized",
            ConversationState::Baited => "baited",
            ConversationState::Engaged => "engaged",
            ConversationState::Stopped(_) => "stopped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageDirection {
    Inbound,
    Outbound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub direction: MessageDirection,
    pub from: EmailAddress,
    pub to: EmailAddress,
    pub subject: String,
    pub body_text: String,
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub html_body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivery: Option<DeliveryStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_index: Option<usize>,
}

/// The crawled lure a conversation answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solicitation {
    pub subject: String,
    pub body_text: String,
    pub reported_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: ConversationId,
    pub target_address: EmailAddress,
    pub responder_id: String,
    pub strategy: String,
    pub persona: Persona,
    pub state: ConversationState,
    pub solicitation: Solicitation,
    pub messages: Vec<Message>,
    pub created_at: DateTime<Utc>,
    pub rng_seed: u64,
    /// Messages before this index have been answered (or deliberately left
    /// unanswered).
    pub answered_through: usize,
}

impl Conversation {
    pub fn count(&self, direction: MessageDirection) -> usize {
        self.messages.iter().filter(|m| m.direction == direction).count()
    }

    pub fn has_unanswered_inbound(&self) -> bool {
        self.messages[self.answered_through.min(self.messages.len())..]
            .iter()
            .any(|m| m.direction == MessageDirection::Inbound)
    }

    /// Bodies of inbound messages not yet answered or skipped, oldest first.
    pub fn unanswered_bodies(&self) -> Vec<&str> {
        self.messages[self.answered_through.min(self.messages.len())..]
            .iter()
            .filter(|m| m.direction == MessageDirection::Inbound)
            .map(|m| m.body_text.as_str())
            .collect()
    }

    pub fn needs_bait(&self) -> bool {
        self.state == ConversationState::Initialized && self.count(MessageDirection::Outbound) == 0
    }

    pub fn last_inbound(&self) -> Option<&Message> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.direction == MessageDirection::Inbound)
    }

    pub fn last_template(&self) -> Option<usize> {
        self.messages.iter().rev().find_map(|m| m.template_index)
    }

    pub fn last_timestamp(&self) -> Option<DateTime<Utc>> {
        self.messages.last().map(|m| m.timestamp)
    }

    /// Solicitation first, then every message in order.
    pub fn turns(&self) -> Vec<Turn> {
        std::iter::once(Turn::scammer(self.solicitation.body_text.clone()))
            .chain(self.messages.iter().map(|m| match m.direction {
                MessageDirection::Inbound => Turn::scammer(m.body_text.clone()),
                MessageDirection::Outbound => Turn::baiter(m.body_text.clone()),
            }))
            .collect()
    }
}
