use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::render::OutboundEmail;

/// Provider attempts per message, including the first.
pub const MAX_ATTEMPTS: u32 = 3;

/// Wait before retry `n` (1-based). Only the first `MAX_ATTEMPTS - 1` entries
/// are reachable.
pub const BACKOFF_MINUTES: [i64; 3] = [1, 5, 25];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DeliveryStatus {
    Queued,
    Delivered {
        provider_id: String,
    },
    Undeliverable {
        reason: String,
    },
    Retrying {
        attempts_made: u32,
        next_attempt_at: DateTime<Utc>,
    },
}

impl DeliveryStatus {
    pub fn is_pending(&self) -> bool {
        matches!(self, DeliveryStatus::Queued | DeliveryStatus::Retrying { .. })
    }

    pub fn due_at(&self, queued_at: DateTime<Utc>) -> Option<DateTime<Utc>> {
        match self {
            DeliveryStatus::Queued => Some(queued_at),
            DeliveryStatus::Retrying { next_attempt_at, .. } => Some(*next_attempt_at),
            _ => None,
        }
    }
}

/// What the provider client receives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SendRequest {
    pub from_name: String,
    pub from_address: String,
    pub to: String,
    pub subject: String,
    pub html: String,
    pub text: String,
}

impl SendRequest {
    pub fn for_outbound(outbound: &OutboundEmail) -> Self {
        SendRequest {
            from_name: outbound.persona.fake_name.clone(),
            from_address: outbound.persona.address().to_string(),
            to: outbound.to.to_string(),
            subject: outbound.subject.clone(),
            html: outbound.html_body.clone(),
            text: outbound.text_body.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub accepted: bool,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub permanent: bool,
    #[serde(default)]
    pub reason: Option<String>,
}

impl ProviderResponse {
    pub fn accepted(id: impl Into<String>) -> Self {
        ProviderResponse {
            accepted: true,
            id: Some(id.into()),
            ..Default::default()
        }
    }

    pub fn bounced(reason: impl Into<String>) -> Self {
        ProviderResponse {
            accepted: false,
            permanent: true,
            reason: Some(reason.into()),
            ..Default::default()
        }
    }

    pub fn deferred(reason: impl Into<String>) -> Self {
        ProviderResponse {
            accepted: false,
            permanent: false,
            reason: Some(reason.into()),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider rejected credentials: {0}")]
    Auth(String),
    #[error("transient provider failure: {0}")]
    Transient(String),
}

/// Client side of the relay provider contract.
pub trait MailProvider: Send {
    fn send(&mut self, request: &SendRequest) -> Result<ProviderResponse, ProviderError>;

    /// True only for in-process loopbacks used by tests and the simulator.
    fn is_simulated(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeliveryStep {
    Delivered(String),
    /// Permanent failure, or transient failures exhausted.
    Undeliverable(String),
    Retry {
        attempts_made: u32,
        next_attempt_at: DateTime<Utc>,
    },
    /// Credentials rejected. Nothing changed; the send loop must halt.
    Halt(String),
}

/// Makes one provider attempt for `outbound` and updates its status.
pub fn deliver_attempt(
    outbound: &mut OutboundEmail,
    provider: &mut dyn MailProvider,
    now: DateTime<Utc>,
) -> DeliveryStep {
    let attempts_before = match &outbound.delivery {
        DeliveryStatus::Queued => 0,
        DeliveryStatus::Retrying { attempts_made, .. } => *attempts_made,
        DeliveryStatus::Delivered { provider_id } => return DeliveryStep::Delivered(provider_id.clone()),
        DeliveryStatus::Undeliverable { reason } => return DeliveryStep::Undeliverable(reason.clone()),
    };
    let step = match provider.send(&SendRequest::for_outbound(outbound)) {
        Err(ProviderError::Auth(msg)) => return DeliveryStep::Halt(msg),
        Ok(resp) if resp.accepted => {
            DeliveryStep::Delivered(resp.id.unwrap_or_else(|| format!("accepted-{}", now.timestamp())))
        }
        Ok(resp) if resp.permanent => {
            DeliveryStep::Undeliverable(resp.reason.unwrap_or_else(|| "permanent rejection".into()))
        }
        Ok(resp) => retry_or_give_up(attempts_before, now, resp.reason.unwrap_or_default()),
        Err(ProviderError::Transient(msg)) => retry_or_give_up(attempts_before, now, msg),
    };
    outbound.delivery = match &step {
        DeliveryStep::Delivered(id) => DeliveryStatus::Delivered {
            provider_id: id.clone(),
        },
        DeliveryStep::Undeliverable(reason) => DeliveryStatus::Undeliverable {
            reason: reason.clone(),
        },
        DeliveryStep::Retry {
            attempts_made,
            next_attempt_at,
        } => DeliveryStatus::Retrying {
            attempts_made: *attempts_made,
            next_attempt_at: *next_attempt_at,
        },
        DeliveryStep::Halt(_) => unreachable!(),
    };
    step
}

fn retry_or_give_up(attempts_before: u32, now: DateTime<Utc>, reason: String) -> DeliveryStep {
    let attempts_made = attempts_before + 1;
    if attempts_made >= MAX_ATTEMPTS {
        return DeliveryStep::Undeliverable(format!(
            "gave up after {attempts_made} attempts: {reason}"
        ));
    }
    let wait = BACKOFF_MINUTES[(attempts_made - 1) as usize];
    DeliveryStep::Retry {
        attempts_made,
        next_attempt_at: now + Duration::minutes(wait),
    }
}

/// A provider whose answers are scripted in order; used by tests and the
/// simulator's bounce scenarios. Once the script runs out it accepts.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    pub script: std::collections::VecDeque<Result<ProviderResponse, ProviderError>>,
    pub sent: Vec<SendRequest>,
}

impl ScriptedProvider {
    pub fn new(script: impl IntoIterator<Item = Result<ProviderResponse, ProviderError>>) -> Self {
        Self {
            script: script.into_iter().collect(),
            sent: Vec::new(),
        }
    }
}

impl MailProvider for ScriptedProvider {
    fn send(&mut self, request: &SendRequest) -> Result<ProviderResponse, ProviderError> {
        self.sent.push(request.clone());
        self.script
            .pop_front()
            .unwrap_or_else(|| Ok(ProviderResponse::accepted(format!("msg-{}", self.sent.len()))))
    }

    fn is_simulated(&self) -> bool {
        true
    }
}
