//! Independent policy checker that watches the event stream. It keeps its
//! own bookkeeping rather than trusting [`OrchestratorState`].
//!
//! [`OrchestratorState`]: super::OrchestratorState

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{ConversationId, Event, MessageDirection};
use crate::address::EmailAddress;
use crate::ingestion::{ReviewDecision, TargetState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub event_index: u64,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}: {} ({})", self.event_index, self.rule, self.detail)
    }
}

#[derive(Debug, Clone)]
struct Tracked {
    address: EmailAddress,
    persona: EmailAddress,
    inbound: u64,
    outbound: u64,
    unanswered: bool,
    stopped: bool,
    last_time: Option<DateTime<Utc>>,
}

#[derive(Debug, Default)]
pub struct PolicyAuditor {
    seen: u64,
    targets: BTreeMap<EmailAddress, TargetState>,
    convs: BTreeMap<ConversationId, Tracked>,
    by_address: BTreeMap<EmailAddress, ConversationId>,
    quarantined: BTreeSet<EmailAddress>,
    usage: BTreeMap<String, u64>,
    pub outbound_total: u64,
    pub inbound_total: u64,
}

impl PolicyAuditor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events_seen(&self) -> u64 {
        self.seen
    }

    pub fn usage(&self) -> &BTreeMap<String, u64> {
        &self.usage
    }

    /// Senders quarantined while not being targets of any conversation.
    pub fn quarantined_senders(&self) -> &BTreeSet<EmailAddress> {
        &self.quarantined
    }

    pub fn usage_spread(&self) -> u64 {
        let max = self.usage.values().max().copied().unwrap_or(0);
        let min = self.usage.values().min().copied().unwrap_or(0);
        max - min
    }

    fn fail(&self, rule: &'static str, detail: String) -> Result<(), Violation> {
        Err(Violation {
            event_index: self.seen,
            rule,
            detail,
        })
    }

    pub fn observe(&mut self, event: &Event) -> Result<(), Violation> {
        let r = self.check(event);
        self.seen += 1;
        r
    }

    fn check(&mut self, event: &Event) -> Result<(), Violation> {
        match event {
            Event::ReportIngested { report } => {
                self.targets
                    .entry(report.sender_address.clone())
                    .or_insert(TargetState::PendingReview);
            }
            Event::TargetReviewed {
                address, decision, ..
            } => {
                let next = match decision {
                    ReviewDecision::Approve => TargetState::Approved,
                    ReviewDecision::Reject => TargetState::Rejected,
                };
                match self.targets.get(address) {
                    Some(TargetState::PendingReview) => {
                        self.targets.insert(address.clone(), next);
                    }
                    other => {
                        return self.fail("review-gate", format!("{address} reviewed from {other:?}"))
                    }
                }
            }
            Event::TargetTransitioned { address, to, .. } => {
                let from = self.targets.get(address).copied();
                if !from.is_some_and(|f| f.can_transition_to(*to)) {
                    return self.fail("target-transition", format!("{address}: {from:?} -> {to:?}"));
                }
                self.targets.insert(address.clone(), *to);
            }
            Event::ConversationCreated {
                conversation,
                address,
                responder_id,
                persona,
                ..
            } => {
                if self.by_address.contains_key(address) {
                    return self.fail("one-conversation-per-address", address.to_string());
                }
                if self.convs.contains_key(conversation) {
                    return self.fail("sticky-responder", format!("{conversation} reassigned"));
                }
                if self.targets.get(address) != Some(&TargetState::Approved) {
                    return self.fail("review-gate", format!("conversation for unapproved {address}"));
                }
                self.by_address.insert(address.clone(), *conversation);
                *self.usage.entry(responder_id.clone()).or_insert(0) += 1;
                self.convs.insert(
                    *conversation,
                    Tracked {
                        address: address.clone(),
                        persona: persona.address(),
                        inbound: 0,
                        outbound: 0,
                        unanswered: false,
                        stopped: false,
                        last_time: None,
                    },
                );
            }
            Event::MessageAppended {
                conversation,
                message,
            } => {
                let Some(t) = self.convs.get(conversation).cloned() else {
                    return self.fail("unknown-conversation", conversation.to_string());
                };
                if t.last_time.is_some_and(|last| message.timestamp < last) {
                    return self.fail("monotone-time", conversation.to_string());
                }
                match message.direction {
                    MessageDirection::Inbound => {
                        if message.from != t.address {
                            return self.fail("route", format!("{} in {conversation}", message.from));
                        }
                        let t = self.convs.get_mut(conversation).expect("tracked");
                        t.inbound += 1;
                        t.unanswered = true;
                        t.last_time = Some(message.timestamp);
                        self.inbound_total += 1;
                    }
                    MessageDirection::Outbound => {
                        if message.from != t.persona {
                            return self.fail("sticky-persona", conversation.to_string());
                        }
                        if message.to != t.address {
                            return self.fail("outbound-recipient", message.to.to_string());
                        }
                        if t.stopped {
                            return self.fail("send-after-stop", conversation.to_string());
                        }
                        let state = self.targets.get(&t.address).copied();
                        let allowed = if t.outbound == 0 {
                            state == Some(TargetState::Approved)
                        } else {
                            state == Some(TargetState::Contacted)
                        };
                        if !allowed {
                            return self.fail("blocked-target", format!("{} is {state:?}", t.address));
                        }
                        if t.outbound > 0 && !t.unanswered {
                            return self.fail("no-chasing", conversation.to_string());
                        }
                        if t.outbound + 1 > t.inbound + 1 {
                            return self.fail("outbound-le-inbound-plus-one", conversation.to_string());
                        }
                        let t = self.convs.get_mut(conversation).expect("tracked");
                        t.outbound += 1;
                        t.unanswered = false;
                        t.last_time = Some(message.timestamp);
                        self.outbound_total += 1;
                    }
                }
            }
            Event::InboundSkipped { conversation, .. } => {
                if let Some(t) = self.convs.get_mut(conversation) {
                    t.unanswered = false;
                }
            }
            Event::ConversationStopped { conversation, .. } => match self.convs.get_mut(conversation) {
                Some(t) if !t.stopped => t.stopped = true,
                _ => return self.fail("stop", format!("{conversation} stopped twice or unknown")),
            },
            Event::InboundQuarantined { inbound, .. } => {
                if !self.by_address.contains_key(&inbound.from) {
                    self.quarantined.insert(inbound.from.clone());
                }
            }
            Event::DeliveryUpdated { .. } | Event::SendLoopHalted { .. } | Event::SendLoopResumed { .. } => {}
        }
        Ok(())
    }
}
