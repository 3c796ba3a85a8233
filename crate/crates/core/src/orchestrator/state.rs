use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use super::{
    Conversation, ConversationId, ConversationState, Event, MessageDirection, QuarantineReason,
    ResponderDescriptor,
};
use crate::address::EmailAddress;
use crate::gateway::InboundEmail;
use crate::ingestion::{IngestionError, TargetRegistry, TargetState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedInbound {
    pub inbound: InboundEmail,
    pub reason: QuarantineReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error(transparent)]
    Ingestion(#[from] IngestionError),
    #[error("unknown conversation {0}")]
    UnknownConversation(ConversationId),
    #[error("unknown responder `{0}`")]
    UnknownResponder(String),
    #[error("conversation {0} already exists")]
    DuplicateConversation(ConversationId),
    #[error("address `{0}` already has a conversation")]
    AddressTaken(String),
    #[error("mailname `{0}` already in use")]
    MailnameTaken(String),
    #[error("conversation {0} is stopped")]
    Stopped(ConversationId),
    #[error("conversation {conversation} has no message {index}")]
    NoSuchMessage {
        conversation: ConversationId,
        index: usize,
    },
    #[error("policy violation in {conversation}: {detail}")]
    Policy {
        conversation: ConversationId,
        detail: String,
    },
}

/// Everything an instance knows; the snapshot format.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorState {
    pub targets: TargetRegistry,
    pub conversations: BTreeMap<ConversationId, Conversation>,
    pub responders: Vec<ResponderDescriptor>,
    pub quarantine: Vec<QuarantinedInbound>,
    pub send_halted: Option<String>,
    pub next_conversation: u64,
    pub applied_events: u64,
    by_address: BTreeMap<EmailAddress, ConversationId>,
    by_persona: BTreeMap<EmailAddress, ConversationId>,
    mailnames: BTreeSet<String>,
    seen_inbound: BTreeSet<String>,
    /// Conversations that may need a send.
    pending: BTreeSet<ConversationId>,
    /// Outbound messages not yet delivered or given up on.
    in_flight: BTreeSet<(ConversationId, usize)>,
}

impl OrchestratorState {
    pub fn with_responders(responders: Vec<ResponderDescriptor>) -> Self {
        OrchestratorState {
            responders,
            next_conversation: 1,
            ..Default::default()
        }
    }

    pub fn conversation_for(&self, address: &EmailAddress) -> Option<&Conversation> {
        self.by_address.get(address).and_then(|id| self.conversations.get(id))
    }

    pub fn conversation_for_persona(&self, address: &EmailAddress) -> Option<&Conversation> {
        self.by_persona.get(address).and_then(|id| self.conversations.get(id))
    }

    pub fn mailnames(&self) -> &BTreeSet<String> {
        &self.mailnames
    }

    pub fn seen_inbound(&self, key: &str) -> bool {
        self.seen_inbound.contains(key)
    }

    pub fn pending(&self) -> &BTreeSet<ConversationId> {
        &self.pending
    }

    pub fn in_flight(&self) -> &BTreeSet<(ConversationId, usize)> {
        &self.in_flight
    }

    /// Approved targets still waiting for a conversation.
    pub fn awaiting_conversation(&self) -> Vec<EmailAddress> {
        self.targets
            .in_state(TargetState::Approved)
            .filter(|t| !self.by_address.contains_key(&t.address))
            .map(|t| t.address.clone())
            .collect()
    }

    fn conv_mut(&mut self, id: ConversationId) -> Result<&mut Conversation, StateError> {
        self.conversations
            .get_mut(&id)
            .ok_or(StateError::UnknownConversation(id))
    }

    fn refresh_pending(&mut self, id: ConversationId) {
        let Some(c) = self.conversations.get(&id) else { return };
        if !c.state.is_stopped() && (c.needs_bait() || c.has_unanswered_inbound()) {
            self.pending.insert(id);
        } else {
            self.pending.remove(&id);
        }
    }

    /// Applies one event. Validation happens before any mutation, so a
    /// rejected event leaves the state untouched.
    pub fn apply(&mut self, event: &Event) -> Result<(), StateError> {
        match event {
            Event::ReportIngested { report } => {
                self.targets.ingest_report(report.clone())?;
            }
            Event::TargetReviewed {
                at,
                address,
                decision,
                reviewer,
                note,
            } => {
                self.targets
                    .review_target(address, *decision, reviewer, note, *at)?;
            }
            Event::TargetTransitioned { address, to, .. } => {
                self.targets.transition(address, *to)?;
            }
            Event::ConversationCreated {
                at,
                conversation,
                address,
                responder_id,
                persona,
                rng_seed,
                solicitation,
            } => {
                if self.conversations.contains_key(conversation) {
                    return Err(StateError::DuplicateConversation(*conversation));
                }
                if self.by_address.contains_key(address) {
                    return Err(StateError::AddressTaken(address.to_string()));
                }
                if self.mailnames.contains(&persona.mailname) {
                    return Err(StateError::MailnameTaken(persona.mailname.clone()));
                }
                let slot = self
                    .responders
                    .iter()
                    .position(|r| &r.id == responder_id)
                    .ok_or_else(|| StateError::UnknownResponder(responder_id.clone()))?;
                self.responders[slot].usage_count += 1;
                self.by_address.insert(address.clone(), *conversation);
                self.by_persona.insert(persona.address(), *conversation);
                self.mailnames.insert(persona.mailname.clone());
                self.next_conversation = self.next_conversation.max(conversation.0 + 1);
                self.conversations.insert(
                    *conversation,
                    Conversation {
                        id: *conversation,
                        target_address: address.clone(),
                        responder_id: responder_id.clone(),
                        strategy: responder_id.clone(),
                        persona: persona.clone(),
                        state: ConversationState::Initialized,
                        solicitation: solicitation.clone(),
                        messages: Vec::new(),
                        created_at: *at,
                        rng_seed: *rng_seed,
                        answered_through: 0,
                    },
                );
                self.refresh_pending(*conversation);
            }
            Event::MessageAppended {
                conversation,
                message,
            } => {
                let id = *conversation;
                let c = self.conv_mut(id)?;
                match message.direction {
                    MessageDirection::Outbound => {
                        if message.from != c.persona.address() || message.to != c.target_address {
                            return Err(StateError::Policy {
                                conversation: id,
                                detail: "outbound addressed outside its conversation".into(),
                            });
                        }
                        if !c.needs_bait() && !c.has_unanswered_inbound() {
                            return Err(StateError::Policy {
                                conversation: id,
                                detail: "outbound without an unanswered inbound".into(),
                            });
                        }
                        if c.state.is_stopped() {
                            return Err(StateError::Stopped(id));
                        }
                        c.messages.push(message.clone());
                        c.answered_through = c.messages.len();
                        if c.state == ConversationState::Initialized {
                            c.state = ConversationState::Baited;
                        }
                        let idx = c.messages.len() - 1;
                        if message.delivery.as_ref().is_some_and(|d| d.is_pending()) {
                            self.in_flight.insert((id, idx));
                        }
                    }
                    MessageDirection::Inbound => {
                        if message.from != c.target_address {
                            return Err(StateError::Policy {
                                conversation: id,
                                detail: "inbound from a sender other than the target".into(),
                            });
                        }
                        c.messages.push(message.clone());
                        if matches!(c.state, ConversationState::Initialized | ConversationState::Baited) {
                            c.state = ConversationState::Engaged;
                        }
                        if let Some(key) = &message.message_key {
                            self.seen_inbound.insert(key.clone());
                        }
                    }
                }
                self.refresh_pending(id);
            }
            Event::InboundSkipped {
                conversation,
                through,
                ..
            } => {
                let c = self.conv_mut(*conversation)?;
                c.answered_through = c.answered_through.max((*through).min(c.messages.len()));
                self.refresh_pending(*conversation);
            }
            Event::DeliveryUpdated {
                conversation,
                index,
                status,
                ..
            } => {
                let c = self.conv_mut(*conversation)?;
                let msg = c
                    .messages
                    .get_mut(*index)
                    .filter(|m| m.direction == MessageDirection::Outbound)
                    .ok_or(StateError::NoSuchMessage {
                        conversation: *conversation,
                        index: *index,
                    })?;
                msg.delivery = Some(status.clone());
                if status.is_pending() {
                    self.in_flight.insert((*conversation, *index));
                } else {
                    self.in_flight.remove(&(*conversation, *index));
                }
            }
            Event::ConversationStopped {
                conversation,
                reason,
                ..
            } => {
                let c = self.conv_mut(*conversation)?;
                if c.state.is_stopped() {
                    return Err(StateError::Stopped(*conversation));
                }
                c.state = ConversationState::Stopped(*reason);
                self.refresh_pending(*conversation);
            }
            Event::InboundQuarantined { inbound, reason } => {
                self.seen_inbound.insert(inbound.message_key.clone());
                self.quarantine.push(QuarantinedInbound {
                    inbound: inbound.clone(),
                    reason: *reason,
                });
            }
            Event::SendLoopHalted { reason, .. } => {
                self.send_halted = Some(reason.clone());
            }
            Event::SendLoopResumed { .. } => {
                self.send_halted = None;
            }
        }
        self.applied_events += 1;
        Ok(())
    }
}
