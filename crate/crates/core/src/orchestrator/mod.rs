//! Conversation lifecycle: responder assignment, personas, inbound routing,
//! send scheduling under the contact policies, and event-sourced persistence.

mod audit;
mod conversation;
mod events;
mod persona;
mod registry;
mod schedule;
mod state;

pub use audit::{PolicyAuditor, Violation};
pub use conversation::{
    Conversation, ConversationId, ConversationState, Message, MessageDirection, Solicitation,
    StopReason,
};
pub use events::{Event, EventLog, QuarantineReason};
pub use persona::{bundled_names, generate_persona, mailname_pattern, Persona, PersonaError, MAX_PERSONA_ATTEMPTS};
pub use registry::{assign_responder, least_used, NoResponders, ResponderDescriptor};
pub use schedule::{
    schedule_send, HourRange, NoSendReason, ReplyKind, ReplyRequest, SendDecision, SendWindow,
    WindowParseError,
};
pub use state::{OrchestratorState, QuarantinedInbound, StateError};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::address::EmailAddress;
use crate::archive::{Archive, ArchivedConversation, Direction, TranscriptMessage, CRAWLER};
use crate::gateway::{
    deliver_attempt, drop_quoted_lines, lint_no_quote, render_reply, DeliveryStatus, DeliveryStep,
    InboundEmail, MailProvider, OutboundEmail, RenderedReply,
};
use crate::ingestion::{IngestOutcome, IngestionError, ReviewDecision, ScamReport, Target, TargetRegistry, TargetState};
use crate::responders::{ReplyContext, Responder};
use crate::seed;

pub const DEFAULT_POLL_INTERVAL_SECS: u64 = 60;
pub const AUTO_REVIEWER: &str = "auto-approve";
pub const DEFAULT_DEBRIEF: &str = "Thank you for your messages. This mailbox is part of a research study on \
fraudulent email, and nobody here will send money, documents or personal details. \
We will not write to you again.";

const SNAPSHOT_FILE: &str = "snapshot.json";
const EVENTS_FILE: &str = "events.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorConfig {
    pub domain: String,
    pub poll_interval_secs: u64,
    pub send_window: SendWindow,
    pub master_seed: u64,
    /// Approve every new target without review. Simulation only.
    pub auto_approve: bool,
    pub debrief_text: String,
    pub fake_names: Vec<String>,
}

impl OrchestratorConfig {
    pub fn new(domain: impl Into<String>) -> Self {
        OrchestratorConfig {
            domain: domain.into(),
            poll_interval_secs: DEFAULT_POLL_INTERVAL_SECS,
            send_window: SendWindow::always(),
            master_seed: 0,
            auto_approve: false,
            debrief_text: DEFAULT_DEBRIEF.to_owned(),
            fake_names: bundled_names(),
        }
    }
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Ingestion(#[from] IngestionError),
    #[error(transparent)]
    NoResponders(#[from] NoResponders),
    #[error(transparent)]
    Persona(#[from] PersonaError),
    #[error("unknown conversation {0}")]
    UnknownConversation(ConversationId),
    #[error("conversation {0} is already stopped")]
    AlreadyStopped(ConversationId),
    #[error("target `{0}` has no recorded solicitation")]
    NoSolicitation(String),
    #[error("simulation.auto_approve is only allowed with a simulated mail provider")]
    AutoApproveRefused,
    #[error("event log: {0}")]
    Io(#[from] io::Error),
    #[error("snapshot: {0}")]
    Snapshot(#[from] serde_json::Error),
}

/// A responder plus its registry entry.
pub struct RegisteredResponder {
    pub descriptor: ResponderDescriptor,
    pub responder: Box<dyn Responder>,
}

impl RegisteredResponder {
    pub fn new(id: impl Into<String>, responder: Box<dyn Responder>, endpoint: Option<String>) -> Self {
        let descriptor = ResponderDescriptor::new(id, responder.kind(), endpoint);
        RegisteredResponder {
            descriptor,
            responder,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "detail", rename_all = "snake_case")]
pub enum AdmitDecision {
    Route(ConversationId),
    Quarantine(QuarantineReason),
    /// Same message key seen before; nothing recorded.
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DebriefOutcome {
    NotRequested,
    Queued,
    /// No unanswered inbound, so sending would break the reply budget.
    Refused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopOutcome {
    pub conversation: Conversation,
    pub debrief: DebriefOutcome,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickReport {
    pub conversations_created: usize,
    pub queued: usize,
    pub deferred: usize,
    pub skipped: usize,
    pub delivered: usize,
    pub retried: usize,
    pub undeliverable: usize,
    pub halted: bool,
}

enum SendOutcome {
    Queued,
    Deferred,
    Skipped,
    Nothing,
}

pub struct Orchestrator {
    config: OrchestratorConfig,
    state: OrchestratorState,
    responders: BTreeMap<String, Box<dyn Responder>>,
    provider: Box<dyn MailProvider>,
    log: Option<EventLog>,
    data_dir: Option<PathBuf>,
    journal: Option<Vec<Event>>,
    /// Earliest time a deferred conversation is retried. Not persisted.
    retry_after: BTreeMap<ConversationId, DateTime<Utc>>,
}

impl Orchestrator {
    /// An instance without persistence.
    pub fn new(
        config: OrchestratorConfig,
        responders: Vec<RegisteredResponder>,
        provider: Box<dyn MailProvider>,
    ) -> Result<Self, OrchestratorError> {
        if config.auto_approve && !provider.is_simulated() {
            return Err(OrchestratorError::AutoApproveRefused);
        }
        let mut orch = Orchestrator {
            config,
            state: OrchestratorState::with_responders(Vec::new()),
            responders: BTreeMap::new(),
            provider,
            log: None,
            data_dir: None,
            journal: None,
            retry_after: BTreeMap::new(),
        };
        orch.install_responders(responders);
        Ok(orch)
    }

    /// Opens (or creates) a persistent instance in `dir`: loads the snapshot
    /// if present, then replays the event log past it.
    pub fn open(
        config: OrchestratorConfig,
        responders: Vec<RegisteredResponder>,
        provider: Box<dyn MailProvider>,
        dir: &Path,
    ) -> Result<Self, OrchestratorError> {
        let mut orch = Self::new(config, Vec::new(), provider)?;
        fs::create_dir_all(dir)?;
        let snap = dir.join(SNAPSHOT_FILE);
        if snap.exists() {
            orch.state = serde_json::from_str(&fs::read_to_string(&snap)?)?;
        }
        let events = EventLog::read_all(&dir.join(EVENTS_FILE))?;
        let skip = orch.state.applied_events as usize;
        if skip > events.len() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("snapshot covers {skip} events but the log has {}", events.len()),
            )
            .into());
        }
        orch.install_responders(responders);
        for e in &events[skip..] {
            orch.state.apply(e)?;
        }
        orch.log = Some(EventLog::open(&dir.join(EVENTS_FILE))?);
        orch.data_dir = Some(dir.to_owned());
        Ok(orch)
    }

    /// Rebuilds an instance from an in-memory event sequence.
    pub fn replay(
        config: OrchestratorConfig,
        responders: Vec<RegisteredResponder>,
        provider: Box<dyn MailProvider>,
        events: &[Event],
    ) -> Result<Self, OrchestratorError> {
        let mut orch = Self::new(config, responders, provider)?;
        for e in events {
            orch.state.apply(e)?;
        }
        Ok(orch)
    }

    fn install_responders(&mut self, responders: Vec<RegisteredResponder>) {
        for r in responders {
            if !self.state.responders.iter().any(|d| d.id == r.descriptor.id) {
                self.state.responders.push(r.descriptor.clone());
            }
            self.responders.insert(r.descriptor.id, r.responder);
        }
    }

    pub fn write_snapshot(&self) -> Result<(), OrchestratorError> {
        let Some(dir) = &self.data_dir else { return Ok(()) };
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec(&self.state)?)?;
        fs::rename(&tmp, dir.join(SNAPSHOT_FILE))?;
        Ok(())
    }

    /// Keep every emitted event for [`Orchestrator::drain_journal`].
    pub fn enable_journal(&mut self) {
        self.journal.get_or_insert_with(Vec::new);
    }

    pub fn drain_journal(&mut self) -> Vec<Event> {
        self.journal.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    pub fn state(&self) -> &OrchestratorState {
        &self.state
    }

    pub fn targets(&self) -> &TargetRegistry {
        &self.state.targets
    }

    pub fn conversation(&self, id: ConversationId) -> Option<&Conversation> {
        self.state.conversations.get(&id)
    }

    pub fn conversations(&self) -> impl Iterator<Item = &Conversation> {
        self.state.conversations.values()
    }

    pub fn responders(&self) -> &[ResponderDescriptor] {
        &self.state.responders
    }

    pub fn provider(&self) -> &dyn MailProvider {
        self.provider.as_ref()
    }

    fn emit(&mut self, event: Event) -> Result<(), OrchestratorError> {
        self.state.apply(&event)?;
        if let Some(log) = &mut self.log {
            log.append(&event)?;
        }
        if let Some(j) = &mut self.journal {
            j.push(event);
        }
        Ok(())
    }

    pub fn ingest_report(&mut self, report: ScamReport) -> Result<IngestOutcome, OrchestratorError> {
        TargetRegistry::validate(&report)?;
        let targets = &self.state.targets;
        let outcome = if targets.report(&report.raw_hash).is_some() {
            IngestOutcome::DuplicateReport
        } else if targets.get(&report.sender_address).is_some() {
            IngestOutcome::DuplicateAddress
        } else {
            IngestOutcome::NewTarget
        };
        let address = report.sender_address.clone();
        let at = report.reported_at;
        self.emit(Event::ReportIngested { report })?;
        if outcome == IngestOutcome::NewTarget && self.config.auto_approve {
            self.emit(Event::TargetReviewed {
                at,
                address,
                decision: ReviewDecision::Approve,
                reviewer: AUTO_REVIEWER.into(),
                note: String::new(),
            })?;
        }
        Ok(outcome)
    }

    pub fn review_target(
        &mut self,
        address: &EmailAddress,
        decision: ReviewDecision,
        reviewer: &str,
        note: &str,
        now: DateTime<Utc>,
    ) -> Result<Target, OrchestratorError> {
        let target = self
            .state
            .targets
            .get(address)
            .ok_or_else(|| IngestionError::UnknownTarget(address.to_string()))?;
        if target.state != TargetState::PendingReview {
            let to = match decision {
                ReviewDecision::Approve => TargetState::Approved,
                ReviewDecision::Reject => TargetState::Rejected,
            };
            return Err(IngestionError::IllegalTransition {
                address: address.to_string(),
                from: target.state,
                to,
            }
            .into());
        }
        self.emit(Event::TargetReviewed {
            at: now,
            address: address.clone(),
            decision,
            reviewer: reviewer.to_owned(),
            note: note.to_owned(),
        })?;
        Ok(self.state.targets.get(address).cloned().expect("just reviewed"))
    }

    fn pick_responder(&self) -> Result<String, NoResponders> {
        let usable: Vec<ResponderDescriptor> = self
            .state
            .responders
            .iter()
            .filter(|d| self.responders.contains_key(&d.id))
            .cloned()
            .collect();
        least_used(&usable).map(|i| usable[i].id.clone())
    }

    fn create_conversation(&mut self, address: &EmailAddress, now: DateTime<Utc>) -> Result<ConversationId, OrchestratorError> {
        let report = self
            .state
            .targets
            .first_report_of(address)
            .ok_or_else(|| OrchestratorError::NoSolicitation(address.to_string()))?;
        let solicitation = Solicitation {
            subject: report.subject.clone(),
            body_text: report.body_text.clone(),
            reported_at: report.reported_at,
        };
        let responder_id = self.pick_responder()?;
        let seq = self.state.next_conversation;
        let master = self.config.master_seed;
        let mut rng = seed::rng_for(seed::labelled_seed(master, "persona"), seq);
        let persona = generate_persona(
            &mut rng,
            &self.config.domain,
            self.state.mailnames(),
            &self.config.fake_names,
        )?;
        let id = ConversationId(seq);
        self.emit(Event::ConversationCreated {
            at: now,
            conversation: id,
            address: address.clone(),
            responder_id,
            persona,
            rng_seed: seed::child_seed(seed::labelled_seed(master, "conversation"), seq),
            solicitation,
        })?;
        Ok(id)
    }

    /// Routes or quarantines an inbound message. Everything is recorded
    /// except exact replays of an already-seen message.
    pub fn admit_inbound(&mut self, inbound: InboundEmail) -> Result<AdmitDecision, OrchestratorError> {
        if self.state.seen_inbound(&inbound.message_key) {
            return Ok(AdmitDecision::Duplicate);
        }
        let sender_has_conversation = self.state.conversation_for(&inbound.from).is_some();
        let route = match self.state.conversation_for_persona(&inbound.to) {
            Some(c) if c.target_address == inbound.from => Ok((c.id, c.last_timestamp())),
            Some(_) if sender_has_conversation => Err(QuarantineReason::AddressMismatch),
            Some(_) => Err(QuarantineReason::UnknownSender),
            None => Err(QuarantineReason::UnknownRecipient),
        };
        match route {
            Ok((id, last)) => {
                let timestamp = last.map_or(inbound.received_at, |l| l.max(inbound.received_at));
                self.emit(Event::MessageAppended {
                    conversation: id,
                    message: Message {
                        direction: MessageDirection::Inbound,
                        from: inbound.from,
                        to: inbound.to,
                        subject: inbound.subject,
                        body_text: inbound.body_text,
                        timestamp,
                        html_body: None,
                        delivery: None,
                        message_key: Some(inbound.message_key),
                        template_index: None,
                    },
                })?;
                Ok(AdmitDecision::Route(id))
            }
            Err(reason) => {
                self.emit(Event::InboundQuarantined { inbound, reason })?;
                Ok(AdmitDecision::Quarantine(reason))
            }
        }
    }

    fn outbound_message(conv: &Conversation, rendered: RenderedReply, now: DateTime<Utc>, template_index: Option<usize>) -> Message {
        let timestamp = conv.last_timestamp().map_or(now, |l| l.max(now));
        Message {
            direction: MessageDirection::Outbound,
            from: rendered.from_address,
            to: conv.target_address.clone(),
            subject: rendered.subject,
            body_text: rendered.text_body,
            timestamp,
            html_body: Some(rendered.html_body),
            delivery: Some(DeliveryStatus::Queued),
            message_key: None,
            template_index,
        }
    }

    fn try_send(&mut self, id: ConversationId, now: DateTime<Utc>) -> Result<SendOutcome, OrchestratorError> {
        let Some(conv) = self.state.conversations.get(&id) else {
            return Ok(SendOutcome::Nothing);
        };
        let target_state = self.state.targets.get(&conv.target_address).map(|t| t.state);
        let req = match schedule_send(conv, target_state, now, &self.config.send_window) {
            SendDecision::Send(req) => req,
            SendDecision::Defer(_) => return Ok(SendOutcome::Deferred),
            SendDecision::NoSend(_) => return Ok(SendOutcome::Nothing),
        };
        if self.retry_after.get(&id).is_some_and(|t| *t > now) {
            return Ok(SendOutcome::Deferred);
        }
        let Some(responder) = self.responders.get(&conv.responder_id) else {
            log::warn!("{id}: responder `{}` is not loaded", conv.responder_id);
            return Ok(SendOutcome::Deferred);
        };
        let (answer_body, answer_subject) = match (req.kind, conv.last_inbound()) {
            (ReplyKind::Reply, Some(m)) => (conv.unanswered_bodies().join("\n"), m.subject.clone()),
            _ => (conv.solicitation.body_text.clone(), conv.solicitation.subject.clone()),
        };
        let turns = conv.turns();
        let ctx = ReplyContext {
            strategy_id: &conv.strategy,
            persona: &conv.persona,
            history: &turns,
            last_template: conv.last_template(),
        };
        let mut rng = seed::rng_for(conv.rng_seed, conv.count(MessageDirection::Outbound) as u64);
        let retry_at = now + Duration::seconds(self.config.poll_interval_secs.max(1) as i64);
        let draft = match responder.compose(&ctx, &mut rng) {
            Ok(d) => d,
            Err(e) => {
                log::warn!("{id}: reply deferred: {e}");
                self.retry_after.insert(id, retry_at);
                return Ok(SendOutcome::Deferred);
            }
        };
        let rendered = render_reply(&draft.text, &conv.persona, &answer_subject)
            .ok()
            .filter(|r| lint_no_quote(r, &answer_body).is_ok())
            .or_else(|| {
                let cleaned = drop_quoted_lines(&draft.text, &answer_body);
                render_reply(&cleaned, &conv.persona, &answer_subject)
                    .ok()
                    .filter(|r| lint_no_quote(r, &answer_body).is_ok())
            });
        let Some(rendered) = rendered else {
            if req.kind == ReplyKind::Bait {
                self.retry_after.insert(id, retry_at);
                return Ok(SendOutcome::Deferred);
            }
            let through = conv.messages.len();
            self.emit(Event::InboundSkipped {
                at: now,
                conversation: id,
                through,
                reason: "reply would quote the inbound message".into(),
            })?;
            return Ok(SendOutcome::Skipped);
        };
        let message = Self::outbound_message(conv, rendered, now, draft.template_index);
        let address = conv.target_address.clone();
        self.retry_after.remove(&id);
        self.emit(Event::MessageAppended {
            conversation: id,
            message,
        })?;
        if req.kind == ReplyKind::Bait {
            self.emit(Event::TargetTransitioned {
                at: now,
                address,
                to: TargetState::Contacted,
            })?;
        }
        Ok(SendOutcome::Queued)
    }

    fn deliver_due(&mut self, now: DateTime<Utc>, report: &mut TickReport) -> Result<(), OrchestratorError> {
        if !self.config.send_window.is_open(now) {
            return Ok(());
        }
        let due: Vec<(ConversationId, usize)> = self.state.in_flight().iter().copied().collect();
        for (id, idx) in due {
            let conv = &self.state.conversations[&id];
            let msg = &conv.messages[idx];
            let status = msg.delivery.clone().unwrap_or(DeliveryStatus::Queued);
            if status.due_at(msg.timestamp).is_none_or(|t| t > now) {
                continue;
            }
            let mut email = OutboundEmail {
                persona: conv.persona.clone(),
                to: msg.to.clone(),
                subject: msg.subject.clone(),
                html_body: msg.html_body.clone().unwrap_or_default(),
                text_body: msg.body_text.clone(),
                queued_at: msg.timestamp,
                delivery: status,
            };
            let step = deliver_attempt(&mut email, self.provider.as_mut(), now);
            if let DeliveryStep::Halt(reason) = step {
                log::error!("provider rejected credentials, halting sends: {reason}");
                self.emit(Event::SendLoopHalted { at: now, reason })?;
                report.halted = true;
                return Ok(());
            }
            self.emit(Event::DeliveryUpdated {
                at: now,
                conversation: id,
                index: idx,
                status: email.delivery,
            })?;
            match step {
                DeliveryStep::Delivered(_) => report.delivered += 1,
                DeliveryStep::Retry { .. } => report.retried += 1,
                DeliveryStep::Undeliverable(reason) => {
                    report.undeliverable += 1;
                    log::info!("{id}: undeliverable: {reason}");
                    if !self.state.conversations[&id].state.is_stopped() {
                        self.stop_conversation(id, StopReason::Undeliverable, false, now)?;
                    }
                }
                DeliveryStep::Halt(_) => unreachable!(),
            }
        }
        Ok(())
    }

    /// One poll: open conversations for newly approved targets, compose due
    /// replies, then push queued mail to the provider.
    pub fn tick(&mut self, now: DateTime<Utc>) -> Result<TickReport, OrchestratorError> {
        let mut report = TickReport::default();
        if self.state.send_halted.is_some() {
            report.halted = true;
            return Ok(report);
        }
        for address in self.state.awaiting_conversation() {
            self.create_conversation(&address, now)?;
            report.conversations_created += 1;
        }
        let pending: Vec<ConversationId> = self.state.pending().iter().copied().collect();
        for id in pending {
            match self.try_send(id, now)? {
                SendOutcome::Queued => report.queued += 1,
                SendOutcome::Deferred => report.deferred += 1,
                SendOutcome::Skipped => report.skipped += 1,
                SendOutcome::Nothing => {}
            }
        }
        self.deliver_due(now, &mut report)?;
        Ok(report)
    }

    /// Clears a credentials halt once the operator has fixed the provider.
    pub fn resume_sending(&mut self, now: DateTime<Utc>) -> Result<(), OrchestratorError> {
        if self.state.send_halted.is_some() {
            self.emit(Event::SendLoopResumed { at: now })?;
        }
        Ok(())
    }

    /// The earliest time at which [`Orchestrator::tick`] has work to do.
    pub fn next_wakeup(&self, now: DateTime<Utc>) -> Option<DateTime<Utc>> {
        if self.state.send_halted.is_some() {
            return None;
        }
        let window = &self.config.send_window;
        let mut best: Option<DateTime<Utc>> = None;
        let mut consider = |t: DateTime<Utc>| {
            let t = t.max(now);
            best = Some(best.map_or(t, |b| b.min(t)));
        };
        if !self.state.awaiting_conversation().is_empty() {
            consider(now);
        }
        for id in self.state.pending() {
            let conv = &self.state.conversations[id];
            let ts = self.state.targets.get(&conv.target_address).map(|t| t.state);
            let at = match schedule_send(conv, ts, now, window) {
                SendDecision::Send(_) => now,
                SendDecision::Defer(t) => t,
                SendDecision::NoSend(_) => continue,
            };
            let retry = self.retry_after.get(id).copied().unwrap_or(at);
            consider(window.next_open(at.max(retry)));
        }
        for (id, idx) in self.state.in_flight() {
            let msg = &self.state.conversations[id].messages[*idx];
            if let Some(due) = msg.delivery.as_ref().and_then(|d| d.due_at(msg.timestamp)) {
                consider(window.next_open(due.max(now)));
            }
        }
        best
    }

    pub fn stop_conversation(
        &mut self,
        id: ConversationId,
        reason: StopReason,
        debrief: bool,
        now: DateTime<Utc>,
    ) -> Result<StopOutcome, OrchestratorError> {
        let conv = self
            .state
            .conversations
            .get(&id)
            .ok_or(OrchestratorError::UnknownConversation(id))?;
        if conv.state.is_stopped() {
            return Err(OrchestratorError::AlreadyStopped(id));
        }
        let mut outcome = DebriefOutcome::NotRequested;
        if debrief {
            let subject = conv
                .last_inbound()
                .map_or(conv.solicitation.subject.clone(), |m| m.subject.clone());
            let rendered = render_reply(&self.config.debrief_text, &conv.persona, &subject).ok();
            match rendered {
                Some(r) if conv.has_unanswered_inbound() => {
                    let message = Self::outbound_message(conv, r, now, None);
                    self.emit(Event::MessageAppended {
                        conversation: id,
                        message,
                    })?;
                    outcome = DebriefOutcome::Queued;
                }
                _ => {
                    log::warn!("{id}: debrief refused, no unanswered inbound");
                    outcome = DebriefOutcome::Refused;
                }
            }
        }
        self.emit(Event::ConversationStopped {
            at: now,
            conversation: id,
            reason,
        })?;
        let address = self.state.conversations[&id].target_address.clone();
        let current = self.state.targets.get(&address).map(|t| t.state);
        let next = match reason {
            StopReason::Undeliverable => TargetState::Unreachable,
            StopReason::OperatorStop | StopReason::ExperimentEnd => TargetState::DoNotContact,
        };
        if current.is_some_and(|s| s.can_transition_to(next)) {
            self.emit(Event::TargetTransitioned {
                at: now,
                address,
                to: next,
            })?;
        }
        self.retry_after.remove(&id);
        Ok(StopOutcome {
            conversation: self.state.conversations[&id].clone(),
            debrief: outcome,
        })
    }

    /// All conversations in transcript form.
    pub fn archive(&self) -> Archive {
        Archive::new(self.conversations().map(archive_conversation).collect())
    }
}

pub fn archive_conversation(conv: &Conversation) -> ArchivedConversation {
    let target = conv.target_address.to_string();
    let mut messages = vec![TranscriptMessage {
        direction: Direction::Solicitation,
        from: target.clone(),
        to: CRAWLER.to_owned(),
        time: conv.solicitation.reported_at,
        subject: conv.solicitation.subject.clone(),
        body: conv.solicitation.body_text.clone(),
    }];
    messages.extend(conv.messages.iter().map(|m| TranscriptMessage {
        direction: match m.direction {
            MessageDirection::Inbound => Direction::Inbound,
            MessageDirection::Outbound => Direction::Outbound,
        },
        from: m.from.to_string(),
        to: m.to.to_string(),
        time: m.timestamp,
        subject: m.subject.clone(),
        body: m.body_text.clone(),
    }));
    let first_bounced = conv
        .messages
        .iter()
        .find(|m| m.direction == MessageDirection::Outbound)
        .is_some_and(|m| matches!(m.delivery, Some(DeliveryStatus::Undeliverable { .. })));
    ArchivedConversation {
        id: conv.id.to_string(),
        strategy: conv.strategy.clone(),
        target,
        messages,
        stop_reason: match conv.state {
            ConversationState::Stopped(r) => Some(r.as_str().to_owned()),
            _ => None,
        },
        unreachable_at_first_send: first_bounced,
    }
}
