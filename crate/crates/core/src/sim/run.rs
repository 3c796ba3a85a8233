use chrono::{DateTime, Duration, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::{AgentKind, BounceMode, LoopbackProvider, Outbox, SimAgent, SimAgentSpec, SimConfig, SimError, SimGenerator};
use crate::address::EmailAddress;
use crate::archive::{
    compute_all_metrics, compute_metrics, cross_instance_report, write_archive_dir, Archive, CrossInstanceOptions,
    CrossInstanceReport, MetricsOptions, MetricsReport,
};
use crate::clock::{Clock, VirtualClock};
use crate::gateway::InboundEmail;
use crate::ingestion::{ReviewDecision, ScamReport};
use crate::orchestrator::{
    AdmitDecision, ConversationId, Event, Orchestrator, OrchestratorConfig, OrchestratorError, PolicyAuditor,
    RegisteredResponder, StopReason, Violation,
};
use crate::responders::{bundled_corpus, ClassifierTemplateResponder, GeneratorResponder, GeneratorSettings, Responder};
use crate::seed::{child_seed, labelled_seed, rng_for};

const FEED: &str = "sim-feed";
const REVIEWER: &str = "sim-reviewer";
const SCAM_DOMAINS: [&str; 3] = ["lure.test", "payout.test", "claims.test"];
const STOP_DELAY_SECS: i64 = 1_800;

/// Everything decided about one target before the run starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetPlan {
    pub address: String,
    /// Agent seen by each instance.
    pub agents: Vec<SimAgentSpec>,
    pub bounce: BounceMode,
    pub rejected: bool,
    pub arrival: DateTime<Utc>,
    pub subject: String,
    pub body: String,
}

fn draw_kind<R: Rng>(cfg: &SimConfig, rng: &mut R) -> AgentKind {
    let total: f64 = cfg.mix.iter().map(|m| m.weight.max(0.0)).sum();
    let mut x = rng.random_range(0.0..total);
    for m in &cfg.mix {
        let w = m.weight.max(0.0);
        if x < w {
            return m.agent.clone();
        }
        x -= w;
    }
    cfg.mix.last().map_or(AgentKind::Silent, |m| m.agent.clone())
}

/// Deterministic population. Each target draws from its own stream, so
/// growing the population leaves existing targets unchanged.
pub fn plan_population(cfg: &SimConfig) -> Vec<TargetPlan> {
    let corpus = bundled_corpus();
    let pop_seed = labelled_seed(cfg.master_seed, "population");
    let agent_seeds: Vec<u64> = (0..cfg.instances)
        .map(|i| labelled_seed(cfg.master_seed, &format!("agent-{i}")))
        .collect();
    let grouped: Vec<_> = cfg
        .groups
        .iter()
        .flat_map(|g| std::iter::repeat_n(g, g.count))
        .collect();
    let span = i64::from(cfg.arrival_hours.max(1)) * 3_600;
    (0..cfg.population())
        .map(|i| {
            let mut rng = rng_for(pop_seed, i as u64);
            let arrival = cfg.start + Duration::seconds(rng.random_range(0..span));
            let (kinds, bounce, rejected) = match grouped.get(i) {
                Some(g) => {
                    let b = g.agent_b.clone().unwrap_or_else(|| g.agent.clone());
                    (vec![g.agent.clone(), b], g.bounce, false)
                }
                None => {
                    let k = draw_kind(cfg, &mut rng);
                    let bounce = if rng.random_bool(cfg.bounce_rate) {
                        BounceMode::FirstSend
                    } else if rng.random_bool(cfg.late_bounce_rate) {
                        BounceMode::AfterSends(rng.random_range(1..=3))
                    } else {
                        BounceMode::Never
                    };
                    (vec![k.clone(), k], bounce, rng.random_bool(cfg.reject_rate))
                }
            };
            let agents = (0..usize::from(cfg.instances))
                .map(|inst| SimAgentSpec {
                    kind: kinds[inst].clone(),
                    seed: child_seed(agent_seeds[inst], i as u64),
                })
                .collect();
            let sample = &corpus[(i * 7) % corpus.len()];
            let subject: String = sample.text.split_whitespace().take(5).collect::<Vec<_>>().join(" ");
            TargetPlan {
                address: format!("t{i:05}@{}", SCAM_DOMAINS[i % SCAM_DOMAINS.len()]),
                agents,
                bounce,
                rejected,
                arrival,
                subject,
                body: sample.text.clone(),
            }
        })
        .collect()
}

fn build_responders(strategies: &[String]) -> Vec<RegisteredResponder> {
    strategies
        .iter()
        .map(|id| {
            let responder: Box<dyn Responder> = if id.starts_with("classifier") {
                Box::new(ClassifierTemplateResponder::bundled())
            } else {
                Box::new(GeneratorResponder {
                    generator: Box::new(SimGenerator::new(id.clone())),
                    settings: GeneratorSettings::default(),
                })
            };
            RegisteredResponder::new(id.clone(), responder, None)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutput {
    pub name: String,
    #[serde(skip)]
    pub archive: Archive,
    pub overall: MetricsReport,
    pub per_strategy: BTreeMap<String, MetricsReport>,
    pub usage: BTreeMap<String, u64>,
    pub events: u64,
    pub outbound_sent: usize,
    pub quarantined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRun {
    pub config: SimConfig,
    pub window_end: DateTime<Utc>,
    pub instances: Vec<InstanceOutput>,
    pub cross_instance: Option<CrossInstanceReport>,
}

impl SimRun {
    pub fn total_events(&self) -> u64 {
        self.instances.iter().map(|i| i.events).sum()
    }
}

enum Action {
    Arrive(usize),
    Tick(usize),
    Reply { inst: usize, target: usize, persona: String, subject: String, body: String },
    Stray { inst: usize, from: String, to: String, body: String },
    Stop { inst: usize, conv: ConversationId },
    End,
}

struct Instance {
    orch: Orchestrator,
    outbox: Outbox,
    auditor: PolicyAuditor,
    trace: Vec<Event>,
    agents: Vec<SimAgent>,
    next_tick: Option<DateTime<Utc>>,
    recipients: Vec<String>,
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    plans: Vec<TargetPlan>,
    by_address: BTreeMap<String, usize>,
    instances: Vec<Instance>,
    queue: BTreeMap<(DateTime<Utc>, u64), Action>,
    seq: u64,
    rng: rand_chacha::ChaCha8Rng,
    clock: VirtualClock,
    strays: u64,
}

impl Sim<'_> {
    fn push(&mut self, at: DateTime<Utc>, action: Action) {
        self.seq += 1;
        self.queue.insert((at, self.seq), action);
    }

    fn orch_err(inst: usize) -> impl Fn(OrchestratorError) -> SimError {
        move |source| SimError::Orchestrator { instance: inst, source }
    }

    fn align(&self, t: DateTime<Utc>) -> DateTime<Utc> {
        let poll = self.cfg.poll_interval_secs as i64;
        let offset = (t - self.cfg.start).num_seconds().max(0);
        let steps = (offset + poll - 1) / poll;
        let aligned = self.cfg.start + Duration::seconds(steps * poll);
        if aligned < t {
            aligned + Duration::seconds(poll)
        } else {
            aligned
        }
    }

    /// Audits new events, hands delivered mail to agents and reschedules the poll.
    fn settle(&mut self, inst: usize, now: DateTime<Utc>) -> Result<(), SimError> {
        let events = self.instances[inst].orch.drain_journal();
        for event in events {
            let ins = &mut self.instances[inst];
            let verdict = ins.auditor.observe(&event);
            ins.trace.push(event);
            if let Err(violation) = verdict {
                return Err(SimError::Violation {
                    instance: inst,
                    violation,
                    trace: std::mem::take(&mut ins.trace),
                });
            }
        }
        let sent: Vec<_> = std::mem::take(&mut *self.instances[inst].outbox.lock().expect("outbox poisoned"));
        for req in sent {
            self.instances[inst].recipients.push(req.to.clone());
            let Some(&target) = self.by_address.get(&req.to.to_lowercase()) else {
                continue;
            };
            if let Some(reply) = self.instances[inst].agents[target].step(&req.text, now) {
                let subject = format!("Re: {}", req.subject.trim_start_matches("Re: "));
                self.push(
                    reply.at,
                    Action::Reply { inst, target, persona: req.from_address.clone(), subject, body: reply.body },
                );
            }
        }
        if let Some(w) = self.instances[inst].orch.next_wakeup(now) {
            let at = self.align(w);
            if self.instances[inst].next_tick.is_none_or(|t| at < t) {
                self.instances[inst].next_tick = Some(at);
                self.push(at, Action::Tick(inst));
            }
        }
        Ok(())
    }

    fn handle(&mut self, now: DateTime<Utc>, action: Action) -> Result<(), SimError> {
        match action {
            Action::Arrive(t) => {
                let plan = self.plans[t].clone();
                let report = ScamReport::new(FEED, &plan.address, &plan.subject, &plan.body, now)
                    .map_err(|e| SimError::Config(e.to_string()))?;
                let address = report.sender_address.clone();
                let decision = if plan.rejected { ReviewDecision::Reject } else { ReviewDecision::Approve };
                for inst in 0..self.instances.len() {
                    let orch = &mut self.instances[inst].orch;
                    orch.ingest_report(report.clone()).map_err(Self::orch_err(inst))?;
                    orch.review_target(&address, decision, REVIEWER, "", now)
                        .map_err(Self::orch_err(inst))?;
                    self.settle(inst, now)?;
                }
            }
            Action::Tick(inst) => {
                if self.instances[inst].next_tick != Some(now) {
                    return Ok(());
                }
                self.instances[inst].next_tick = None;
                self.instances[inst].orch.tick(now).map_err(Self::orch_err(inst))?;
                self.settle(inst, now)?;
            }
            Action::Reply { inst, target, persona, subject, body } => {
                let from = self.plans[target].address.clone();
                let decision = self.admit(inst, &from, &persona, &subject, &body, now)?;
                if let AdmitDecision::Route(conv) = decision {
                    if self.rng.random_bool(self.cfg.operator_stop_rate) {
                        self.push(now + Duration::seconds(STOP_DELAY_SECS), Action::Stop { inst, conv });
                    }
                    if self.rng.random_bool(self.cfg.stray_rate) {
                        self.schedule_stray(inst, &from, &persona, now);
                    }
                }
                self.settle(inst, now)?;
            }
            Action::Stray { inst, from, to, body } => {
                self.admit(inst, &from, &to, "Hello", &body, now)?;
                self.settle(inst, now)?;
            }
            Action::Stop { inst, conv } => {
                let stopped = self.instances[inst]
                    .orch
                    .conversation(conv)
                    .is_none_or(|c| c.state.is_stopped());
                if !stopped {
                    self.instances[inst]
                        .orch
                        .stop_conversation(conv, StopReason::OperatorStop, true, now)
                        .map_err(Self::orch_err(inst))?;
                }
                self.settle(inst, now)?;
            }
            Action::End => {
                for inst in 0..self.instances.len() {
                    let open: Vec<ConversationId> = self.instances[inst]
                        .orch
                        .conversations()
                        .filter(|c| !c.state.is_stopped())
                        .map(|c| c.id)
                        .collect();
                    for id in open {
                        self.instances[inst]
                            .orch
                            .stop_conversation(id, StopReason::ExperimentEnd, false, now)
                            .map_err(Self::orch_err(inst))?;
                    }
                    self.settle(inst, now)?;
                }
            }
        }
        Ok(())
    }

    /// Either an unknown sender, or a known target writing to someone
    /// else's persona.
    fn schedule_stray(&mut self, inst: usize, from: &str, persona: &str, now: DateTime<Utc>) {
        self.strays += 1;
        let n = self.strays;
        let other = self.instances[inst]
            .orch
            .conversations()
            .map(|c| c.persona.address().to_string())
            .find(|p| p != persona);
        let (sender, to) = match other {
            Some(p) if self.rng.random_bool(0.5) => (from.to_owned(), p),
            _ => (format!("stray{n:05}@elsewhere.test"), persona.to_owned()),
        };
        let body = format!("Urgent notice {n}: your parcel is waiting, confirm your details.");
        self.push(now + Duration::seconds(1), Action::Stray { inst, from: sender, to, body });
    }

    fn admit(
        &mut self,
        inst: usize,
        from: &str,
        to: &str,
        subject: &str,
        body: &str,
        now: DateTime<Utc>,
    ) -> Result<AdmitDecision, SimError> {
        let parse = |a: &str| EmailAddress::parse(a).map_err(|e| SimError::Config(e.to_string()));
        self.seq += 1;
        let inbound = InboundEmail {
            message_key: format!("sim-{inst}-{}", self.seq),
            from: parse(from)?,
            to: parse(to)?,
            subject: subject.to_owned(),
            body_text: body.to_owned(),
            received_at: now,
            parse_warning: None,
        };
        self.instances[inst].orch.admit_inbound(inbound).map_err(Self::orch_err(inst))
    }
}

fn post_run_checks(inst: usize, ins: &Instance) -> Result<(), SimError> {
    let fail = |rule: &'static str, detail: String| SimError::Violation {
        instance: inst,
        violation: Violation { event_index: ins.auditor.events_seen(), rule, detail },
        trace: ins.trace.clone(),
    };
    let quarantined: BTreeSet<String> =
        ins.auditor.quarantined_senders().iter().map(|a| a.as_str().to_owned()).collect();
    if let Some(r) = ins.recipients.iter().find(|r| quarantined.contains(&r.to_lowercase())) {
        return Err(fail("quarantined-recipient", r.clone()));
    }
    if ins.auditor.usage_spread() > 1 {
        return Err(fail("least-used", format!("{:?}", ins.auditor.usage())));
    }
    Ok(())
}

/// Runs the configured experiment to completion.
pub fn run_experiment(cfg: &SimConfig) -> Result<SimRun, SimError> {
    cfg.validate()?;
    let plans = plan_population(cfg);
    let windows = cfg.send_windows();
    let mut instances = Vec::new();
    for (inst, window) in windows.iter().enumerate().take(usize::from(cfg.instances)) {
        let mut provider = LoopbackProvider::new(
            child_seed(labelled_seed(cfg.master_seed, "provider"), inst as u64),
            cfg.transient_rate,
        );
        for p in &plans {
            provider.script_bounce(&p.address, p.bounce);
        }
        let outbox = provider.outbox();
        let mut oc = OrchestratorConfig::new(format!("{}.sim.test", (b'a' + inst as u8) as char));
        oc.poll_interval_secs = cfg.poll_interval_secs;
        oc.send_window = window.clone();
        oc.master_seed = child_seed(cfg.master_seed, inst as u64);
        let mut orch =
            Orchestrator::new(oc, build_responders(&cfg.strategies), Box::new(provider)).map_err(Sim::orch_err(inst))?;
        orch.enable_journal();
        instances.push(Instance {
            orch,
            outbox,
            auditor: PolicyAuditor::new(),
            trace: Vec::new(),
            agents: plans.iter().map(|p| SimAgent::new(p.agents[inst].clone())).collect(),
            next_tick: None,
            recipients: Vec::new(),
        });
    }
    let end = cfg.end();
    let mut sim = Sim {
        cfg,
        by_address: plans.iter().enumerate().map(|(i, p)| (p.address.to_lowercase(), i)).collect(),
        plans,
        instances,
        queue: BTreeMap::new(),
        seq: 0,
        rng: rng_for(labelled_seed(cfg.master_seed, "events"), 0),
        clock: VirtualClock::starting_at(cfg.start),
        strays: 0,
    };
    for i in 0..sim.plans.len() {
        let at = sim.plans[i].arrival;
        sim.push(at, Action::Arrive(i));
    }
    sim.queue.insert((end, u64::MAX), Action::End);
    while let Some(((at, _), action)) = sim.queue.pop_first() {
        if at > end {
            break;
        }
        sim.clock.advance_to(at);
        let now = sim.clock.now();
        let last = matches!(action, Action::End);
        sim.handle(now, action)?;
        if last {
            break;
        }
    }
    for (i, ins) in sim.instances.iter().enumerate() {
        post_run_checks(i, ins)?;
    }

    let opts = MetricsOptions { window_end: Some(end), ..MetricsOptions::default() };
    let outputs: Vec<InstanceOutput> = sim
        .instances
        .iter()
        .enumerate()
        .map(|(i, ins)| {
            let archive = ins.orch.archive();
            InstanceOutput {
                name: format!("instance-{}", (b'a' + i as u8) as char),
                overall: compute_metrics(&archive, None, &opts),
                per_strategy: compute_all_metrics(&archive, &opts),
                usage: ins.auditor.usage().clone(),
                events: ins.auditor.events_seen(),
                outbound_sent: ins.recipients.len(),
                quarantined: ins.orch.state().quarantine.len(),
                archive,
            }
        })
        .collect();
    let cross_instance = match outputs.as_slice() {
        [a, b] => Some(cross_instance_report(&a.archive, &b.archive, &CrossInstanceOptions::new(end))?),
        _ => None,
    };
    Ok(SimRun { config: cfg.clone(), window_end: end, instances: outputs, cross_instance })
}

/// `<dir>/<instance>/archive/...` for each instance plus `<dir>/metrics.json`.
pub fn write_run(run: &SimRun, dir: &Path) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    for ins in &run.instances {
        write_archive_dir(&ins.archive, &dir.join(&ins.name).join("archive"))?;
    }
    let json = serde_json::to_string_pretty(run)?;
    fs::write(dir.join("metrics.json"), json + "\n")?;
    Ok(())
}
