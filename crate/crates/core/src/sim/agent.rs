use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const ROUND_PLACEHOLDER: &str = "{round}";

pub fn default_autoresponder_body() -> String {
    "Thank you for your email. I am away from my desk and will answer your message as soon as I return.".into()
}

pub fn default_persistent_bodies() -> Vec<String> {
    [
        "Thanks for getting back to me. For step {round} of the process I need your full name and phone number.",
        "My dear, I received your mail (note {round}). The transfer office asks for a small handling fee before release.",
        "Good day. We are making progress, reference {round}. Kindly confirm that you can pay the clearance charge this week.",
        "Hello again. Regarding item {round}: the bank manager is waiting for your reply and the documents.",
        "I appreciate your patience, file {round}. Please send the payment receipt so we can continue.",
        "Dear partner, update {round}: everything is ready on our side, we only need your confirmation.",
    ]
    .into_iter()
    .map(str::to_owned)
    .collect()
}

/// Behaviour of a simulated scammer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentKind {
    /// Never answers.
    Silent,
    /// Answers every message with the same text.
    AutoResponder {
        #[serde(default = "default_autoresponder_body")]
        fixed_body: String,
        #[serde(default = "default_auto_latency")]
        reply_latency_secs: i64,
    },
    /// Answers with probability `reply_prob`; after each round gives up with
    /// probability `dropout_prob`.
    Persistent {
        reply_prob: f64,
        dropout_prob: f64,
        #[serde(default = "default_latency_min")]
        latency_min_secs: i64,
        #[serde(default = "default_latency_max")]
        latency_max_secs: i64,
        #[serde(default = "default_persistent_bodies")]
        bodies: Vec<String>,
    },
}

fn default_auto_latency() -> i64 {
    4 * 3_600
}

fn default_latency_min() -> i64 {
    3_600
}

fn default_latency_max() -> i64 {
    36 * 3_600
}

impl AgentKind {
    pub fn persistent(reply_prob: f64, dropout_prob: f64) -> Self {
        AgentKind::Persistent {
            reply_prob,
            dropout_prob,
            latency_min_secs: default_latency_min(),
            latency_max_secs: default_latency_max(),
            bodies: default_persistent_bodies(),
        }
    }

    pub fn autoresponder() -> Self {
        AgentKind::AutoResponder {
            fixed_body: default_autoresponder_body(),
            reply_latency_secs: default_auto_latency(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAgentSpec {
    pub kind: AgentKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplyEvent {
    pub body: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct SimAgent {
    pub spec: SimAgentSpec,
    rng: ChaCha8Rng,
    dropped: bool,
    round: u32,
}

impl SimAgent {
    pub fn new(spec: SimAgentSpec) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(spec.seed);
        SimAgent {
            spec,
            rng,
            dropped: false,
            round: 0,
        }
    }

    pub fn dropped_out(&self) -> bool {
        self.dropped
    }

    /// Reaction to one delivered message.
    pub fn step(&mut self, _stimulus: &str, now: DateTime<Utc>) -> Option<ReplyEvent> {
        if self.dropped {
            return None;
        }
        match &self.spec.kind {
            AgentKind::Silent => None,
            AgentKind::AutoResponder {
                fixed_body,
                reply_latency_secs,
            } => Some(ReplyEvent {
                body: fixed_body.clone(),
                at: now + Duration::seconds(*reply_latency_secs),
            }),
            AgentKind::Persistent {
                reply_prob,
                dropout_prob,
                latency_min_secs,
                latency_max_secs,
                bodies,
            } => {
                let replies = self.rng.random_bool(reply_prob.clamp(0.0, 1.0));
                let reply = if replies && !bodies.is_empty() {
                    self.round += 1;
                    let lo = (*latency_min_secs).max(0);
                    let hi = (*latency_max_secs).max(lo);
                    let latency = self.rng.random_range(lo..=hi);
                    let body = bodies[self.rng.random_range(0..bodies.len())]
                        .replace(ROUND_PLACEHOLDER, &self.round.to_string());
                    Some(ReplyEvent {
                        body,
                        at: now + Duration::seconds(latency),
                    })
                } else {
                    None
                };
                if self.rng.random_bool(dropout_prob.clamp(0.0, 1.0)) {
                    self.dropped = true;
                }
                reply
            }
        }
    }
}
