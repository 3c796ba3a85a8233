use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use crate::gateway::{MailProvider, ProviderError, ProviderResponse, SendRequest};
use crate::responders::{BridgeError, GeneratorRequest, GeneratorResponse, TextGenerator};

/// When a target's mailbox starts rejecting mail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", content = "after", rename_all = "snake_case")]
pub enum BounceMode {
    #[default]
    Never,
    FirstSend,
    /// Accepts this many messages, then bounces.
    AfterSends(u32),
}

pub type Outbox = Arc<Mutex<Vec<SendRequest>>>;

/// In-process provider. Accepted mail lands in a shared outbox that the
/// simulator drains after every poll.
#[derive(Debug)]
pub struct LoopbackProvider {
    outbox: Outbox,
    bounces: BTreeMap<String, BounceMode>,
    accepted: BTreeMap<String, u32>,
    transient_rate: f64,
    rng: ChaCha8Rng,
    counter: u64,
}

impl LoopbackProvider {
    pub fn new(seed: u64, transient_rate: f64) -> Self {
        LoopbackProvider {
            outbox: Arc::default(),
            bounces: BTreeMap::new(),
            accepted: BTreeMap::new(),
            transient_rate: transient_rate.clamp(0.0, 1.0),
            rng: ChaCha8Rng::seed_from_u64(seed),
            counter: 0,
        }
    }

    pub fn outbox(&self) -> Outbox {
        Arc::clone(&self.outbox)
    }

    pub fn script_bounce(&mut self, address: &str, mode: BounceMode) {
        self.bounces.insert(address.to_lowercase(), mode);
    }
}

impl MailProvider for LoopbackProvider {
    fn send(&mut self, request: &SendRequest) -> Result<ProviderResponse, ProviderError> {
        if self.transient_rate > 0.0 && self.rng.random_bool(self.transient_rate) {
            return Err(ProviderError::Transient("loopback: simulated relay hiccup".into()));
        }
        let to = request.to.to_lowercase();
        let sent = self.accepted.get(&to).copied().unwrap_or(0);
        let bounce = match self.bounces.get(&to).copied().unwrap_or_default() {
            BounceMode::Never => false,
            BounceMode::FirstSend => true,
            BounceMode::AfterSends(n) => sent >= n,
        };
        if bounce {
            return Ok(ProviderResponse::bounced("550 mailbox unavailable"));
        }
        self.accepted.insert(to, sent + 1);
        self.counter += 1;
        self.outbox.lock().expect("outbox poisoned").push(request.clone());
        Ok(ProviderResponse::accepted(format!("loop-{}", self.counter)))
    }

    fn is_simulated(&self) -> bool {
        true
    }
}

const OPENERS: &[&str] = &[
    "Okay, I think I follow.",
    "That sounds good to me.",
    "Thanks for explaining.",
    "I talked to my brother about this.",
    "Sorry for the slow answer, work was busy.",
    "Alright, I am interested.",
];

const QUESTIONS: &[&str] = &[
    "How do I send the money to you?",
    "Which bank should I use for this?",
    "What do you need from me next?",
    "Can you tell me more about your company?",
    "Is there a form I have to fill in?",
    "How long will the whole thing take?",
    "Do you have a phone number I can call?",
];

/// Deterministic stand-in for an external text generator. The strategy id
/// selects a different phrase rotation, so strategies produce distinct text.
#[derive(Debug, Clone)]
pub struct SimGenerator {
    strategy: String,
}

impl SimGenerator {
    pub fn new(strategy: impl Into<String>) -> Self {
        SimGenerator {
            strategy: strategy.into(),
        }
    }
}

impl TextGenerator for SimGenerator {
    fn generate(&self, request: &GeneratorRequest) -> Result<GeneratorResponse, BridgeError> {
        let mut h = Sha256::new();
        h.update(self.strategy.as_bytes());
        h.update([0]);
        h.update(request.prompt.as_bytes());
        let d = h.finalize();
        let a = d[0] as usize % OPENERS.len();
        let b = d[1] as usize % QUESTIONS.len();
        let text = if d[2] % 2 == 0 {
            format!("{} {}", OPENERS[a], QUESTIONS[b])
        } else {
            format!("{}\n{}", QUESTIONS[b], OPENERS[a])
        };
        Ok(GeneratorResponse { text })
    }
}
