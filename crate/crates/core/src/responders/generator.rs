use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

use super::classifier::BridgeError;
use super::history::{serialize_prompt, truncate_newest_first, Role, Turn};
use super::ResponderError;

pub const DEFAULT_MAX_PROMPT_CHARS: usize = 4_000;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorRequest {
    pub strategy_id: String,
    pub fake_name: String,
    pub history: Vec<Turn>,
    pub max_length: usize,
    /// `history` rendered in block format with the open baiter marker.
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorResponse {
    pub text: String,
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, request: &GeneratorRequest) -> Result<GeneratorResponse, BridgeError>;
}

/// `POST {endpoint}/generate`.
pub struct HttpGenerator {
    client: Client,
    endpoint: String,
}

impl HttpGenerator {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        HttpGenerator {
            client: Client::builder()
                .timeout(timeout)
                .build()
                .expect("http client configuration is static"),
            endpoint: endpoint.into().trim_end_matches('/').to_owned(),
        }
    }
}

impl TextGenerator for HttpGenerator {
    fn generate(&self, request: &GeneratorRequest) -> Result<GeneratorResponse, BridgeError> {
        let resp = self
            .client
            .post(format!("{}/generate", self.endpoint))
            .json(request)
            .send()
            .map_err(|e| BridgeError::Unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(BridgeError::Unavailable(format!("status {}", resp.status())));
        }
        resp.json().map_err(|e| BridgeError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptScope {
    #[default]
    FullHistory,
    LastMessage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSettings {
    pub max_prompt_chars: usize,
    pub max_length: usize,
    pub prompt_scope: PromptScope,
    pub attempts: u32,
}

impl Default for GeneratorSettings {
    fn default() -> Self {
        GeneratorSettings {
            max_prompt_chars: DEFAULT_MAX_PROMPT_CHARS,
            max_length: 200,
            prompt_scope: PromptScope::FullHistory,
            attempts: DEFAULT_ATTEMPTS,
        }
    }
}

pub fn build_request(
    strategy_id: &str,
    fake_name: &str,
    history: &[Turn],
    settings: &GeneratorSettings,
) -> GeneratorRequest {
    let scoped: Vec<Turn> = match settings.prompt_scope {
        PromptScope::FullHistory => history.to_vec(),
        PromptScope::LastMessage => history
            .iter()
            .rev()
            .find(|t| t.role == Role::Scammer)
            .cloned()
            .into_iter()
            .collect(),
    };
    let history = truncate_newest_first(&scoped, settings.max_prompt_chars);
    GeneratorRequest {
        strategy_id: strategy_id.to_owned(),
        fake_name: fake_name.to_owned(),
        prompt: serialize_prompt(&history),
        history,
        max_length: settings.max_length,
    }
}

/// Asks the generator for a reply, retrying transport failures. Returns the
/// trimmed text, `GenerationEmpty` for blank output, or `Defer` once every
/// attempt has failed.
pub fn compose_generated_reply(
    strategy_id: &str,
    fake_name: &str,
    history: &[Turn],
    generator: &dyn TextGenerator,
    settings: &GeneratorSettings,
) -> Result<String, ResponderError> {
    let request = build_request(strategy_id, fake_name, history, settings);
    let mut last_error = String::new();
    for attempt in 1..=settings.attempts.max(1) {
        match generator.generate(&request) {
            Ok(resp) => {
                let text = resp.text.trim();
                if text.is_empty() {
                    return Err(ResponderError::GenerationEmpty);
                }
                return Ok(text.to_owned());
            }
            Err(e) => {
                log::warn!("generator {strategy_id} attempt {attempt} failed: {e}");
                last_error = e.to_string();
            }
        }
    }
    Err(ResponderError::Defer(last_error))
}
