//! Service configuration file (TOML).
//!
//! ```toml
//! poll_interval_secs = 60
//! send_window = "9-17"          # UTC hours; "always" by default
//!
//! [instance]
//! domain = "bait.example.org"
//! master_seed = 7
//!
//! [[responders]]
//! id = "classifier-template"
//! kind = "classifier_template"
//!
//! [[responders]]
//! id = "generator-a"
//! kind = "generator_bridge"
//! endpoint = "http://127.0.0.1:9001"
//!
//! [provider]
//! kind = "http"
//! base_url = "https://relay.example.net/v1"
//! api_key_env = "PROVIDER_API_KEY"
//!
//! [simulation]
//! auto_approve = false
//! ```

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

use crate::gateway::{HttpProvider, MailProvider, ScriptedProvider};
use crate::orchestrator::{OrchestratorConfig, RegisteredResponder, SendWindow, DEFAULT_DEBRIEF, DEFAULT_POLL_INTERVAL_SECS};
use crate::responders::{
    BaselineModel, ClassifierModel, ClassifierTemplateResponder, GeneratorResponder, GeneratorSettings,
    HttpClassifier, HttpGenerator, PromptScope, ResponderKind, TemplatePool, DEFAULT_MAX_PROMPT_CHARS,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("responder `{0}`: {1}")]
    Responder(String, String),
    #[error("provider: {0}")]
    Provider(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    pub domain: String,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    #[serde(default)]
    pub debrief_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponderSection {
    pub id: String,
    pub kind: ResponderKind,
    /// Generator bridge URL, or classifier bridge URL for template responders.
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub no_immediate_repeat: bool,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
    #[serde(default)]
    pub prompt_scope: PromptScope,
    #[serde(default)]
    pub max_prompt_chars: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Http,
    /// In-process loopback that accepts everything.
    #[default]
    Loopback,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSection {
    #[serde(default)]
    pub kind: ProviderKind,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default)]
    pub auto_approve: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_poll")]
    pub poll_interval_secs: u64,
    #[serde(default)]
    pub send_window: SendWindow,
    pub instance: InstanceSection,
    #[serde(default)]
    pub responders: Vec<ResponderSection>,
    #[serde(default)]
    pub provider: ProviderSection,
    #[serde(default)]
    pub simulation: SimulationSection,
}

fn default_poll() -> u64 {
    DEFAULT_POLL_INTERVAL_SECS
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn orchestrator_config(&self) -> OrchestratorConfig {
        let mut c = OrchestratorConfig::new(self.instance.domain.clone());
        c.poll_interval_secs = self.poll_interval_secs;
        c.send_window = self.send_window.clone();
        c.master_seed = self.instance.master_seed;
        c.auto_approve = self.simulation.auto_approve;
        c.debrief_text = self
            .instance
            .debrief_text
            .clone()
            .unwrap_or_else(|| DEFAULT_DEBRIEF.to_owned());
        c
    }

    pub fn build_responders(&self) -> Result<Vec<RegisteredResponder>, ConfigError> {
        let mut out = Vec::new();
        for r in &self.responders {
            let err = |m: String| ConfigError::Responder(r.id.clone(), m);
            let timeout = Duration::from_secs(r.timeout_secs.unwrap_or(30));
            let responder: Box<dyn crate::responders::Responder> = match r.kind {
                ResponderKind::ClassifierTemplate => {
                    let pool = match &r.templates {
                        Some(p) => {
                            let text = fs::read_to_string(p).map_err(|e| err(format!("{}: {e}", p.display())))?;
                            TemplatePool::parse(&text).map_err(|e| err(e.to_string()))?
                        }
                        None => TemplatePool::bundled(),
                    };
                    let model = match &r.endpoint {
                        Some(url) => ClassifierModel::ExternalBridge {
                            client: Box::new(HttpClassifier::new(url.clone(), timeout)),
                            fallback: BaselineModel::bundled(),
                        },
                        None => ClassifierModel::BaselineLexical(BaselineModel::bundled()),
                    };
                    Box::new(ClassifierTemplateResponder {
                        model,
                        pool,
                        no_immediate_repeat: r.no_immediate_repeat,
                    })
                }
                ResponderKind::GeneratorBridge => {
                    let url = r.endpoint.clone().ok_or_else(|| err("generator needs an endpoint".into()))?;
                    Box::new(GeneratorResponder {
                        generator: Box::new(HttpGenerator::new(url, timeout)),
                        settings: GeneratorSettings {
                            prompt_scope: r.prompt_scope,
                            max_prompt_chars: r.max_prompt_chars.unwrap_or(DEFAULT_MAX_PROMPT_CHARS),
                            ..GeneratorSettings::default()
                        },
                    })
                }
            };
            out.push(RegisteredResponder::new(r.id.clone(), responder, r.endpoint.clone()));
        }
        Ok(out)
    }

    pub fn build_provider(&self) -> Result<Box<dyn MailProvider>, ConfigError> {
        let p = &self.provider;
        match p.kind {
            ProviderKind::Loopback => Ok(Box::new(ScriptedProvider::default())),
            ProviderKind::Http => {
                let base = p
                    .base_url
                    .clone()
                    .ok_or_else(|| ConfigError::Provider("http provider needs base_url".into()))?;
                let var = p.api_key_env.clone().unwrap_or_else(|| "PROVIDER_API_KEY".into());
                let key = std::env::var(&var)
                    .map_err(|_| ConfigError::Provider(format!("environment variable {var} is not set")))?;
                Ok(Box::new(HttpProvider::new(
                    base,
                    key,
                    Duration::from_secs(p.timeout_secs.unwrap_or(30)),
                )))
            }
        }
    }
}
