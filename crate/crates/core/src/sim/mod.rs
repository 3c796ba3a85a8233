//! Simulated scammer population driving real orchestrator instances on a
//! virtual clock.

mod agent;
mod config;
mod loopback;
mod run;

pub use agent::{
    default_autoresponder_body, default_persistent_bodies, AgentKind, ReplyEvent, SimAgent, SimAgentSpec,
    ROUND_PLACEHOLDER,
};
pub use config::{default_mix, default_strategies, MixEntry, PopulationGroup, SimConfig};
pub use loopback::{BounceMode, LoopbackProvider, Outbox, SimGenerator};
pub use run::{plan_population, run_experiment, write_run, InstanceOutput, SimRun, TargetPlan};

use thiserror::Error;

use crate::archive::{ArchiveIoError, MetricsError};
use crate::orchestrator::{Event, OrchestratorError, Violation};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("instance {instance}: policy violation: {violation}")]
    Violation {
        instance: usize,
        violation: Violation,
        /// Every event the instance emitted up to and including the offending one.
        trace: Vec<Event>,
    },
    #[error("instance {instance}: {source}")]
    Orchestrator {
        instance: usize,
        source: OrchestratorError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Archive(#[from] ArchiveIoError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}
