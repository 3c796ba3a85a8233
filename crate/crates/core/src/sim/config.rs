use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{AgentKind, BounceMode, SimError};
use crate::orchestrator::{SendWindow, DEFAULT_POLL_INTERVAL_SECS};

/// A weighted agent kind for randomly drawn targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixEntry {
    pub weight: f64,
    pub agent: AgentKind,
}

/// An exact number of targets wired to fixed behaviour. `agent_b` overrides
/// the agent seen by the second instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationGroup {
    pub count: usize,
    pub agent: AgentKind,
    #[serde(default)]
    pub agent_b: Option<AgentKind>,
    #[serde(default)]
    pub bounce: BounceMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Total population. Groups come first; the remainder is drawn from `mix`.
    #[serde(default = "default_n_targets")]
    pub n_targets: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_start")]
    pub start: DateTime<Utc>,
    #[serde(default = "default_duration_days")]
    pub duration_days: u32,
    /// Reports arrive uniformly over this many hours after `start`.
    #[serde(default = "default_arrival_hours")]
    pub arrival_hours: u32,
    #[serde(default = "default_poll")]
    pub poll_interval_secs: u64,
    #[serde(default = "default_instances")]
    pub instances: u8,
    /// One per instance. Empty means "always" for one instance and a
    /// 0-12 / 12-24 split for two.
    #[serde(default)]
    pub windows: Vec<SendWindow>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    #[serde(default = "default_mix")]
    pub mix: Vec<MixEntry>,
    #[serde(default)]
    pub groups: Vec<PopulationGroup>,
    #[serde(default)]
    pub bounce_rate: f64,
    #[serde(default)]
    pub late_bounce_rate: f64,
    #[serde(default)]
    pub transient_rate: f64,
    #[serde(default)]
    pub reject_rate: f64,
    #[serde(default)]
    pub operator_stop_rate: f64,
    #[serde(default)]
    pub stray_rate: f64,
}

fn default_n_targets() -> usize {
    100
}

fn default_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2022, 7, 12, 0, 0, 0).unwrap()
}

fn default_duration_days() -> u32 {
    30
}

fn default_arrival_hours() -> u32 {
    24
}

fn default_poll() -> u64 {
    DEFAULT_POLL_INTERVAL_SECS
}

fn default_instances() -> u8 {
    1
}

pub fn default_strategies() -> Vec<String> {
    ["classifier-template", "generator-a", "generator-b"]
        .into_iter()
        .map(str::to_owned)
        .collect()
}

pub fn default_mix() -> Vec<MixEntry> {
    vec![
        MixEntry { weight: 0.80, agent: AgentKind::Silent },
        MixEntry { weight: 0.05, agent: AgentKind::autoresponder() },
        MixEntry { weight: 0.15, agent: AgentKind::persistent(0.7, 0.15) },
    ]
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_targets: default_n_targets(),
            master_seed: 0,
            start: default_start(),
            duration_days: default_duration_days(),
            arrival_hours: default_arrival_hours(),
            poll_interval_secs: default_poll(),
            instances: default_instances(),
            windows: Vec::new(),
            strategies: default_strategies(),
            mix: default_mix(),
            groups: Vec::new(),
            bounce_rate: 0.0,
            late_bounce_rate: 0.0,
            transient_rate: 0.0,
            reject_rate: 0.0,
            operator_stop_rate: 0.0,
            stray_rate: 0.0,
        }
    }
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.start + chrono::Duration::days(i64::from(self.duration_days))
    }

    pub fn group_total(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn population(&self) -> usize {
        self.n_targets.max(self.group_total())
    }

    pub fn send_windows(&self) -> Vec<SendWindow> {
        if !self.windows.is_empty() {
            return self.windows.clone();
        }
        match self.instances {
            2 => vec![SendWindow::hours(0, 12), SendWindow::hours(12, 24)],
            _ => vec![SendWindow::always()],
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(1..=2).contains(&self.instances) {
            return bad(format!("instances must be 1 or 2, got {}", self.instances));
        }
        if !self.windows.is_empty() && self.windows.len() != usize::from(self.instances) {
            return bad(format!("{} windows for {} instances", self.windows.len(), self.instances));
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is required".into());
        }
        if self.poll_interval_secs == 0 {
            return bad("poll_interval_secs must be positive".into());
        }
        if self.n_targets > self.group_total() && self.mix.iter().map(|m| m.weight).sum::<f64>() <= 0.0 {
            return bad("mix weights must sum to a positive value".into());
        }
        let rates = [
            ("bounce_rate", self.bounce_rate),
            ("late_bounce_rate", self.late_bounce_rate),
            ("transient_rate", self.transient_rate),
            ("reject_rate", self.reject_rate),
            ("operator_stop_rate", self.operator_stop_rate),
            ("stray_rate", self.stray_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} must lie in [0, 1], got {r}"));
            }
        }
        let agents = self
            .mix
            .iter()
            .map(|m| &m.agent)
            .chain(self.groups.iter().flat_map(|g| std::iter::once(&g.agent).chain(g.agent_b.as_ref())));
        for agent in agents {
            if let AgentKind::Persistent { reply_prob, dropout_prob, latency_min_secs, latency_max_secs, .. } = agent {
                if !(0.0..=1.0).contains(reply_prob) || !(0.0..=1.0).contains(dropout_prob) {
                    return bad("persistent probabilities must lie in [0, 1]".into());
                }
                if latency_min_secs > latency_max_secs || *latency_min_secs < 0 {
                    return bad("persistent latency range is empty".into());
                }
            }
        }
        Ok(())
    }
}
