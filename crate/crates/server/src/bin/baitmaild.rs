use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use baitmail_core::clock::{Clock, SystemClock};
use baitmail_core::config::ServiceConfig;
use baitmail_core::ingestion::{DirectorySource, SourceRegistry};
use baitmail_core::orchestrator::Orchestrator;
use baitmail_server::{router, AppState, Instance, LoopSettings};
use chrono::Duration;
use clap::Parser;

/// Runs one or two baitmail instances behind the operator API.
#[derive(Debug, Parser)]
#[command(name = "baitmaild", version)]
struct Args {
    /// Instance config file. Pass twice for a concurrent two-instance run.
    #[arg(short, long = "config", required = true)]
    configs: Vec<PathBuf>,
    #[arg(short, long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Directory of crawled report files shared by all instances.
    #[arg(long)]
    reports: Option<PathBuf>,
    /// Bearer token required on /api routes.
    #[arg(long, env = "BAITMAIL_API_TOKEN")]
    token: Option<String>,
}

fn start_instance(path: &Path, index: usize, reports: Option<&PathBuf>, clock: Arc<dyn Clock>) -> Result<Instance> {
    let cfg = ServiceConfig::load(path)?;
    let responders = cfg.build_responders()?;
    let provider = cfg.build_provider()?;
    let orch_cfg = cfg.orchestrator_config();
    let name = format!("instance-{}", (b'a' + index as u8) as char);
    let (orch, sources) = match &cfg.instance.data_dir {
        Some(dir) => {
            let orch = Orchestrator::open(orch_cfg, responders, provider, dir)
                .with_context(|| format!("opening {}", dir.display()))?;
            (orch, SourceRegistry::with_state_file(dir.join("sources.json"))?)
        }
        None => (Orchestrator::new(orch_cfg, responders, provider)?, SourceRegistry::new()),
    };
    let mut sources = sources;
    if let Some(dir) = reports {
        sources.register(Box::new(DirectorySource::new("reports", dir)));
    }
    let settings = LoopSettings {
        poll_interval: Duration::seconds(cfg.poll_interval_secs as i64),
        ..LoopSettings::default()
    };
    log::info!("{name}: domain {} from {}", cfg.instance.domain, path.display());
    Ok(Instance::spawn(name, orch, sources, clock, settings))
}

#[tokio::main]
async fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    if args.configs.len() > 2 {
        bail!("at most two instances are supported");
    }
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let instances = args
        .configs
        .iter()
        .enumerate()
        .map(|(i, p)| start_instance(p, i, args.reports.as_ref(), Arc::clone(&clock)))
        .collect::<Result<Vec<_>>>()?;
    let mut state = AppState::new(instances, clock);
    state.token = args.token;
    let listener = tokio::net::TcpListener::bind(args.listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
