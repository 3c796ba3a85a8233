//! The per-instance event loop. One thread owns the [`Orchestrator`]; every
//! other party talks to it through queued commands.

use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::Duration as StdDuration;

use baitmail_core::clock::Clock;
use baitmail_core::ingestion::SourceRegistry;
use baitmail_core::orchestrator::Orchestrator;
use chrono::{DateTime, Duration, Utc};
use thiserror::Error;
use tokio::sync::oneshot;

type Command = Box<dyn FnOnce(&mut Orchestrator, DateTime<Utc>) + Send>;

#[derive(Debug, Error)]
#[error("instance `{0}` has shut down")]
pub struct EngineGone(pub String);

/// Event-loop settings.
#[derive(Debug, Clone)]
pub struct LoopSettings {
    /// Run poll ticks on a timer. Off when a test drives ticks by hand.
    pub autonomous: bool,
    pub poll_interval: Duration,
    /// Write a snapshot after this many commands or ticks.
    pub snapshot_every: u32,
}

impl Default for LoopSettings {
    fn default() -> Self {
        LoopSettings {
            autonomous: true,
            poll_interval: Duration::seconds(60),
            snapshot_every: 100,
        }
    }
}

/// Cheap, cloneable handle to a running instance.
#[derive(Clone)]
pub struct Instance {
    name: String,
    domain: String,
    tx: mpsc::Sender<Command>,
}

impl Instance {
    pub fn spawn(
        name: impl Into<String>,
        orchestrator: Orchestrator,
        sources: SourceRegistry,
        clock: Arc<dyn Clock>,
        settings: LoopSettings,
    ) -> Instance {
        let name = name.into();
        let domain = orchestrator.config().domain.clone();
        let (tx, rx) = mpsc::channel::<Command>();
        let thread_name = format!("instance-{name}");
        let log_name = name.clone();
        thread::Builder::new()
            .name(thread_name)
            .spawn(move || run_loop(&log_name, orchestrator, sources, clock, settings, rx))
            .expect("spawn instance thread");
        Instance { name, domain, tx }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    /// Runs `f` on the event loop and waits for its result.
    pub async fn call<R, F>(&self, f: F) -> Result<R, EngineGone>
    where
        R: Send + 'static,
        F: FnOnce(&mut Orchestrator, DateTime<Utc>) -> R + Send + 'static,
    {
        let (done, wait) = oneshot::channel();
        self.tx
            .send(Box::new(move |o, now| {
                let _ = done.send(f(o, now));
            }))
            .map_err(|_| EngineGone(self.name.clone()))?;
        wait.await.map_err(|_| EngineGone(self.name.clone()))
    }

    /// Queues `f` without waiting for it.
    pub fn enqueue<F>(&self, f: F) -> Result<(), EngineGone>
    where
        F: FnOnce(&mut Orchestrator, DateTime<Utc>) + Send + 'static,
    {
        self.tx.send(Box::new(f)).map_err(|_| EngineGone(self.name.clone()))
    }
}

fn poll_and_tick(name: &str, orch: &mut Orchestrator, sources: &mut SourceRegistry, now: DateTime<Utc>) {
    if !sources.is_empty() {
        let outcome = sources.poll_sources(now, |report| orch.ingest_report(report.clone()).map(|_| ()));
        if !outcome.reports.is_empty() {
            log::info!("{name}: ingested {} reports", outcome.reports.len());
        }
    }
    match orch.tick(now) {
        Ok(report) if report.delivered + report.undeliverable > 0 => log::info!("{name}: {report:?}"),
        Ok(_) => {}
        Err(e) => log::error!("{name}: tick failed: {e}"),
    }
}

fn run_loop(
    name: &str,
    mut orch: Orchestrator,
    mut sources: SourceRegistry,
    clock: Arc<dyn Clock>,
    settings: LoopSettings,
    rx: mpsc::Receiver<Command>,
) {
    let mut next_poll = clock.now();
    let mut since_snapshot = 0u32;
    loop {
        let now = clock.now();
        let received = if settings.autonomous {
            let due = orch.next_wakeup(now).map_or(next_poll, |w| w.min(next_poll));
            let wait = (due - now).to_std().unwrap_or(StdDuration::ZERO);
            rx.recv_timeout(wait)
        } else {
            rx.recv().map_err(|_| RecvTimeoutError::Disconnected)
        };
        match received {
            Ok(cmd) => cmd(&mut orch, clock.now()),
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
        since_snapshot += 1;
        let now = clock.now();
        if settings.autonomous && now >= next_poll.min(orch.next_wakeup(now).unwrap_or(next_poll)) {
            poll_and_tick(name, &mut orch, &mut sources, now);
            next_poll = now + settings.poll_interval;
        }
        if since_snapshot >= settings.snapshot_every {
            since_snapshot = 0;
            if let Err(e) = orch.write_snapshot() {
                log::error!("{name}: snapshot failed: {e}");
            }
        }
    }
    if let Err(e) = orch.write_snapshot() {
        log::error!("{name}: final snapshot failed: {e}");
    }
    log::info!("{name}: event loop stopped");
}
