use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use baitmail_core::sim::{run_experiment, write_run, SimConfig, SimError};
use clap::{Parser, Subcommand};

/// Runs simulated experiments against a synthetic scammer population.
#[derive(Debug, Parser)]
#[command(name = "baitsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write archives plus metrics.json.
    Run {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, output } => {
            let cfg = SimConfig::load(&config)?;
            let started = Instant::now();
            let result = match run_experiment(&cfg) {
                Err(SimError::Violation { instance, violation, trace }) => {
                    eprintln!("policy violation on {instance}: {violation}");
                    for e in trace.iter().rev().take(10).rev() {
                        eprintln!("  {}", serde_json::to_string(e)?);
                    }
                    anyhow::bail!("run aborted after {} events", trace.len());
                }
                other => other?,
            };
            write_run(&result, &output)?;
            eprintln!(
                "{} targets, {} events in {:.1}s",
                cfg.n_targets,
                result.total_events(),
                started.elapsed().as_secs_f64()
            );
            for inst in &result.instances {
                eprintln!(
                    "{}: engaged {}/{} ({}), {} outbound",
                    inst.name,
                    inst.overall.engaged_targets,
                    inst.overall.attempted_targets,
                    inst.overall.response_rate_display,
                    inst.outbound_sent
                );
            }
            eprintln!("wrote {}", output.display());
        }
        Command::DefaultConfig => print!("{}", toml::to_string(&SimConfig::default())?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("baitsim: {e:#}");
            ExitCode::FAILURE
        }
    }
}
