use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use baitmail_cli::{metrics_table, parse_end};
use baitmail_core::archive::{
    compute_all_metrics, compute_metrics, cross_instance_report, read_archive_dir, Archive, CrossInstanceOptions,
    MetricsOptions,
};
use clap::{Parser, Subcommand};
use serde_json::json;

/// Experiment metrics over transcript archives.
#[derive(Debug, Parser)]
#[command(name = "baitmetrics", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-strategy engagement metrics for one archive.
    Compute {
        archive: PathBuf,
        #[arg(long)]
        strategy: Option<String>,
        /// Ignore messages after this time (RFC 3339 or `YYYY-MM-DD HH:MM:SS`).
        #[arg(long)]
        end: Option<String>,
        /// Count replies inside conversations flagged as autoresponders.
        #[arg(long)]
        include_invalid: bool,
        #[arg(long, default_value_t = 2)]
        rate_decimals: u32,
        /// Print a text table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Engagement overlap between two concurrent instances.
    Cross {
        a: PathBuf,
        b: PathBuf,
        /// Targets involved in the experiment; defaults to attempted minus bounced.
        #[arg(long)]
        total: Option<usize>,
        /// Defaults to the latest message in either archive.
        #[arg(long)]
        end: Option<String>,
        #[arg(long, default_value_t = 3)]
        still_interested_days: i64,
    },
}

fn load(dir: &Path) -> Result<Archive> {
    let loaded = read_archive_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    for s in &loaded.skipped {
        eprintln!("skipped {}: {}", s.path.display(), s.reason);
    }
    Ok(loaded.archive)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compute {
            archive,
            strategy,
            end,
            include_invalid,
            rate_decimals,
            table,
        } => {
            let archive = load(&archive)?;
            let opts = MetricsOptions {
                window_end: end.as_deref().map(parse_end).transpose()?,
                include_invalid_replies: include_invalid,
                rate_decimals,
            };
            if let Some(s) = strategy {
                let report = compute_metrics(&archive, Some(&s), &opts);
                if table {
                    print!("{}", metrics_table([(s.as_str(), &report)]));
                } else {
                    println!("{}", serde_json::to_string_pretty(&report)?);
                }
                return Ok(());
            }
            let overall = compute_metrics(&archive, None, &opts);
            let per = compute_all_metrics(&archive, &opts);
            if table {
                let rows = per.iter().map(|(k, v)| (k.as_str(), v)).chain([("(all)", &overall)]);
                print!("{}", metrics_table(rows));
            } else {
                let out = json!({"overall": overall, "strategies": per});
                println!("{}", serde_json::to_string_pretty(&out)?);
            }
        }
        Command::Cross {
            a,
            b,
            total,
            end,
            still_interested_days,
        } => {
            let a = load(&a)?;
            let b = load(&b)?;
            let end = match end {
                Some(raw) => parse_end(&raw)?,
                None => a
                    .conversations
                    .iter()
                    .chain(&b.conversations)
                    .flat_map(|c| c.messages.iter().map(|m| m.time))
                    .max()
                    .context("both archives are empty; pass --end")?,
            };
            let mut opts = CrossInstanceOptions::new(end);
            opts.total_involved = total;
            opts.still_interested_secs = still_interested_days * 86_400;
            let report = cross_instance_report(&a, &b, &opts)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("baitmetrics: {e:#}");
            ExitCode::FAILURE
        }
    }
}
