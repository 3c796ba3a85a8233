use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use baitmail_cli::{write_output, EXIT_SKIPPED};
use baitmail_core::archive::read_archive_dir;
use baitmail_core::corpus::{
    coarsen_tsv, corpus_stats, enron_pairs, extract_bait_pairs, read_maildir, thread_conversations, write_pairs,
    FineLabel, LabelMap, RoleTagged,
};
use baitmail_core::responders::ScamCategory;
use clap::{Parser, Subcommand};

/// Builds training corpora from mail archives and baiting transcripts.
#[derive(Debug, Parser)]
#[command(name = "corpusprep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Thread a maildir into reply chains and emit prompt/reply pairs.
    Thread {
        maildir: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Emit scammer/baiter pairs from a transcript directory.
    Baitpairs {
        transcripts: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print conversation, message and pair counts as JSON.
    Stats { transcripts: PathBuf },
    /// Map a `message_id<TAB>fine_label` file onto the five coarse categories.
    Coarsen {
        labels: PathBuf,
        /// TOML table overriding the default fine-to-coarse map.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn load_map(path: &Path) -> Result<LabelMap> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let map: BTreeMap<FineLabel, ScamCategory> = toml::from_str(&text).context("label map")?;
    Ok(LabelMap::new(map)?)
}

/// Returns the number of skipped inputs.
fn run(cli: Cli) -> Result<usize> {
    match cli.command {
        Command::Thread { maildir, output } => {
            let mailbox = read_maildir(&maildir).with_context(|| format!("reading {}", maildir.display()))?;
            let chains = thread_conversations(&mailbox.messages);
            let pairs = enron_pairs(&chains);
            write_output(output.as_deref(), &write_pairs(&pairs))?;
            for (path, why) in &mailbox.skipped {
                eprintln!("skipped {}: {why}", path.display());
            }
            eprintln!(
                "{} messages, {} chains, {} pairs, {} skipped",
                mailbox.messages.len(),
                chains.len(),
                pairs.len(),
                mailbox.skipped.len()
            );
            Ok(mailbox.skipped.len())
        }
        Command::Baitpairs { transcripts, output } => {
            let loaded = read_archive_dir(&transcripts)?;
            let tagged: Vec<RoleTagged> = loaded.archive.conversations.iter().map(RoleTagged::from_archived).collect();
            let pairs = extract_bait_pairs(&tagged);
            write_output(output.as_deref(), &write_pairs(&pairs))?;
            for s in &loaded.skipped {
                eprintln!("skipped {}: {}", s.path.display(), s.reason);
            }
            eprintln!(
                "{} conversations, {} pairs, {} skipped",
                tagged.len(),
                pairs.len(),
                loaded.skipped.len()
            );
            Ok(loaded.skipped.len())
        }
        Command::Stats { transcripts } => {
            let loaded = read_archive_dir(&transcripts)?;
            for s in &loaded.skipped {
                eprintln!("skipped {}: {}", s.path.display(), s.reason);
            }
            let stats = corpus_stats(&loaded.archive, loaded.skipped.len());
            println!("{}", serde_json::to_string_pretty(&stats)?);
            Ok(stats.skipped)
        }
        Command::Coarsen { labels, map, output } => {
            let map = match map {
                Some(p) => load_map(&p)?,
                None => LabelMap::default(),
            };
            let text = fs::read_to_string(&labels).with_context(|| format!("reading {}", labels.display()))?;
            let result = coarsen_tsv(&text, &map);
            let tsv: String = result.rows.iter().map(|(id, c)| format!("{id}\t{c}\n")).collect();
            write_output(output.as_deref(), &tsv)?;
            for (line, why) in &result.skipped {
                eprintln!("skipped line {line}: {why}");
            }
            Ok(result.skipped.len())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(EXIT_SKIPPED as u8),
        Err(e) => {
            eprintln!("corpusprep: {e:#}");
            ExitCode::FAILURE
        }
    }
}
