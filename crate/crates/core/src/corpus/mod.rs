//! Training data preparation: mailbox threading, prompt/reply pairs, label
//! coarsening and corpus statistics.

mod bait;
mod enron;
mod labels;

pub use bait::{extract_bait_pairs, RoleTagged};
pub use enron::{
    enron_pairs, normalize_subject, parse_mail, read_maildir, strip_quoted, thread_conversations,
    Chain, MailMessage, Mailbox,
};
pub use labels::{
    coarsen_labels, coarsen_tsv, CoarsenedLabels, FineLabel, LabelMap, LabelMapError, UnknownLabel,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::Archive;
use crate::responders::history::{parse_blocks, serialize_turns, HistoryError};
use crate::responders::{Role, Turn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSource {
    Enron,
    ScamBaiting,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptReplyPair {
    pub prompt: String,
    pub reply: String,
    pub source: PairSource,
    pub conversation_id: String,
}

/// Pairs in the generator block format, one scammer/baiter block pair each.
pub fn write_pairs(pairs: &[PromptReplyPair]) -> String {
    pairs
        .iter()
        .map(|p| serialize_turns(&[Turn::scammer(p.prompt.clone()), Turn::baiter(p.reply.clone())]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PairFileError {
    #[error(transparent)]
    Blocks(#[from] HistoryError),
    #[error("block {0} breaks the scammer/baiter alternation")]
    Alternation(usize),
}

/// Inverse of [`write_pairs`]: `(prompt, reply)` tuples.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, PairFileError> {
    let parsed = parse_blocks(text)?;
    if parsed.open.is_some() || parsed.turns.len() % 2 != 0 {
        return Err(PairFileError::Alternation(parsed.turns.len() + 1));
    }
    parsed
        .turns
        .chunks(2)
        .enumerate()
        .map(|(i, c)| {
            if c[0].role != Role::Scammer || c[1].role != Role::Baiter {
                return Err(PairFileError::Alternation(2 * i + 1));
            }
            Ok((c[0].text.clone(), c[1].text.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub conversations: usize,
    pub messages: usize,
    pub pairs: usize,
    pub skipped: usize,
}

/// Counts over a transcript archive; `skipped` comes from the loader.
pub fn corpus_stats(archive: &Archive, skipped: usize) -> CorpusStats {
    let tagged: Vec<RoleTagged> = archive.conversations.iter().map(RoleTagged::from_archived).collect();
    CorpusStats {
        conversations: archive.conversations.len(),
        messages: archive.conversations.iter().map(|c| c.messages.len()).sum(),
        pairs: extract_bait_pairs(&tagged).len(),
        skipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_file_round_trip() {
        let pairs = vec![
            PromptReplyPair {
                prompt: "Hello my friend\n\nI have gold".into(),
                reply: "Tell me more".into(),
                source: PairSource::ScamBaiting,
                conversation_id: "c1".into(),
            },
            PromptReplyPair {
                prompt: "Send fee".into(),
                reply: "How much?".into(),
                source: PairSource::Enron,
                conversation_id: "c2".into(),
            },
        ];
        let text = write_pairs(&pairs);
        assert!(text.starts_with("<|scammer|>\nHello my friend\n\nI have gold\n<|baiter|>\nTell me more\n"));
        let back = parse_pairs(&text).unwrap();
        assert_eq!(back, vec![
            ("Hello my friend\n\nI have gold".to_owned(), "Tell me more".to_owned()),
            ("Send fee".to_owned(), "How much?".to_owned()),
        ]);
        assert!(parse_pairs("<|baiter|>\nx\n<|scammer|>\ny\n").is_err());
    }

    #[test]
    fn empty_stats() {
        assert_eq!(corpus_stats(&Archive::default(), 0), CorpusStats::default());
    }
}
