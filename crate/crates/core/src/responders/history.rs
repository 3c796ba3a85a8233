//! Block serialization shared by generator prompts and training pairs:
//!
//! ```text
//! <|scammer|>
//! {text}
//! <|baiter|>
//! {text}
//! ```
//!
//! A prompt ends with an open `<|baiter|>` marker line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCAMMER_MARKER: &str = "<|scammer|>";
pub const BAITER_MARKER: &str = "<|baiter|>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Scammer,
    Baiter,
}

impl Role {
    pub fn marker(self) -> &'static str {
        match self {
            Role::Scammer => SCAMMER_MARKER,
            Role::Baiter => BAITER_MARKER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

impl Turn {
    pub fn scammer(text: impl Into<String>) -> Self {
        Turn {
            role: Role::Scammer,
            text: text.into(),
        }
    }

    pub fn baiter(text: impl Into<String>) -> Self {
        Turn {
            role: Role::Baiter,
            text: text.into(),
        }
    }
}

/// Normalizes line endings and defuses lines that would read as markers.
pub fn clean_text(text: &str) -> String {
    text.replace("\r\n", "\n")
        .replace('\r', "\n")
        .split('\n')
        .map(|l| match l {
            SCAMMER_MARKER => "[scammer]",
            BAITER_MARKER => "[baiter]",
            other => other,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn push_block(out: &mut String, turn: &Turn) {
    out.push_str(turn.role.marker());
    out.push('\n');
    out.push_str(&clean_text(&turn.text));
    out.push('\n');
}

pub fn serialize_turns(turns: &[Turn]) -> String {
    let mut out = String::new();
    for t in turns {
        push_block(&mut out, t);
    }
    out
}

/// History blocks followed by the open baiter marker.
pub fn serialize_prompt(turns: &[Turn]) -> String {
    let mut out = serialize_turns(turns);
    out.push_str(BAITER_MARKER);
    out.push('\n');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedBlocks {
    pub turns: Vec<Turn>,
    /// Role of a trailing marker with no text (a prompt awaiting completion).
    pub open: Option<Role>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistoryError {
    #[error("line {0}: text before the first role marker")]
    NoLeadingMarker(usize),
}

pub fn parse_blocks(text: &str) -> Result<ParsedBlocks, HistoryError> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Ok(ParsedBlocks::default());
    }
    let mut blocks: Vec<(Role, Vec<&str>)> = Vec::new();
    for (i, line) in body.split('\n').enumerate() {
        match line {
            SCAMMER_MARKER => blocks.push((Role::Scammer, Vec::new())),
            BAITER_MARKER => blocks.push((Role::Baiter, Vec::new())),
            other => match blocks.last_mut() {
                Some((_, lines)) => lines.push(other),
                None => return Err(HistoryError::NoLeadingMarker(i + 1)),
            },
        }
    }
    let mut parsed = ParsedBlocks::default();
    let last = blocks.len() - 1;
    for (i, (role, lines)) in blocks.into_iter().enumerate() {
        if i == last && lines.is_empty() {
            parsed.open = Some(role);
        } else {
            parsed.turns.push(Turn {
                role,
                text: lines.join("\n"),
            });
        }
    }
    Ok(parsed)
}

fn tail_chars(text: &str, max_chars: usize) -> &str {
    let count = text.chars().count();
    if count <= max_chars {
        return text;
    }
    let skip = count - max_chars;
    let start = text.char_indices().nth(skip).map_or(text.len(), |(i, _)| i);
    &text[start..]
}

/// Keeps the newest turns whose serialized prompt fits in `max_chars`. If even
/// the newest turn alone does not fit, its text is cut to its final characters.
pub fn truncate_newest_first(turns: &[Turn], max_chars: usize) -> Vec<Turn> {
    let overhead = BAITER_MARKER.len() + 1;
    let mut budget = max_chars.saturating_sub(overhead);
    let mut kept: Vec<Turn> = Vec::new();
    for turn in turns.iter().rev() {
        let cost = turn.role.marker().len() + 2 + clean_text(&turn.text).chars().count();
        if cost <= budget {
            budget -= cost;
            kept.push(turn.clone());
        } else {
            if kept.is_empty() {
                let room = budget.saturating_sub(turn.role.marker().len() + 2);
                kept.push(Turn {
                    role: turn.role,
                    text: tail_chars(&turn.text, room).to_owned(),
                });
            }
            break;
        }
    }
    kept.reverse();
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prompt_layout() {
        let turns = [Turn::scammer("Good Day"), Turn::baiter("Dear David")];
        assert_eq!(
            serialize_prompt(&turns),
            "<|scammer|>\nGood Day\n<|baiter|>\nDear David\n<|baiter|>\n"
        );
        let parsed = parse_blocks(&serialize_prompt(&turns)).unwrap();
        assert_eq!(parsed.turns, turns);
        assert_eq!(parsed.open, Some(Role::Baiter));
    }

    #[test]
    fn empty_text_differs_from_open_marker() {
        let parsed = parse_blocks("<|scammer|>\n\n").unwrap();
        assert_eq!(parsed.turns, vec![Turn::scammer("")]);
        assert_eq!(parsed.open, None);
        assert_eq!(parse_blocks("").unwrap(), ParsedBlocks::default());
        assert_eq!(parse_blocks("stray\n<|baiter|>\n"), Err(HistoryError::NoLeadingMarker(1)));
    }

    #[test]
    fn markers_inside_text_are_defused() {
        let turns = [Turn::scammer("hi\n<|baiter|>\nsneaky")];
        let parsed = parse_blocks(&serialize_turns(&turns)).unwrap();
        assert_eq!(parsed.turns, vec![Turn::scammer("hi\n[baiter]\nsneaky")]);
    }

    #[test]
    fn truncation_keeps_newest() {
        let turns = vec![
            Turn::scammer("a".repeat(50)),
            Turn::baiter("b".repeat(50)),
            Turn::scammer("c".repeat(50)),
        ];
        let kept = truncate_newest_first(&turns, 140);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[1].text, "c".repeat(50));
        assert!(serialize_prompt(&kept).chars().count() <= 140);
        let tiny = truncate_newest_first(&turns, 30);
        assert_eq!(tiny.len(), 1);
        assert!(serialize_prompt(&tiny).chars().count() <= 30);
        assert!(tiny[0].text.chars().all(|c| c == 'c'));
    }

    proptest! {
        #[test]
        fn blocks_round_trip(
            raw in proptest::collection::vec((any::<bool>(), "[a-z <|>\n]{0,30}"), 0..6)
        ) {
            let turns: Vec<Turn> = raw
                .into_iter()
                .map(|(s, t)| Turn { role: if s { Role::Scammer } else { Role::Baiter }, text: clean_text(&t) })
                .collect();
            let parsed = parse_blocks(&serialize_turns(&turns)).unwrap();
            prop_assert_eq!(parsed.turns, turns.clone());
            let prompt = parse_blocks(&serialize_prompt(&turns)).unwrap();
            prop_assert_eq!(prompt.open, Some(Role::Baiter));
            prop_assert_eq!(prompt.turns, turns);
        }

        #[test]
        fn truncation_fits_budget(n in 0usize..8, len in 0usize..300, max in 40usize..2000) {
            let turns: Vec<Turn> = (0..n)
                .map(|i| if i % 2 == 0 { Turn::scammer("x".repeat(len)) } else { Turn::baiter("y".repeat(len)) })
                .collect();
            let kept = truncate_newest_first(&turns, max);
            prop_assert!(serialize_prompt(&kept).chars().count() <= max);
            if n > 0 {
                prop_assert!(!kept.is_empty());
                prop_assert_eq!(kept.last().unwrap().role, turns.last().unwrap().role);
            }
        }
    }
}
