//! Plain-text transcript layout, one conversation per file:
//!
//! ```text
//! From: <addr>
//! To: <addr>
//! Time: YYYY-MM-DD HH:MM:SS
//! SUBJECT: <subject>
//! <body lines>
//!
//! From: ...
//! ```
//!
//! The crawled solicitation is recorded with `To: CRAWLER`. A record starts at
//! the top of the file or after a blank line, with a `From:`/`To:`/`Time:`
//! header run; a `From: ` line anywhere else is body text.

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CRAWLER: &str = "CRAWLER";
pub const TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// The crawled lure that started the conversation.
    Solicitation,
    /// Scammer to persona.
    Inbound,
    /// Persona to scammer.
    Outbound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptMessage {
    pub direction: Direction,
    pub from: String,
    pub to: String,
    pub time: DateTime<Utc>,
    pub subject: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranscriptError {
    #[error("conversation has no messages")]
    EmptyConversation,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub fn format_time(t: &DateTime<Utc>) -> String {
    t.format(TIME_FORMAT).to_string()
}

pub fn parse_time(raw: &str) -> Option<DateTime<Utc>> {
    NaiveDateTime::parse_from_str(raw, TIME_FORMAT)
        .ok()
        .map(|n| n.and_utc())
}

pub fn export_transcript(messages: &[TranscriptMessage]) -> Result<String, TranscriptError> {
    if messages.is_empty() {
        return Err(TranscriptError::EmptyConversation);
    }
    let records: Vec<String> = messages
        .iter()
        .map(|m| {
            let mut rec = format!(
                "From: {}\nTo: {}\nTime: {}\nSUBJECT: {}",
                m.from,
                m.to,
                format_time(&m.time),
                m.subject
            );
            if !m.body.is_empty() {
                rec.push('\n');
                rec.push_str(&m.body);
            }
            rec
        })
        .collect();
    let mut out = records.join("\n\n");
    out.push('\n');
    Ok(out)
}

fn is_record_start(lines: &[&str], i: usize) -> bool {
    (i == 0 || lines[i - 1].is_empty())
        && lines[i].starts_with("From: ")
        && lines.get(i + 1).is_some_and(|l| l.starts_with("To: "))
        && lines.get(i + 2).is_some_and(|l| l.starts_with("Time: "))
}

/// Parses a transcript. `target` is the scammer address when known; otherwise
/// it is taken from the solicitation or, failing that, the first sender.
pub fn parse_transcript(
    text: &str,
    target: Option<&str>,
) -> Result<Vec<TranscriptMessage>, TranscriptError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.trim().is_empty() {
        return Err(TranscriptError::Parse {
            line: 1,
            reason: "empty transcript".into(),
        });
    }
    let lines: Vec<&str> = body
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();
    if !is_record_start(&lines, 0) {
        return Err(TranscriptError::Parse {
            line: 1,
            reason: "expected `From:`, `To:`, `Time:` header lines".into(),
        });
    }
    let starts: Vec<usize> = (0..lines.len()).filter(|&i| is_record_start(&lines, i)).collect();

    let mut raw = Vec::with_capacity(starts.len());
    for (k, &start) in starts.iter().enumerate() {
        let end = starts.get(k + 1).map_or(lines.len(), |&next| next - 1);
        let from = lines[start]["From: ".len()..].to_owned();
        let to = lines[start + 1]["To: ".len()..].to_owned();
        let time_raw = &lines[start + 2]["Time: ".len()..];
        let time = parse_time(time_raw).ok_or_else(|| TranscriptError::Parse {
            line: start + 3,
            reason: format!("bad timestamp `{time_raw}`"),
        })?;
        let subject_line = lines.get(start + 3).filter(|_| start + 3 < end).copied().unwrap_or("");
        let subject = subject_line
            .strip_prefix("SUBJECT: ")
            .or_else(|| subject_line.strip_prefix("SUBJECT:"))
            .ok_or_else(|| TranscriptError::Parse {
                line: start + 4,
                reason: "expected `SUBJECT:` line".into(),
            })?
            .to_owned();
        let body = if start + 4 <= end {
            lines[start + 4..end].join("\n")
        } else {
            String::new()
        };
        raw.push((from, to, time, subject, body));
    }

    let target = target
        .map(str::to_owned)
        .or_else(|| raw.iter().find(|r| r.1 == CRAWLER).map(|r| r.0.clone()))
        .unwrap_or_else(|| raw[0].0.clone());

    Ok(raw
        .into_iter()
        .map(|(from, to, time, subject, body)| {
            let direction = if to == CRAWLER {
                Direction::Solicitation
            } else if from.eq_ignore_ascii_case(&target) {
                Direction::Inbound
            } else {
                Direction::Outbound
            };
            TranscriptMessage {
                direction,
                from,
                to,
                time,
                subject,
                body,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn msg(direction: Direction, from: &str, to: &str, secs: i64, subject: &str, body: &str) -> TranscriptMessage {
        TranscriptMessage {
            direction,
            from: from.into(),
            to: to.into(),
            time: Utc.with_ymd_and_hms(2022, 7, 12, 17, 15, 18).unwrap() + chrono::Duration::seconds(secs),
            subject: subject.into(),
            body: body.into(),
        }
    }

    #[test]
    fn layout_is_exact() {
        let conv = vec![
            msg(Direction::Solicitation, "l*********8@gmail.com", CRAWLER, 0, "Dear Lucky Winner", "Dear Lucky Winner"),
            msg(Direction::Outbound, "dg76903@m**************p", "l*********8@gmail.com", 2, "Re: Dear Lucky Winner", "I am happy.\nBest,\nEnoch"),
        ];
        let text = export_transcript(&conv).unwrap();
        assert_eq!(
            text,
            "From: l*********8@gmail.com\nTo: CRAWLER\nTime: 2022-07-12 17:15:18\nSUBJECT: Dear Lucky Winner\nDear Lucky Winner\n\n\
             From: dg76903@m**************p\nTo: l*********8@gmail.com\nTime: 2022-07-12 17:15:20\nSUBJECT: Re: Dear Lucky Winner\nI am happy.\nBest,\nEnoch\n"
        );
        assert_eq!(parse_transcript(&text, None).unwrap(), conv);
    }

    #[test]
    fn from_line_inside_body_survives() {
        let conv = vec![
            msg(Direction::Solicitation, "a@x", CRAWLER, 0, "s", "hello"),
            msg(Direction::Inbound, "a@x", "p@y", 5, "s", "see below\n\nFrom: somebody@else.com\nthey sent it"),
            msg(Direction::Outbound, "p@y", "a@x", 9, "Re: s", "From: me\nTo: you"),
        ];
        let text = export_transcript(&conv).unwrap();
        assert_eq!(parse_transcript(&text, None).unwrap(), conv);
    }

    #[test]
    fn blank_lines_and_empty_bodies_round_trip() {
        let conv = vec![
            msg(Direction::Solicitation, "a@x", CRAWLER, 0, "", "Sent from: a@x\n\nHello my good friend,"),
            msg(Direction::Outbound, "p@y", "a@x", 1, "Re: ", ""),
            msg(Direction::Inbound, "a@x", "p@y", 2, "   Attn", "    indented\n\ntrailing blank\n"),
        ];
        let text = export_transcript(&conv).unwrap();
        assert_eq!(parse_transcript(&text, None).unwrap(), conv);
        assert_eq!(export_transcript(&parse_transcript(&text, None).unwrap()).unwrap(), text);
    }

    #[test]
    fn errors() {
        assert_eq!(export_transcript(&[]), Err(TranscriptError::EmptyConversation));
        assert!(matches!(parse_transcript("", None), Err(TranscriptError::Parse { line: 1, .. })));
        assert!(matches!(parse_transcript("hello\n", None), Err(TranscriptError::Parse { line: 1, .. })));
        let bad_time = "From: a\nTo: b\nTime: yesterday\nSUBJECT: x\nbody\n";
        assert!(matches!(parse_transcript(bad_time, None), Err(TranscriptError::Parse { line: 3, .. })));
        let no_subject = "From: a\nTo: b\nTime: 2022-07-12 17:15:18\nbody\n";
        assert!(matches!(parse_transcript(no_subject, None), Err(TranscriptError::Parse { line: 4, .. })));
    }

    #[test]
    fn direction_without_solicitation_uses_first_sender_or_hint() {
        let text = "From: a@x\nTo: p@y\nTime: 2022-07-12 17:15:18\nSUBJECT: s\nhi\n\nFrom: p@y\nTo: a@x\nTime: 2022-07-12 17:16:18\nSUBJECT: Re: s\nyo\n";
        let parsed = parse_transcript(text, None).unwrap();
        assert_eq!(parsed[0].direction, Direction::Inbound);
        assert_eq!(parsed[1].direction, Direction::Outbound);
        let hinted = parse_transcript(text, Some("p@y")).unwrap();
        assert_eq!(hinted[0].direction, Direction::Outbound);
    }
}
