use chrono::{DateTime, Duration, Timelike, Utc};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use super::{Conversation, ConversationId};
use crate::ingestion::TargetState;

/// A UTC hour range `[start, end)`. `start > end` wraps past midnight and
/// `start == end` covers the whole day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourRange {
    pub start: u8,
    pub end: u8,
}

impl HourRange {
    pub fn contains(&self, hour: u8) -> bool {
        use std::cmp::Ordering::*;
        match self.start.cmp(&self.end) {
            Less => self.start <= hour && hour < self.end,
            Greater => hour >= self.start || hour < self.end,
            Equal => true,
        }
    }
}

/// Hours of the day during which an instance may send. Empty means always.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SendWindow {
    pub ranges: Vec<HourRange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad send window `{0}`: expected `always` or ranges like `9-17,22-2`")]
pub struct WindowParseError(pub String);

impl SendWindow {
    pub fn always() -> Self {
        SendWindow::default()
    }

    pub fn hours(start: u8, end: u8) -> Self {
        SendWindow {
            ranges: vec![HourRange { start, end: end % 24 }],
        }
    }

    pub fn is_open(&self, t: DateTime<Utc>) -> bool {
        let h = t.hour() as u8;
        self.ranges.is_empty() || self.ranges.iter().any(|r| r.contains(h))
    }

    /// `t` itself when open, otherwise the next range start.
    pub fn next_open(&self, t: DateTime<Utc>) -> DateTime<Utc> {
        if self.is_open(t) {
            return t;
        }
        let hour_start = t
            .with_minute(0)
            .and_then(|x| x.with_second(0))
            .and_then(|x| x.with_nanosecond(0))
            .unwrap_or(t);
        (1..=24)
            .map(|k| hour_start + Duration::hours(k))
            .find(|c| self.is_open(*c))
            .unwrap_or(t)
    }
}

impl FromStr for SendWindow {
    type Err = WindowParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("always") {
            return Ok(SendWindow::always());
        }
        let bad = || WindowParseError(s.to_owned());
        let mut ranges = Vec::new();
        for part in s.split(',') {
            let (a, b) = part.trim().split_once('-').ok_or_else(bad)?;
            let start: u8 = a.trim().parse().map_err(|_| bad())?;
            let end: u8 = b.trim().parse().map_err(|_| bad())?;
            if start > 23 || end > 24 {
                return Err(bad());
            }
            ranges.push(HourRange { start, end: end % 24 });
        }
        Ok(SendWindow { ranges })
    }
}

impl fmt::Display for SendWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ranges.is_empty() {
            return f.write_str("always");
        }
        let parts: Vec<String> = self
            .ranges
            .iter()
            .map(|r| format!("{}-{}", r.start, if r.end == 0 { 24 } else { r.end }))
            .collect();
        f.write_str(&parts.join(","))
    }
}

impl Serialize for SendWindow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SendWindow {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyKind {
    Bait,
    Reply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplyRequest {
    pub conversation: ConversationId,
    pub kind: ReplyKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoSendReason {
    NoPendingInbound,
    Stopped,
    /// The target is not in a state that permits contact.
    TargetBlocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SendDecision {
    Send(ReplyRequest),
    Defer(DateTime<Utc>),
    NoSend(NoSendReason),
}

pub fn schedule_send(
    conv: &Conversation,
    target_state: Option<TargetState>,
    now: DateTime<Utc>,
    window: &SendWindow,
) -> SendDecision {
    if conv.state.is_stopped() {
        return SendDecision::NoSend(NoSendReason::Stopped);
    }
    let kind = if conv.needs_bait() {
        if target_state != Some(TargetState::Approved) {
            return SendDecision::NoSend(NoSendReason::TargetBlocked);
        }
        ReplyKind::Bait
    } else if conv.has_unanswered_inbound() {
        if target_state != Some(TargetState::Contacted) {
            return SendDecision::NoSend(NoSendReason::TargetBlocked);
        }
        ReplyKind::Reply
    } else {
        return SendDecision::NoSend(NoSendReason::NoPendingInbound);
    };
    if !window.is_open(now) {
        return SendDecision::Defer(window.next_open(now));
    }
    SendDecision::Send(ReplyRequest {
        conversation: conv.id,
        kind,
    })
}
