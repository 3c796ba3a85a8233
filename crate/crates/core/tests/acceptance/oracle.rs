//! Brute-force metric recomputation over flat message rows, written without
//! reference to the library's grouping or rounding helpers.

use baitmail_core::archive::{Archive, Direction, MetricsReport};
use chrono::{DateTime, Utc};
use std::collections::BTreeSet;

pub struct Row<'a> {
    pub conv: usize,
    pub strategy: &'a str,
    pub direction: Direction,
    pub time: DateTime<Utc>,
    pub body: &'a str,
}

pub fn rows(archive: &Archive) -> Vec<Row<'_>> {
    let mut out = Vec::new();
    for (i, c) in archive.conversations.iter().enumerate() {
        for m in &c.messages {
            out.push(Row {
                conv: i,
                strategy: &c.strategy,
                direction: m.direction,
                time: m.time,
                body: &m.body,
            });
        }
    }
    out
}

fn squash(body: &str) -> String {
    let mut words: Vec<String> = Vec::new();
    let mut cur = String::new();
    for ch in body.chars() {
        if ch.is_whitespace() {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
        } else {
            cur.extend(ch.to_lowercase());
        }
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words.join(" ")
}

pub fn is_automated(bodies: &[&str]) -> bool {
    let keys: Vec<String> = bodies.iter().map(|b| squash(b)).collect();
    keys.iter()
        .any(|k| keys.iter().filter(|o| *o == k).count() > 2)
}

/// Half-up rounding of `num / den` to `decimals` places via one extra digit.
pub fn round_text(num: u64, den: u64, decimals: u32) -> Option<String> {
    if den == 0 {
        return None;
    }
    let extra = num as u128 * 10u128.pow(decimals + 1) / den as u128;
    let rounded = (extra + 5) / 10;
    let digits = format!("{:0>width$}", rounded, width = decimals as usize + 1);
    if decimals == 0 {
        return Some(rounded.to_string());
    }
    let (int, frac) = digits.split_at(digits.len() - decimals as usize);
    Some(format!("{int}.{frac}"))
}

fn span_text(secs: i64) -> String {
    let d = chrono::Duration::seconds(secs);
    let days = d.num_days();
    let hours = d.num_hours() - days * 24;
    let mins = d.num_minutes() - d.num_hours() * 60;
    let s = d.num_seconds() - d.num_minutes() * 60;
    format!("{days} days, {hours}:{mins:02}:{s:02}")
}

pub fn brute_force(
    rows: &[Row<'_>],
    strategy: Option<&str>,
    end: Option<DateTime<Utc>>,
    include_invalid: bool,
    rate_decimals: u32,
) -> MetricsReport {
    let visible = |r: &Row<'_>| end.is_none_or(|e| r.time <= e);
    let convs: BTreeSet<usize> = rows
        .iter()
        .filter(|r| strategy.is_none_or(|s| r.strategy == s))
        .map(|r| r.conv)
        .collect();
    let (mut attempted, mut engaged, mut valid, mut invalid, mut replies, mut longest) = (0u64, 0u64, 0u64, 0u64, 0u64, 0i64);
    for c in convs {
        if !rows.iter().any(|r| r.conv == c && visible(r)) {
            continue;
        }
        attempted += 1;
        let inbound: Vec<&Row<'_>> = rows
            .iter()
            .filter(|r| r.conv == c && visible(r) && r.direction == Direction::Inbound)
            .collect();
        if inbound.is_empty() {
            continue;
        }
        engaged += 1;
        let bodies: Vec<&str> = inbound.iter().map(|r| r.body).collect();
        if is_automated(&bodies) {
            invalid += 1;
            if !include_invalid {
                continue;
            }
        }
        valid += 1;
        replies += inbound.len() as u64;
        for a in &inbound {
            for b in &inbound {
                longest = longest.max((b.time - a.time).num_seconds());
            }
        }
    }
    MetricsReport {
        strategy: strategy.map(str::to_owned),
        attempted_targets: attempted,
        engaged_targets: engaged,
        response_rate: if attempted == 0 { 0.0 } else { engaged as f64 / attempted as f64 },
        response_rate_display: round_text(engaged * 100, attempted, rate_decimals)
            .map_or_else(|| "n/a".to_string(), |v| format!("{v}%")),
        conversations_valid: valid,
        conversations_invalid: invalid,
        replies,
        avg_replies: if valid == 0 { None } else { Some(replies as f64 / valid as f64) },
        avg_replies_display: round_text(replies, valid, 2),
        longest_distraction_secs: longest,
        longest_distraction: span_text(longest),
    }
}
