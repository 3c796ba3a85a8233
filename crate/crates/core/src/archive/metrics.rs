use super::{Archive, ArchivedConversation, Direction};
use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Scammer-side autoresponder verdict for one conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ValidityFlag {
    Valid,
    Invalid { duplicate_body: String, occurrences: usize },
}

impl ValidityFlag {
    pub fn is_valid(&self) -> bool {
        matches!(self, ValidityFlag::Valid)
    }
}

/// Bodies sent this many times mark a conversation as automated.
pub const AUTORESPONDER_THRESHOLD: usize = 3;

pub fn normalize_body(body: &str) -> String {
    body.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

pub fn detect_autoresponder<'a, I>(inbound_bodies: I) -> ValidityFlag
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut first_hit: Option<String> = None;
    for body in inbound_bodies {
        let key = normalize_body(body);
        let n = counts.entry(key.clone()).or_insert(0);
        *n += 1;
        if *n >= AUTORESPONDER_THRESHOLD && first_hit.is_none() {
            first_hit = Some(key);
        }
    }
    match first_hit {
        None => ValidityFlag::Valid,
        Some(body) => ValidityFlag::Invalid {
            occurrences: counts[&body],
            duplicate_body: body,
        },
    }
}

pub fn conversation_validity(conv: &ArchivedConversation, window_end: Option<DateTime<Utc>>) -> ValidityFlag {
    detect_autoresponder(
        conv.inbound()
            .filter(|m| window_end.is_none_or(|end| m.time <= end))
            .map(|m| m.body.as_str()),
    )
}

/// `num / den` rounded half-up to `decimals` places, using exact integer math.
pub fn ratio_half_up(num: u64, den: u64, decimals: u32) -> Option<String> {
    if den == 0 {
        return None;
    }
    let scale = 10u128.pow(decimals);
    let scaled = (2 * num as u128 * scale + den as u128) / (2 * den as u128);
    let whole = scaled / scale;
    if decimals == 0 {
        return Some(whole.to_string());
    }
    let frac = scaled % scale;
    Some(format!("{whole}.{frac:0width$}", width = decimals as usize))
}

pub fn percent_display(num: u64, den: u64, decimals: u32) -> String {
    match ratio_half_up(num * 100, den, decimals) {
        Some(v) => format!("{v}%"),
        None => "n/a".to_owned(),
    }
}

/// Renders a span as `D days, H:MM:SS`.
pub fn format_duration(d: Duration) -> String {
    let total = d.num_seconds().max(0);
    let days = total / 86_400;
    let rem = total % 86_400;
    format!(
        "{days} days, {}:{:02}:{:02}",
        rem / 3600,
        (rem % 3600) / 60,
        rem % 60
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    pub window_end: Option<DateTime<Utc>>,
    /// Count invalid (autoresponder) conversations too.
    pub include_invalid_replies: bool,
    /// Decimal places of the rendered response rate.
    pub rate_decimals: u32,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            window_end: None,
            include_invalid_replies: false,
            rate_decimals: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: Option<String>,
    pub attempted_targets: u64,
    pub engaged_targets: u64,
    pub response_rate: f64,
    pub response_rate_display: String,
    pub conversations_valid: u64,
    pub conversations_invalid: u64,
    pub replies: u64,
    pub avg_replies: Option<f64>,
    pub avg_replies_display: Option<String>,
    pub longest_distraction_secs: i64,
    pub longest_distraction: String,
}

impl MetricsReport {
    #[allow(clippy::too_many_arguments)]
    pub fn from_counts(
        strategy: Option<String>,
        attempted: u64,
        engaged: u64,
        conversations: u64,
        invalid: u64,
        replies: u64,
        longest_secs: i64,
        rate_decimals: u32,
    ) -> Self {
        MetricsReport {
            strategy,
            attempted_targets: attempted,
            engaged_targets: engaged,
            response_rate: if attempted == 0 { 0.0 } else { engaged as f64 / attempted as f64 },
            response_rate_display: percent_display(engaged, attempted, rate_decimals),
            conversations_valid: conversations,
            conversations_invalid: invalid,
            replies,
            avg_replies: (conversations > 0).then(|| replies as f64 / conversations as f64),
            avg_replies_display: ratio_half_up(replies, conversations, 2),
            longest_distraction_secs: longest_secs,
            longest_distraction: format_duration(Duration::seconds(longest_secs)),
        }
    }
}

/// Metrics over the conversations of `strategy`, or over the whole archive.
pub fn compute_metrics(archive: &Archive, strategy: Option<&str>, opts: &MetricsOptions) -> MetricsReport {
    let end = opts.window_end;
    let in_window = |t: &DateTime<Utc>| end.is_none_or(|e| *t <= e);

    let mut attempted = 0u64;
    let mut engaged = 0u64;
    let mut valid = 0u64;
    let mut invalid = 0u64;
    let mut replies = 0u64;
    let mut longest = 0i64;

    for conv in archive
        .conversations
        .iter()
        .filter(|c| strategy.is_none_or(|s| c.strategy == s))
    {
        if !conv.messages.iter().any(|m| in_window(&m.time)) {
            continue;
        }
        attempted += 1;
        let inbound: Vec<_> = conv.inbound().filter(|m| in_window(&m.time)).collect();
        if inbound.is_empty() {
            continue;
        }
        engaged += 1;
        let flag = detect_autoresponder(inbound.iter().map(|m| m.body.as_str()));
        if !flag.is_valid() {
            invalid += 1;
            if !opts.include_invalid_replies {
                continue;
            }
        }
        valid += 1;
        replies += inbound.len() as u64;
        let first = inbound.iter().map(|m| m.time).min().unwrap_or_default();
        let last = inbound.iter().map(|m| m.time).max().unwrap_or_default();
        longest = longest.max((last - first).num_seconds());
    }

    MetricsReport::from_counts(
        strategy.map(str::to_owned),
        attempted,
        engaged,
        valid,
        invalid,
        replies,
        longest,
        opts.rate_decimals,
    )
}

pub fn compute_all_metrics(archive: &Archive, opts: &MetricsOptions) -> BTreeMap<String, MetricsReport> {
    archive
        .strategies()
        .into_iter()
        .map(|s| {
            let report = compute_metrics(archive, Some(&s), opts);
            (s, report)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("archives cover different targets ({only_a} only in A, {only_b} only in B)")]
    UniverseMismatch { only_a: usize, only_b: usize },
    #[error("{engaged} engaged targets exceed the {total} involved")]
    EngagedExceedsTotal { engaged: usize, total: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossInstanceOptions {
    /// Defaults to attempted minus targets unreachable at first send.
    pub total_involved: Option<usize>,
    pub still_interested_secs: i64,
    pub window_end: DateTime<Utc>,
}

impl CrossInstanceOptions {
    pub fn new(window_end: DateTime<Utc>) -> Self {
        CrossInstanceOptions {
            total_involved: None,
            still_interested_secs: 3 * 86_400,
            window_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub attempted: usize,
    pub engaged: usize,
    pub dropout: usize,
    pub still_interested: usize,
    pub response_rate: f64,
    pub response_rate_display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossInstanceReport {
    pub instance_a: InstanceSummary,
    pub instance_b: InstanceSummary,
    pub common_engaged: usize,
    pub common_dropout: usize,
    pub common_still_interested: usize,
    pub total_involved: usize,
}

struct InstanceSets {
    attempted: BTreeSet<String>,
    unreachable: BTreeSet<String>,
    engaged: BTreeSet<String>,
    still_interested: BTreeSet<String>,
}

fn instance_sets(archive: &Archive, opts: &CrossInstanceOptions) -> InstanceSets {
    let end = opts.window_end;
    let cutoff = end - Duration::seconds(opts.still_interested_secs);
    let mut sets = InstanceSets {
        attempted: BTreeSet::new(),
        unreachable: BTreeSet::new(),
        engaged: BTreeSet::new(),
        still_interested: BTreeSet::new(),
    };
    for conv in &archive.conversations {
        let target = conv.target.to_lowercase();
        sets.attempted.insert(target.clone());
        if conv.unreachable_at_first_send {
            sets.unreachable.insert(target.clone());
        }
        let visible: Vec<_> = conv.messages.iter().filter(|m| m.time <= end).collect();
        if visible.iter().any(|m| m.direction == Direction::Inbound) {
            sets.engaged.insert(target.clone());
        }
        if let Some(last) = visible.iter().max_by_key(|m| m.time) {
            if last.direction == Direction::Inbound && last.time >= cutoff {
                sets.still_interested.insert(target);
            }
        }
    }
    sets
}

pub fn cross_instance_report(
    a: &Archive,
    b: &Archive,
    opts: &CrossInstanceOptions,
) -> Result<CrossInstanceReport, MetricsError> {
    let sa = instance_sets(a, opts);
    let sb = instance_sets(b, opts);
    if sa.attempted != sb.attempted {
        return Err(MetricsError::UniverseMismatch {
            only_a: sa.attempted.difference(&sb.attempted).count(),
            only_b: sb.attempted.difference(&sa.attempted).count(),
        });
    }
    let unreachable: BTreeSet<&String> = sa.unreachable.union(&sb.unreachable).collect();
    let total = opts
        .total_involved
        .unwrap_or(sa.attempted.len() - unreachable.len());
    let either = sa.engaged.union(&sb.engaged).count();
    if either > total {
        return Err(MetricsError::EngagedExceedsTotal {
            engaged: either,
            total,
        });
    }
    let summary = |s: &InstanceSets| {
        let attempted = s.attempted.len();
        let engaged = s.engaged.len();
        InstanceSummary {
            attempted,
            engaged,
            dropout: total - engaged,
            still_interested: s.still_interested.len(),
            response_rate: if attempted == 0 { 0.0 } else { engaged as f64 / attempted as f64 },
            response_rate_display: percent_display(engaged as u64, attempted as u64, 2),
        }
    };
    Ok(CrossInstanceReport {
        instance_a: summary(&sa),
        instance_b: summary(&sb),
        common_engaged: sa.engaged.intersection(&sb.engaged).count(),
        common_dropout: total - either,
        common_still_interested: sa
            .still_interested
            .intersection(&sb.still_interested)
            .count(),
        total_involved: total,
    })
}
