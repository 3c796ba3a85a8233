//! Mailbox threading for corporate mail corpora in maildir layout.

use chrono::{DateTime, Utc};
use mail_parser::{Address, HeaderValue, MessageParser};
use regex::Regex;
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use super::{PairSource, PromptReplyPair};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MailMessage {
    pub id: String,
    pub from: String,
    pub to: Vec<String>,
    pub subject: String,
    pub date: Option<DateTime<Utc>>,
    pub body: String,
    /// `In-Reply-To` and `References` ids.
    pub parents: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Mailbox {
    pub messages: Vec<MailMessage>,
    pub skipped: Vec<(PathBuf, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub id: String,
    pub messages: Vec<MailMessage>,
}

fn addresses(a: Option<&Address<'_>>) -> Vec<String> {
    a.map(|a| {
        a.iter()
            .filter_map(|x| x.address())
            .map(|s| s.trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .collect()
    })
    .unwrap_or_default()
}

fn id_list(v: &HeaderValue<'_>) -> Vec<String> {
    match v {
        HeaderValue::Text(t) => vec![t.to_string()],
        HeaderValue::TextList(l) => l.iter().map(|t| t.to_string()).collect(),
        _ => Vec::new(),
    }
}

fn synthetic_id(from: &str, date: Option<DateTime<Utc>>, subject: &str, body: &str) -> String {
    let mut h = Sha256::new();
    for part in [from, &date.map(|d| d.to_rfc3339()).unwrap_or_default(), subject, body] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    format!("sha256:{}", &hex::encode(h.finalize())[..32])
}

/// Parses one RFC 5322 message. `None` if it has no sender or no text.
pub fn parse_mail(raw: &[u8]) -> Option<MailMessage> {
    let msg = MessageParser::default().parse(raw)?;
    let from = addresses(msg.from()).into_iter().next()?;
    let mut to = addresses(msg.to());
    to.extend(addresses(msg.cc()));
    let subject = msg.subject().unwrap_or("").to_owned();
    let date = msg
        .date()
        .and_then(|d| DateTime::from_timestamp(d.to_timestamp(), 0));
    let body = msg.body_text(0).map(|b| b.replace("\r\n", "\n")).unwrap_or_default();
    if body.trim().is_empty() && subject.trim().is_empty() {
        return None;
    }
    let mut parents = id_list(msg.in_reply_to());
    parents.extend(id_list(msg.references()));
    let id = msg
        .message_id()
        .map(str::to_owned)
        .unwrap_or_else(|| synthetic_id(&from, date, &subject, &body));
    Some(MailMessage {
        id,
        from,
        to,
        subject,
        date,
        body,
        parents,
    })
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.filter_map(Result::ok).map(|e| e.path()).collect();
    entries.sort();
    for p in entries {
        if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.')) {
            continue;
        }
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Reads every file under `dir` as one message. Copies of the same message
/// (same id) found in several folders are kept once.
pub fn read_maildir(dir: &Path) -> io::Result<Mailbox> {
    let mut files = Vec::new();
    walk(dir, &mut files)?;
    let mut mailbox = Mailbox::default();
    let mut seen = BTreeSet::new();
    for path in files {
        let raw = match fs::read(&path) {
            Ok(r) => r,
            Err(e) => {
                mailbox.skipped.push((path, e.to_string()));
                continue;
            }
        };
        match parse_mail(&raw) {
            Some(m) => {
                if seen.insert(m.id.clone()) {
                    mailbox.messages.push(m);
                }
            }
            None => mailbox.skipped.push((path, "not a parseable message".into())),
        }
    }
    Ok(mailbox)
}

/// Lowercased subject without any run of `Re:`/`Fw:`/`Fwd:` prefixes.
pub fn normalize_subject(subject: &str) -> String {
    static PREFIX: OnceLock<Regex> = OnceLock::new();
    let re = PREFIX.get_or_init(|| Regex::new(r"(?i)^\s*((re|fwd?)\s*(\[\d+\])?\s*:\s*)+").expect("static regex"));
    re.replace(subject, "")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Groups messages into conversation chains. Reply headers link messages
/// directly; a message whose headers link nothing joins messages with the
/// same normalized subject between the same two participants. Only chains
/// with at least two distinct authors are returned.
pub fn thread_conversations(messages: &[MailMessage]) -> Vec<Chain> {
    let n = messages.len();
    let mut uf = UnionFind((0..n).collect());
    let by_id: BTreeMap<&str, usize> = messages.iter().enumerate().map(|(i, m)| (m.id.as_str(), i)).collect();

    let mut keyed: BTreeMap<(String, String, String), Vec<usize>> = BTreeMap::new();
    let mut keys_of: Vec<Vec<(String, String, String)>> = vec![Vec::new(); n];
    for (i, m) in messages.iter().enumerate() {
        let subject = normalize_subject(&m.subject);
        if subject.is_empty() {
            continue;
        }
        for r in &m.to {
            let (a, b) = if m.from <= *r { (m.from.clone(), r.clone()) } else { (r.clone(), m.from.clone()) };
            let key = (subject.clone(), a, b);
            keyed.entry(key.clone()).or_default().push(i);
            keys_of[i].push(key);
        }
    }

    for (i, m) in messages.iter().enumerate() {
        let mut linked = false;
        for p in &m.parents {
            if let Some(&j) = by_id.get(p.as_str()) {
                if j != i {
                    uf.union(i, j);
                    linked = true;
                }
            }
        }
        if !linked {
            for key in &keys_of[i] {
                for &j in &keyed[key] {
                    uf.union(i, j);
                }
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = uf.find(i);
        groups.entry(r).or_default().push(i);
    }
    let mut chains: Vec<Chain> = groups
        .into_values()
        .filter_map(|mut idx| {
            idx.sort_by(|&a, &b| (messages[a].date, a).cmp(&(messages[b].date, b)));
            let authors: BTreeSet<&str> = idx.iter().map(|&i| messages[i].from.as_str()).collect();
            if idx.len() < 2 || authors.len() < 2 {
                return None;
            }
            let msgs: Vec<MailMessage> = idx.into_iter().map(|i| messages[i].clone()).collect();
            Some(Chain {
                id: msgs[0].id.clone(),
                messages: msgs,
            })
        })
        .collect();
    chains.sort_by(|a, b| (a.messages[0].date, &a.id).cmp(&(b.messages[0].date, &b.id)));
    chains
}

/// Drops quoted material: `>` lines and everything from an
/// "Original Message" / "Forwarded by" / "On ... wrote:" separator on.
pub fn strip_quoted(body: &str) -> String {
    static CUT: OnceLock<Regex> = OnceLock::new();
    let cut = CUT.get_or_init(|| {
        Regex::new(r"(?i)^\s*(-{2,}\s*original message\s*-{2,}|-{2,}\s*forwarded by|on .{1,200} wrote:\s*$)")
            .expect("static regex")
    });
    let mut kept = Vec::new();
    for line in body.lines() {
        if cut.is_match(line) {
            break;
        }
        if line.trim_start().starts_with('>') {
            continue;
        }
        kept.push(line.trim_end());
    }
    kept.join("\n").trim().to_owned()
}

/// Message `i` is the prompt for message `i + 1` whenever their authors differ.
pub fn enron_pairs(chains: &[Chain]) -> Vec<PromptReplyPair> {
    let mut out = Vec::new();
    for chain in chains {
        for w in chain.messages.windows(2) {
            if w[0].from == w[1].from {
                continue;
            }
            let prompt = strip_quoted(&w[0].body);
            let reply = strip_quoted(&w[1].body);
            if prompt.is_empty() || reply.is_empty() {
                continue;
            }
            out.push(PromptReplyPair {
                prompt,
                reply,
                source: PairSource::Enron,
                conversation_id: chain.id.clone(),
            });
        }
    }
    out
}
