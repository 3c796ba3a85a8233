use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::delivery::DeliveryStatus;
use super::html::{canonical_text, render_template, strip_tags};
use crate::address::EmailAddress;
use crate::orchestrator::Persona;

pub const SIGNOFF: &str = "Best,";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("reply text is empty")]
    EmptyReply,
    #[error("reply quotes {} line(s) of the inbound message", .0.len())]
    QuotesInbound(Vec<String>),
}

/// A reply after subject, signature and template have been applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedReply {
    pub from_name: String,
    pub from_address: EmailAddress,
    pub from_header: String,
    pub subject: String,
    pub html_body: String,
    pub text_body: String,
    /// Lines appended as the signature (empty if the reply already ended
    /// with the persona's name).
    pub signature_lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboundEmail {
    pub persona: Persona,
    pub to: EmailAddress,
    pub subject: String,
    pub html_body: String,
    pub text_body: String,
    pub queued_at: DateTime<Utc>,
    pub delivery: DeliveryStatus,
}

impl OutboundEmail {
    pub fn queue(
        rendered: RenderedReply,
        persona: Persona,
        to: EmailAddress,
        queued_at: DateTime<Utc>,
    ) -> Self {
        OutboundEmail {
            persona,
            to,
            subject: rendered.subject,
            html_body: rendered.html_body,
            text_body: rendered.text_body,
            queued_at,
            delivery: DeliveryStatus::Queued,
        }
    }
}

/// `Re: <subject>` with any existing run of `re:` prefixes collapsed into one.
pub fn reply_subject(original: &str) -> String {
    let mut rest = original;
    while rest.len() >= 3 && rest.is_char_boundary(3) && rest[..3].eq_ignore_ascii_case("re:") {
        rest = rest[3..].trim_start();
    }
    format!("Re: {rest}")
}

/// Renders reply text into the outbound email shape. Deterministic.
pub fn render_reply(
    reply_text: &str,
    persona: &Persona,
    original_subject: &str,
) -> Result<RenderedReply, RenderError> {
    let mut text = canonical_text(reply_text);
    if text.is_empty() {
        return Err(RenderError::EmptyReply);
    }
    let mut signature_lines = Vec::new();
    if !text.ends_with(persona.fake_name.as_str()) {
        signature_lines = vec![SIGNOFF.to_owned(), persona.fake_name.clone()];
        text.push('\n');
        text.push_str(&signature_lines.join("\n"));
        text = canonical_text(&text);
    }
    let html_body = render_template(&text);
    let text_body = strip_tags(&html_body);
    debug_assert_eq!(text_body, text);
    Ok(RenderedReply {
        from_name: persona.fake_name.clone(),
        from_address: persona.address(),
        from_header: persona.from_header(),
        subject: reply_subject(original_subject),
        html_body,
        text_body,
        signature_lines,
    })
}

fn line_set(text: &str) -> BTreeSet<&str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

/// Lines of `body` that also appear as whole lines of `inbound_body`.
pub fn shared_lines(body: &str, inbound_body: &str) -> Vec<String> {
    let inbound = line_set(inbound_body);
    line_set(body)
        .into_iter()
        .filter(|l| inbound.contains(l))
        .map(str::to_owned)
        .collect()
}

/// Rejects replies that reproduce any line of the message being answered.
/// The signature we appended ourselves is not considered a quote.
pub fn lint_no_quote(rendered: &RenderedReply, inbound_body: &str) -> Result<(), RenderError> {
    let mut body_lines: Vec<&str> = rendered.text_body.lines().collect();
    let sig = rendered.signature_lines.len();
    body_lines.truncate(body_lines.len().saturating_sub(sig));
    let shared = shared_lines(&body_lines.join("\n"), inbound_body);
    if shared.is_empty() {
        Ok(())
    } else {
        Err(RenderError::QuotesInbound(shared))
    }
}

/// Removes every line of `reply_text` that also occurs in `inbound_body`.
pub fn drop_quoted_lines(reply_text: &str, inbound_body: &str) -> String {
    let inbound = line_set(inbound_body);
    reply_text
        .lines()
        .filter(|l| !inbound.contains(l.trim()))
        .collect::<Vec<_>>()
        .join("\n")
}
