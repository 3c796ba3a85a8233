use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::html::strip_tags;
use crate::address::EmailAddress;

/// Provider-neutral inbound webhook document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InboundPayload {
    #[serde(default)]
    pub from: Option<String>,
    #[serde(default)]
    pub to: Option<String>,
    #[serde(default)]
    pub subject: Option<String>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub html: Option<String>,
    #[serde(default)]
    pub timestamp: Option<String>,
    #[serde(default)]
    pub message_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InboundEmail {
    pub message_key: String,
    pub from: EmailAddress,
    pub to: EmailAddress,
    pub subject: String,
    pub body_text: String,
    pub received_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InboundError {
    #[error("payload is not valid JSON: {0}")]
    Json(String),
    #[error("payload is missing `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}` is not an address: {reason}")]
    BadAddress { field: &'static str, reason: String },
}

/// Pulls `addr` out of `Name <addr>` or returns the input.
fn bare_address(raw: &str) -> &str {
    match (raw.rfind('<'), raw.rfind('>')) {
        (Some(l), Some(r)) if l < r => &raw[l + 1..r],
        _ => raw,
    }
}

fn address_field(value: Option<&str>, field: &'static str) -> Result<EmailAddress, InboundError> {
    let raw = value
        .filter(|v| !v.trim().is_empty())
        .ok_or(InboundError::MissingField(field))?;
    EmailAddress::parse(bare_address(raw)).map_err(|e| InboundError::BadAddress {
        field,
        reason: e.to_string(),
    })
}

pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    DateTime::parse_from_rfc3339(raw)
        .map(|t| t.with_timezone(&Utc))
        .ok()
        .or_else(|| {
            NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S")
                .ok()
                .map(|n| n.and_utc())
        })
}

fn normalize_text(text: &str) -> String {
    text.replace("\r\n", "\n").replace('\r', "\n").trim().to_owned()
}

/// Normalizes a webhook payload. `now` is used when the payload carries no
/// usable timestamp.
pub fn parse_inbound(payload: &InboundPayload, now: DateTime<Utc>) -> Result<InboundEmail, InboundError> {
    let from = address_field(payload.from.as_deref(), "from")?;
    let to = address_field(payload.to.as_deref(), "to")?;
    let subject = payload.subject.clone().unwrap_or_default();
    let mut warnings = Vec::new();

    let body_text = match (
        payload.text.as_deref().filter(|t| !t.trim().is_empty()),
        payload.html.as_deref().filter(|t| !t.trim().is_empty()),
    ) {
        (Some(text), _) => normalize_text(text),
        (None, Some(html)) => strip_tags(&normalize_text(html)),
        (None, None) => {
            warnings.push("no text or html body".to_owned());
            String::new()
        }
    };

    let received_at = match payload.timestamp.as_deref() {
        Some(ts) => parse_timestamp(ts).unwrap_or_else(|| {
            warnings.push(format!("unparseable timestamp `{ts}`"));
            now
        }),
        None => now,
    };

    let message_key = match payload.message_id.as_deref().map(str::trim).filter(|m| !m.is_empty()) {
        Some(id) => id.to_owned(),
        None => {
            let mut h = Sha256::new();
            for part in [from.as_str(), to.as_str(), &subject, &body_text, &received_at.to_rfc3339()] {
                h.update(part.as_bytes());
                h.update([0u8]);
            }
            hex::encode(h.finalize())
        }
    };

    Ok(InboundEmail {
        message_key,
        from,
        to,
        subject,
        body_text,
        received_at,
        parse_warning: if warnings.is_empty() {
            None
        } else {
            Some(warnings.join("; "))
        },
    })
}

pub fn parse_inbound_json(json: &str, now: DateTime<Utc>) -> Result<InboundEmail, InboundError> {
    let payload: InboundPayload =
        serde_json::from_str(json).map_err(|e| InboundError::Json(e.to_string()))?;
    parse_inbound(&payload, now)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn now() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2022, 7, 14, 23, 11, 59).unwrap()
    }

    #[test]
    fn normalized_payload_maps_directly() {
        let json = r#"{"from":"p*****5@gmail.com","to":"zn16438@mail.example","subject":"Re: I have successfully transferred the fund.","text":"There's no risk in this my dear, everything is okay/","timestamp":"2022-07-14T23:11:59Z"}"#;
        let inbound = parse_inbound_json(json, now()).unwrap();
        assert_eq!(inbound.from.as_str(), "p*****5@gmail.com");
        assert_eq!(inbound.to.as_str(), "zn16438@mail.example");
        assert_eq!(inbound.subject, "Re: I have successfully transferred the fund.");
        assert_eq!(inbound.body_text, "There's no risk in this my dear, everything is okay/");
        assert_eq!(inbound.received_at, now());
        assert_eq!(inbound.parse_warning, None);
        assert_eq!(inbound.message_key.len(), 64);
    }

    #[test]
    fn html_only_body_is_stripped() {
        let json = r#"{"from":"a@b.c","to":"x@y.z","html":"<p>Hello<br>there</p>"}"#;
        assert_eq!(parse_inbound_json(json, now()).unwrap().body_text, "Hello\nthere");
    }

    #[test]
    fn missing_to_is_rejected() {
        let json = r#"{"from":"a@b.c","text":"hi"}"#;
        assert_eq!(parse_inbound_json(json, now()), Err(InboundError::MissingField("to")));
        let json = r#"{"to":"a@b.c","text":"hi"}"#;
        assert_eq!(parse_inbound_json(json, now()), Err(InboundError::MissingField("from")));
    }

    #[test]
    fn display_names_and_warnings() {
        let json = r#"{"from":"\"Leonn\" <L*********8@Gmail.com>","to":"dg76903@mail.example","timestamp":"yesterday"}"#;
        let inbound = parse_inbound_json(json, now()).unwrap();
        assert_eq!(inbound.from.as_str(), "l*********8@gmail.com");
        assert_eq!(inbound.body_text, "");
        assert_eq!(inbound.received_at, now());
        let warning = inbound.parse_warning.unwrap();
        assert!(warning.contains("no text or html body"));
        assert!(warning.contains("unparseable timestamp"));
    }
}
