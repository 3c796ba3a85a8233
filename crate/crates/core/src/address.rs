use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressError {
    #[error("address is empty")]
    Empty,
    #[error("address `{0}` must contain exactly one `@`")]
    AtSign(String),
    #[error("address `{0}` has an empty local part or domain")]
    EmptyPart(String),
    #[error("address `{0}` contains whitespace or forbidden characters")]
    ForbiddenChar(String),
}

/// A mailbox address normalized to lowercase with surrounding whitespace removed.
///
/// The whole address is lowercased, not only the domain. Report feeds are
/// inconsistent about casing and merging `Foo@x` with `foo@x` is the
/// intended behaviour.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EmailAddress(String);

impl EmailAddress {
    pub fn parse(raw: &str) -> Result<Self, AddressError> {
        let trimmed = raw.trim();
        let trimmed = trimmed
            .strip_prefix('<')
            .and_then(|s| s.strip_suffix('>'))
            .unwrap_or(trimmed);
        if trimmed.is_empty() {
            return Err(AddressError::Empty);
        }
        if trimmed
            .chars()
            .any(|c| c.is_whitespace() || c.is_control() || matches!(c, '<' | '>' | ',' | ';' | '"'))
        {
            return Err(AddressError::ForbiddenChar(trimmed.to_owned()));
        }
        let mut parts = trimmed.split('@');
        let (local, domain) = match (parts.next(), parts.next(), parts.next()) {
            (Some(l), Some(d), None) => (l, d),
            _ => return Err(AddressError::AtSign(trimmed.to_owned())),
        };
        if local.is_empty() || domain.is_empty() {
            return Err(AddressError::EmptyPart(trimmed.to_owned()));
        }
        Ok(EmailAddress(trimmed.to_lowercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn local_part(&self) -> &str {
        self.0.split('@').next().unwrap_or_default()
    }

    pub fn domain(&self) -> &str {
        self.0.rsplit('@').next().unwrap_or_default()
    }
}

impl fmt::Display for EmailAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for EmailAddress {
    type Error = AddressError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        EmailAddress::parse(&value)
    }
}

impl From<EmailAddress> for String {
    fn from(value: EmailAddress) -> Self {
        value.0
    }
}

impl std::str::FromStr for EmailAddress {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EmailAddress::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_trims() {
        let a = EmailAddress::parse("  Scammer.Boss@GMAIL.com \n").unwrap();
        assert_eq!(a.as_str(), "scammer.boss@gmail.com");
        assert_eq!(a.local_part(), "scammer.boss");
        assert_eq!(a.domain(), "gmail.com");
    }

    #[test]
    fn accepts_angle_brackets_and_masked_addresses() {
        assert_eq!(EmailAddress::parse("<x@y.z>").unwrap().as_str(), "x@y.z");
        assert!(EmailAddress::parse("p*****5@gmail.com").is_ok());
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(EmailAddress::parse("   "), Err(AddressError::Empty));
        assert!(matches!(EmailAddress::parse("nobody"), Err(AddressError::AtSign(_))));
        assert!(matches!(EmailAddress::parse("a@b@c"), Err(AddressError::AtSign(_))));
        assert!(matches!(EmailAddress::parse("@b.com"), Err(AddressError::EmptyPart(_))));
        assert!(matches!(EmailAddress::parse("a b@c.com"), Err(AddressError::ForbiddenChar(_))));
    }
}
