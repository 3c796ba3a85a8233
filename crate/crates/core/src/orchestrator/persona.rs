use std::collections::BTreeSet;
use std::sync::OnceLock;

use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::address::EmailAddress;

const BUNDLED_NAMES: &str = include_str!("../../data/fake_names.txt");
pub const MAX_PERSONA_ATTEMPTS: usize = 100;

/// The mailbox identity a conversation is conducted under.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Persona {
    pub mailname: String,
    pub fake_name: String,
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PersonaError {
    #[error("no fake names available")]
    NoNames,
    #[error("could not find a free mailname after {0} attempts")]
    Exhausted(usize),
}

impl Persona {
    pub fn address(&self) -> EmailAddress {
        EmailAddress::parse(&format!("{}@{}", self.mailname, self.domain))
            .expect("persona address is well-formed")
    }

    /// `"<FakeName>" <mailname@domain>`
    pub fn from_header(&self) -> String {
        let name = self.fake_name.replace('\\', "\\\\").replace('"', "\\\"");
        format!("\"{name}\" <{}@{}>", self.mailname, self.domain)
    }
}

pub fn mailname_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[a-z]{2}[0-9]{5}$").expect("valid regex"))
}

pub fn bundled_names() -> Vec<String> {
    BUNDLED_NAMES
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

fn draw_mailname<R: Rng + ?Sized>(rng: &mut R) -> String {
    let mut name = String::with_capacity(7);
    for _ in 0..2 {
        name.push(char::from(b'a' + rng.random_range(0..26u8)));
    }
    name.push_str(&format!("{:05}", rng.random_range(0..100_000u32)));
    name
}

/// Draws a random `aa00000` mailname not in `used`, and a fake name.
pub fn generate_persona<R: Rng + ?Sized>(
    rng: &mut R,
    domain: &str,
    used_mailnames: &BTreeSet<String>,
    names: &[String],
) -> Result<Persona, PersonaError> {
    if names.is_empty() {
        return Err(PersonaError::NoNames);
    }
    for _ in 0..MAX_PERSONA_ATTEMPTS {
        let mailname = draw_mailname(rng);
        if used_mailnames.contains(&mailname) {
            continue;
        }
        let fake_name = names[rng.random_range(0..names.len())].clone();
        return Ok(Persona {
            mailname,
            fake_name,
            domain: domain.to_owned(),
        });
    }
    Err(PersonaError::Exhausted(MAX_PERSONA_ATTEMPTS))
}
