use std::fmt;

use serde::{Deserialize, Serialize};

/// Coarse scam format driving template selection. The declaration order is
/// also the tie-break order for classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScamCategory {
    Transactional,
    NonTransactional,
    Romance,
    Lottery,
    Other,
}

impl ScamCategory {
    pub const ALL: [ScamCategory; 5] = [
        ScamCategory::Transactional,
        ScamCategory::NonTransactional,
        ScamCategory::Romance,
        ScamCategory::Lottery,
        ScamCategory::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            ScamCategory::Transactional => "Transactional",
            ScamCategory::NonTransactional => "Non-Transactional",
            ScamCategory::Romance => "Romance",
            ScamCategory::Lottery => "Lottery",
            ScamCategory::Other => "Other",
        }
    }

    /// Accepts the display label, snake case, or any spelling that differs
    /// only in case, `-`, `_` and spaces.
    pub fn parse(raw: &str) -> Option<ScamCategory> {
        let key: String = raw
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        Some(match key.as_str() {
            "transactional" => ScamCategory::Transactional,
            "nontransactional" => ScamCategory::NonTransactional,
            "romance" => ScamCategory::Romance,
            "lottery" => ScamCategory::Lottery,
            "other" => ScamCategory::Other,
            _ => return None,
        })
    }
}

impl fmt::Display for ScamCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
