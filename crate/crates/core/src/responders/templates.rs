use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::{Rng, RngCore};
use regex::Regex;
use thiserror::Error;

use super::category::ScamCategory;
use crate::orchestrator::Persona;

pub const FAKE_NAME_PLACEHOLDER: &str = "{FAKE_NAME}";
pub const MIN_TEMPLATES_PER_CATEGORY: usize = 3;
const BUNDLED_POOL: &str = include_str!("../../data/templates.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("category {category} has {count} templates, need at least {MIN_TEMPLATES_PER_CATEGORY}")]
    TooFew { category: ScamCategory, count: usize },
    #[error("template in {category} looks like it carries contact details: {snippet}")]
    Identifying { category: ScamCategory, snippet: String },
    #[error("no templates for {0}")]
    PoolExhausted(ScamCategory),
}

/// Pre-written replies per category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplatePool {
    templates: BTreeMap<ScamCategory, Vec<String>>,
}

fn identifying() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)@|https?://|www\.|\+?\d[\d\s-]{5,}\d").expect("valid regex")
    })
}

impl TemplatePool {
    /// Parses `[category]` sections with templates separated by `---` lines.
    /// Enforces the minimum pool size and the no-contact-details rule.
    pub fn parse(text: &str) -> Result<Self, PoolError> {
        let pool = Self::parse_unchecked(text)?;
        pool.validate()?;
        Ok(pool)
    }

    /// Parses without the minimum-size check (the content check still applies).
    pub fn parse_unchecked(text: &str) -> Result<Self, PoolError> {
        let mut templates: BTreeMap<ScamCategory, Vec<String>> = BTreeMap::new();
        let mut current: Option<ScamCategory> = None;
        let mut buf: Vec<&str> = Vec::new();

        fn flush(
            templates: &mut BTreeMap<ScamCategory, Vec<String>>,
            current: Option<ScamCategory>,
            buf: &mut Vec<&str>,
        ) {
            let t = buf.join("\n").trim().to_owned();
            buf.clear();
            if let (Some(c), false) = (current, t.is_empty()) {
                templates.entry(c).or_default().push(t);
            }
        }

        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.starts_with('[') && trimmed.ends_with(']') {
                flush(&mut templates, current, &mut buf);
                let name = &trimmed[1..trimmed.len() - 1];
                current = Some(ScamCategory::parse(name).ok_or_else(|| PoolError::Syntax {
                    line: i + 1,
                    reason: format!("unknown category `{name}`"),
                })?);
            } else if trimmed == "---" {
                flush(&mut templates, current, &mut buf);
            } else if current.is_none() {
                if !trimmed.is_empty() && !trimmed.starts_with('#') {
                    return Err(PoolError::Syntax {
                        line: i + 1,
                        reason: "text before the first [category] header".into(),
                    });
                }
            } else {
                buf.push(line);
            }
        }
        flush(&mut templates, current, &mut buf);
        let pool = TemplatePool { templates };
        for (c, list) in &pool.templates {
            for t in list {
                if let Some(m) = identifying().find(&t.replace(FAKE_NAME_PLACEHOLDER, "")) {
                    return Err(PoolError::Identifying {
                        category: *c,
                        snippet: m.as_str().to_owned(),
                    });
                }
            }
        }
        Ok(pool)
    }

    pub fn validate(&self) -> Result<(), PoolError> {
        for c in ScamCategory::ALL {
            let count = self.templates.get(&c).map_or(0, Vec::len);
            if count < MIN_TEMPLATES_PER_CATEGORY {
                return Err(PoolError::TooFew { category: c, count });
            }
        }
        Ok(())
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_POOL).expect("bundled template pool is valid")
    }

    pub fn get(&self, category: ScamCategory) -> &[String] {
        self.templates.get(&category).map_or(&[], Vec::as_slice)
    }

    pub fn from_map(templates: BTreeMap<ScamCategory, Vec<String>>) -> Self {
        TemplatePool { templates }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateDraw {
    pub text: String,
    pub index: usize,
}

/// Uniform pick from the category's pool with `{FAKE_NAME}` substituted.
///
/// With `no_immediate_repeat` and more than one template, `last_used` is
/// excluded and the draw is uniform over the rest.
pub fn compose_template_reply(
    category: ScamCategory,
    rng: &mut dyn RngCore,
    pool: &TemplatePool,
    persona: &Persona,
    last_used: Option<usize>,
    no_immediate_repeat: bool,
) -> Result<TemplateDraw, PoolError> {
    let templates = pool.get(category);
    if templates.is_empty() {
        return Err(PoolError::PoolExhausted(category));
    }
    let n = templates.len();
    let index = match last_used {
        Some(last) if no_immediate_repeat && n > 1 && last < n => {
            let k = rng.random_range(0..n - 1);
            if k >= last {
                k + 1
            } else {
                k
            }
        }
        _ => rng.random_range(0..n),
    };
    Ok(TemplateDraw {
        text: templates[index].replace(FAKE_NAME_PLACEHOLDER, &persona.fake_name),
        index,
    })
}
