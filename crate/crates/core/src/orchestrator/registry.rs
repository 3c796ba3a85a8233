use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::responders::ResponderKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponderDescriptor {
    pub id: String,
    pub kind: ResponderKind,
    pub usage_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

impl ResponderDescriptor {
    pub fn new(id: impl Into<String>, kind: ResponderKind, endpoint: Option<String>) -> Self {
        ResponderDescriptor {
            id: id.into(),
            kind,
            usage_count: 0,
            endpoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no responders registered")]
pub struct NoResponders;

/// Index of the least-used responder; ties go to the earliest registered.
pub fn least_used(registry: &[ResponderDescriptor]) -> Result<usize, NoResponders> {
    registry
        .iter()
        .enumerate()
        .min_by_key(|(i, d)| (d.usage_count, *i))
        .map(|(i, _)| i)
        .ok_or(NoResponders)
}

/// Picks the least-used responder and counts the assignment.
pub fn assign_responder(registry: &mut [ResponderDescriptor]) -> Result<String, NoResponders> {
    let i = least_used(registry)?;
    registry[i].usage_count += 1;
    Ok(registry[i].id.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> Vec<ResponderDescriptor> {
        ["classifier-template", "generator-a", "generator-b"]
            .into_iter()
            .map(|id| ResponderDescriptor::new(id, ResponderKind::ClassifierTemplate, None))
            .collect()
    }

    #[test]
    fn first_registered_wins_ties() {
        let mut r = three();
        assert_eq!(assign_responder(&mut r).unwrap(), "classifier-template");
    }

    #[test]
    fn seven_assignments() {
        let mut r = three();
        for _ in 0..7 {
            assign_responder(&mut r).unwrap();
        }
        let counts: Vec<u64> = r.iter().map(|d| d.usage_count).collect();
        assert_eq!(counts, vec![3, 2, 2]);
    }

    #[test]
    fn empty_registry() {
        assert_eq!(assign_responder(&mut []), Err(NoResponders));
    }
}
