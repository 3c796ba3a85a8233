use super::{PairSource, PromptReplyPair};
use crate::archive::{ArchivedConversation, Direction};
use crate::responders::{Role, Turn};

/// A conversation with every message tagged scammer or baiter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleTagged {
    pub id: String,
    pub turns: Vec<Turn>,
}

impl RoleTagged {
    pub fn from_archived(conv: &ArchivedConversation) -> Self {
        RoleTagged {
            id: conv.id.clone(),
            turns: conv
                .messages
                .iter()
                .map(|m| match m.direction {
                    Direction::Solicitation | Direction::Inbound => Turn::scammer(m.body.clone()),
                    Direction::Outbound => Turn::baiter(m.body.clone()),
                })
                .collect(),
        }
    }
}

/// One pair per baiter message that follows at least one scammer message.
/// The prompt joins all scammer messages since the previous baiter message
/// with blank lines.
pub fn extract_bait_pairs(conversations: &[RoleTagged]) -> Vec<PromptReplyPair> {
    let mut out = Vec::new();
    for conv in conversations {
        let mut pending: Vec<&str> = Vec::new();
        for turn in &conv.turns {
            let text = turn.text.trim();
            match turn.role {
                Role::Scammer => {
                    if !text.is_empty() {
                        pending.push(text);
                    }
                }
                Role::Baiter => {
                    if !pending.is_empty() && !text.is_empty() {
                        out.push(PromptReplyPair {
                            prompt: pending.join("\n\n"),
                            reply: text.to_owned(),
                            source: PairSource::ScamBaiting,
                            conversation_id: conv.id.clone(),
                        });
                    }
                    pending.clear();
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(roles: &str) -> RoleTagged {
        RoleTagged {
            id: "c".into(),
            turns: roles
                .chars()
                .enumerate()
                .map(|(i, r)| match r {
                    'S' => Turn::scammer(format!("s{i}")),
                    _ => Turn::baiter(format!("b{i}")),
                })
                .collect(),
        }
    }

    #[test]
    fn role_patterns() {
        assert_eq!(extract_bait_pairs(&[conv("SBSB")]).len(), 2);
        let merged = extract_bait_pairs(&[conv("SSB")]);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].prompt, "s0\n\ns1");
        assert_eq!(merged[0].reply, "b2");
        assert!(extract_bait_pairs(&[conv("BS")]).is_empty());
        assert_eq!(extract_bait_pairs(&[conv("SBBSB")]).len(), 2);
    }
}
