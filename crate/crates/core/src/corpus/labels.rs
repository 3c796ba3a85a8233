use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::responders::ScamCategory;

/// The eleven fine-grained solicitation classes used for labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineLabel {
    Business,
    Tragedy,
    Cargo,
    Investment,
    Romance,
    Job,
    Lottery,
    Donation,
    Sales,
    Loans,
    Other,
}

impl FineLabel {
    pub const ALL: [FineLabel; 11] = [
        FineLabel::Business,
        FineLabel::Tragedy,
        FineLabel::Cargo,
        FineLabel::Investment,
        FineLabel::Romance,
        FineLabel::Job,
        FineLabel::Lottery,
        FineLabel::Donation,
        FineLabel::Sales,
        FineLabel::Loans,
        FineLabel::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FineLabel::Business => "Business",
            FineLabel::Tragedy => "Tragedy",
            FineLabel::Cargo => "Cargo",
            FineLabel::Investment => "Investment",
            FineLabel::Romance => "Romance",
            FineLabel::Job => "Job",
            FineLabel::Lottery => "Lottery",
            FineLabel::Donation => "Donation",
            FineLabel::Sales => "Sales",
            FineLabel::Loans => "Loans",
            FineLabel::Other => "Other",
        }
    }
}

impl fmt::Display for FineLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown fine label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for FineLabel {
    type Err = UnknownLabel;

    /// Case-insensitive; also accepts the gerund spellings found in some
    /// label files (`Saling`, `Loaning`) and a few plurals.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "business" => FineLabel::Business,
            "tragedy" => FineLabel::Tragedy,
            "cargo" => FineLabel::Cargo,
            "investment" | "investments" => FineLabel::Investment,
            "romance" => FineLabel::Romance,
            "job" | "jobs" => FineLabel::Job,
            "lottery" => FineLabel::Lottery,
            "donation" | "donations" => FineLabel::Donation,
            "sales" | "sale" | "saling" | "selling" => FineLabel::Sales,
            "loans" | "loan" | "loaning" => FineLabel::Loans,
            "other" | "others" => FineLabel::Other,
            _ => return Err(UnknownLabel(s.trim().to_owned())),
        })
    }
}

/// Total map from fine labels to the five coarse categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    map: BTreeMap<FineLabel, ScamCategory>,
}

impl Default for LabelMap {
    fn default() -> Self {
        use FineLabel::*;
        use ScamCategory as C;
        let map = FineLabel::ALL
            .into_iter()
            .map(|f| {
                let c = match f {
                    Business | Investment | Sales | Loans | Job | Cargo => C::Transactional,
                    Tragedy | Donation => C::NonTransactional,
                    Romance => C::Romance,
                    Lottery => C::Lottery,
                    Other => C::Other,
                };
                (f, c)
            })
            .collect();
        LabelMap { map }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelMapError {
    #[error("label map has no entry for {0}")]
    Missing(FineLabel),
    #[error("{0} must map to itself")]
    FixedClassMoved(FineLabel),
}

impl LabelMap {
    /// A custom map. Romance, Lottery and Other must keep their own class.
    pub fn new(map: BTreeMap<FineLabel, ScamCategory>) -> Result<Self, LabelMapError> {
        for f in FineLabel::ALL {
            let Some(c) = map.get(&f) else {
                return Err(LabelMapError::Missing(f));
            };
            let fixed = match f {
                FineLabel::Romance => Some(ScamCategory::Romance),
                FineLabel::Lottery => Some(ScamCategory::Lottery),
                FineLabel::Other => Some(ScamCategory::Other),
                _ => None,
            };
            if fixed.is_some_and(|want| want != *c) {
                return Err(LabelMapError::FixedClassMoved(f));
            }
        }
        Ok(LabelMap { map })
    }

    pub fn coarsen(&self, fine: FineLabel) -> ScamCategory {
        self.map[&fine]
    }
}

pub fn coarsen_labels(fine: FineLabel) -> ScamCategory {
    LabelMap::default().coarsen(fine)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarsenedLabels {
    pub rows: Vec<(String, ScamCategory)>,
    /// `(line number, reason)` for rows that could not be mapped.
    pub skipped: Vec<(usize, String)>,
}

/// Maps a `message_id \t fine_label` TSV to coarse labels.
pub fn coarsen_tsv(text: &str, map: &LabelMap) -> CoarsenedLabels {
    let mut out = CoarsenedLabels {
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((id, label)) = line.split_once('\t') else {
            out.skipped.push((i + 1, "expected two tab-separated columns".into()));
            continue;
        };
        if i == 0 && matches!(label.trim().to_ascii_lowercase().as_str(), "label" | "fine_label") {
            continue;
        }
        match label.parse::<FineLabel>() {
            Ok(f) => out.rows.push((id.trim().to_owned(), map.coarsen(f))),
            Err(e) => out.skipped.push((i + 1, e.to_string())),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapping_is_total_and_surjective() {
        let image: std::collections::BTreeSet<_> = FineLabel::ALL.into_iter().map(coarsen_labels).collect();
        assert_eq!(image.len(), 5);
        assert_eq!(coarsen_labels(FineLabel::Lottery), ScamCategory::Lottery);
        assert_eq!(coarsen_labels(FineLabel::Romance), ScamCategory::Romance);
        assert_eq!(coarsen_labels(FineLabel::Other), ScamCategory::Other);
        assert_eq!(coarsen_labels(FineLabel::Business), ScamCategory::Transactional);
        assert_eq!(coarsen_labels(FineLabel::Tragedy), ScamCategory::NonTransactional);
    }

    #[test]
    fn aliases() {
        assert_eq!("Saling".parse::<FineLabel>().unwrap(), FineLabel::Sales);
        assert_eq!("loaning".parse::<FineLabel>().unwrap(), FineLabel::Loans);
        assert!("Phishing".parse::<FineLabel>().is_err());
    }

    #[test]
    fn custom_map_keeps_fixed_classes() {
        let mut m: BTreeMap<_, _> = FineLabel::ALL.into_iter().map(|f| (f, coarsen_labels(f))).collect();
        m.insert(FineLabel::Cargo, ScamCategory::Other);
        assert!(LabelMap::new(m.clone()).is_ok());
        m.insert(FineLabel::Lottery, ScamCategory::Transactional);
        assert_eq!(LabelMap::new(m.clone()), Err(LabelMapError::FixedClassMoved(FineLabel::Lottery)));
        m.remove(&FineLabel::Job);
        assert_eq!(LabelMap::new(m), Err(LabelMapError::Missing(FineLabel::Job)));
    }

    #[test]
    fn tsv() {
        let out = coarsen_tsv("id\tlabel\nm1\tBusiness\nm2\tSaling\nm3\tPhishing\nbroken\n", &LabelMap::default());
        assert_eq!(
            out.rows,
            vec![("m1".into(), ScamCategory::Transactional), ("m2".into(), ScamCategory::Transactional)]
        );
        assert_eq!(out.skipped.iter().map(|s| s.0).collect::<Vec<_>>(), vec![4, 5]);
    }
}
