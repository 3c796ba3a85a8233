//! Lexical baseline classifier over the five scam categories.
//!
//! Scores are additive per-token log weights with Laplace smoothing plus a
//! log prior (multinomial naive Bayes). Confidence is the softmax gap between
//! the two best categories.

use std::collections::BTreeMap;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::category::ScamCategory;

const N: usize = ScamCategory::ALL.len();
const SMOOTHING: f64 = 1.0;
const BUNDLED_CORPUS: &str = include_str!("../../data/labelled_solicitations.tsv");

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelledText {
    pub category: ScamCategory,
    pub text: String,
}

/// Parses `category \t text` lines. Blank lines and `#` comments are ignored.
pub fn parse_labelled_tsv(tsv: &str) -> Result<Vec<LabelledText>, String> {
    let mut out = Vec::new();
    for (i, line) in tsv.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| format!("line {}: expected `label<TAB>text`", i + 1))?;
        let category = ScamCategory::parse(label)
            .ok_or_else(|| format!("line {}: unknown category `{label}`", i + 1))?;
        out.push(LabelledText {
            category,
            text: text.replace("\\n", "\n"),
        });
    }
    Ok(out)
}

pub fn bundled_corpus() -> Vec<LabelledText> {
    parse_labelled_tsv(BUNDLED_CORPUS).expect("bundled corpus is well-formed")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub log_priors: [f64; N],
    pub token_weights: BTreeMap<String, [f64; N]>,
    pub version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub category: ScamCategory,
    pub confidence: f64,
    /// Set when an external classifier was configured but unavailable.
    pub degraded: bool,
}

impl BaselineModel {
    pub fn fit(examples: &[LabelledText]) -> Self {
        let mut doc_counts = [0usize; N];
        let mut token_counts: BTreeMap<String, [f64; N]> = BTreeMap::new();
        let mut totals = [0f64; N];
        for ex in examples {
            let c = ex.category.index();
            doc_counts[c] += 1;
            for tok in tokenize(&ex.text) {
                token_counts.entry(tok).or_insert([0.0; N])[c] += 1.0;
                totals[c] += 1.0;
            }
        }
        let vocab = token_counts.len() as f64;
        let docs: usize = doc_counts.iter().sum();
        let mut log_priors = [0f64; N];
        for c in 0..N {
            // Unseen categories keep a tiny prior so argmax stays total.
            log_priors[c] = ((doc_counts[c] as f64 + 1e-9) / (docs as f64 + 1e-9 * N as f64)).ln();
        }
        let token_weights = token_counts
            .into_iter()
            .map(|(tok, counts)| {
                let mut w = [0f64; N];
                for c in 0..N {
                    w[c] = ((counts[c] + SMOOTHING) / (totals[c] + SMOOTHING * vocab)).ln();
                }
                (tok, w)
            })
            .collect();
        let mut model = BaselineModel {
            log_priors,
            token_weights,
            version: String::new(),
        };
        model.version = model.digest();
        model
    }

    /// Trained on the corpus bundled with the crate.
    pub fn bundled() -> Self {
        Self::fit(&bundled_corpus())
    }

    /// SHA-256 over the exact bit patterns of every parameter.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for p in self.log_priors {
            h.update(p.to_bits().to_le_bytes());
        }
        for (tok, w) in &self.token_weights {
            h.update(tok.as_bytes());
            h.update([0u8]);
            for x in w {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        format!("baseline-{}", &hex::encode(h.finalize())[..16])
    }

    pub fn scores(&self, text: &str) -> [f64; N] {
        let mut scores = self.log_priors;
        for tok in tokenize(text) {
            if let Some(w) = self.token_weights.get(&tok) {
                for c in 0..N {
                    scores[c] += w[c];
                }
            }
        }
        scores
    }

    pub fn classify(&self, text: &str) -> Classification {
        if text.trim().is_empty() {
            return Classification {
                category: ScamCategory::Other,
                confidence: 0.0,
                degraded: false,
            };
        }
        let scores = self.scores(text);
        let mut order: Vec<usize> = (0..N).collect();
        // Stable sort keeps the declaration order among exact ties.
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let max = scores[order[0]];
        let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        let gap = (exp[order[0]] - exp[order[1]]) / z;
        Classification {
            category: ScamCategory::ALL[order[0]],
            confidence: gap.clamp(0.0, 1.0),
            degraded: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrainingError {
    #[error("category {0} has fewer than two examples")]
    TrainingDataIncomplete(ScamCategory),
    #[error("holdout fraction must be in (0, 1), got {0}")]
    BadHoldout(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Per-class precision/recall/f1/support plus accuracy and averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ClassRow>,
    pub accuracy: f64,
    pub total: usize,
    pub macro_avg: ClassRow,
    pub weighted_avg: ClassRow,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_predictions(pairs: &[(ScamCategory, ScamCategory)]) -> Self {
        let mut tp = [0usize; N];
        let mut predicted = [0usize; N];
        let mut support = [0usize; N];
        for &(truth, pred) in pairs {
            support[truth.index()] += 1;
            predicted[pred.index()] += 1;
            if truth == pred {
                tp[truth.index()] += 1;
            }
        }
        let rows: Vec<ClassRow> = ScamCategory::ALL
            .iter()
            .map(|c| {
                let i = c.index();
                let precision = ratio(tp[i], predicted[i]);
                let recall = ratio(tp[i], support[i]);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassRow {
                    label: c.label().to_owned(),
                    precision,
                    recall,
                    f1,
                    support: support[i],
                }
            })
            .collect();
        let total = pairs.len();
        let correct: usize = tp.iter().sum();
        let avg = |label: &str, weight: &dyn Fn(&ClassRow) -> f64| {
            let wsum: f64 = rows.iter().map(weight).sum();
            let mean = |f: &dyn Fn(&ClassRow) -> f64| {
                if wsum == 0.0 {
                    0.0
                } else {
                    rows.iter().map(|r| f(r) * weight(r)).sum::<f64>() / wsum
                }
            };
            ClassRow {
                label: label.to_owned(),
                precision: mean(&|r| r.precision),
                recall: mean(&|r| r.recall),
                f1: mean(&|r| r.f1),
                support: total,
            }
        };
        let macro_avg = avg("macro avg", &|_| 1.0);
        let weighted_avg = avg("weighted avg", &|r| r.support as f64);
        EvalReport {
            rows,
            accuracy: ratio(correct, total),
            total,
            macro_avg,
            weighted_avg,
        }
    }

    /// Text table with `precision recall f1-score support` columns.
    pub fn render(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .chain(["weighted avg".len()])
            .max()
            .unwrap_or(12);
        let mut out = format!(
            "{:>width$} {:>9} {:>9} {:>9} {:>9}\n\n",
            "", "precision", "recall", "f1-score", "support"
        );
        let row = |r: &ClassRow| {
            format!(
                "{:>width$} {:>9.4} {:>9.4} {:>9.4} {:>9}\n",
                r.label, r.precision, r.recall, r.f1, r.support
            )
        };
        for r in &self.rows {
            out.push_str(&row(r));
        }
        out.push('\n');
        out.push_str(&format!(
            "{:>width$} {:>9} {:>9} {:>9.4} {:>9}\n",
            "accuracy", "", "", self.accuracy, self.total
        ));
        out.push_str(&row(&self.macro_avg));
        out.push_str(&row(&self.weighted_avg));
        out
    }
}

/// Stratified split, fit on the training part, evaluate on the holdout.
pub fn train_baseline_classifier(
    corpus: &[LabelledText],
    split_seed: u64,
    holdout_fraction: f64,
) -> Result<(BaselineModel, EvalReport), TrainingError> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(TrainingError::BadHoldout(holdout_fraction.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for c in ScamCategory::ALL {
        let mut members: Vec<&LabelledText> = corpus.iter().filter(|e| e.category == c).collect();
        if members.len() < 2 {
            return Err(TrainingError::TrainingDataIncomplete(c));
        }
        members.shuffle(&mut rng);
        let k = ((members.len() as f64 * holdout_fraction).round() as usize).clamp(1, members.len() - 1);
        holdout.extend(members[..k].iter().map(|e| (*e).clone()));
        train.extend(members[k..].iter().map(|e| (*e).clone()));
    }
    let model = BaselineModel::fit(&train);
    let preds: Vec<(ScamCategory, ScamCategory)> = holdout
        .iter()
        .map(|e| (e.category, model.classify(&e.text).category))
        .collect();
    Ok((model, EvalReport::from_predictions(&preds)))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BridgeError {
    #[error("bridge unreachable: {0}")]
    Unavailable(String),
    #[error("bridge returned an invalid response: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub label: String,
    pub confidence: f64,
}

/// `POST {endpoint}/classify` with `{"text": ...}`.
pub trait ExternalClassifier: Send + Sync {
    fn classify(&self, text: &str) -> Result<ClassifyResponse, BridgeError>;
}

pub struct HttpClassifier {
    client: Client,
    endpoint: String,
}

impl HttpClassifier {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        HttpClassifier {
            client: Client::builder()
                .timeout(timeout)
                .build()
                .expect("http client configuration is static"),
            endpoint: endpoint.into().trim_end_matches('/').to_owned(),
        }
    }
}

impl ExternalClassifier for HttpClassifier {
    fn classify(&self, text: &str) -> Result<ClassifyResponse, BridgeError> {
        let resp = self
            .client
            .post(format!("{}/classify", self.endpoint))
            .json(&serde_json::json!({ "text": text }))
            .send()
            .map_err(|e| BridgeError::Unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(BridgeError::Unavailable(format!("status {}", resp.status())));
        }
        resp.json().map_err(|e| BridgeError::Invalid(e.to_string()))
    }
}

pub enum ClassifierModel {
    BaselineLexical(BaselineModel),
    ExternalBridge {
        client: Box<dyn ExternalClassifier>,
        fallback: BaselineModel,
    },
}

impl ClassifierModel {
    pub fn version(&self) -> &str {
        match self {
            ClassifierModel::BaselineLexical(m) => &m.version,
            ClassifierModel::ExternalBridge { fallback, .. } => &fallback.version,
        }
    }
}

/// Total: every input gets a category and a confidence in `[0, 1]`.
pub fn classify(body_text: &str, model: &ClassifierModel) -> Classification {
    match model {
        ClassifierModel::BaselineLexical(m) => m.classify(body_text),
        ClassifierModel::ExternalBridge { client, fallback } => {
            if body_text.trim().is_empty() {
                return fallback.classify(body_text);
            }
            let external = client.classify(body_text).and_then(|r| {
                let category = ScamCategory::parse(&r.label)
                    .ok_or_else(|| BridgeError::Invalid(format!("unknown label `{}`", r.label)))?;
                if !(0.0..=1.0).contains(&r.confidence) {
                    return Err(BridgeError::Invalid(format!("confidence {}", r.confidence)));
                }
                Ok(Classification {
                    category,
                    confidence: r.confidence,
                    degraded: false,
                })
            });
            external.unwrap_or_else(|e| {
                log::warn!("external classifier failed, using baseline: {e}");
                Classification {
                    degraded: true,
                    ..fallback.classify(body_text)
                }
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_corpus() -> Vec<LabelledText> {
        let vocab = [
            (ScamCategory::Transactional, ["contract", "invoice", "shipment", "partner"]),
            (ScamCategory::NonTransactional, ["orphan", "charity", "illness", "widow"]),
            (ScamCategory::Romance, ["darling", "lonely", "heart", "kisses"]),
            (ScamCategory::Lottery, ["jackpot", "raffle", "winner", "draw"]),
            (ScamCategory::Other, ["parcel", "password", "verify", "mailbox"]),
        ];
        let mut out = Vec::new();
        for (c, words) in vocab {
            for i in 0..words.len() {
                for j in 0..words.len() {
                    if i != j {
                        out.push(LabelledText {
                            category: c,
                            text: format!("{} {} {}", words[i], words[j], words[(i + j) % 4]),
                        });
                    }
                }
            }
        }
        out
    }

    #[test]
    fn separable_corpus_is_perfect() {
        let (_, report) = train_baseline_classifier(&toy_corpus(), 3, 0.25).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert!(report.rows.iter().all(|r| r.f1 == 1.0));
    }

    #[test]
    fn training_is_deterministic() {
        let (a, ra) = train_baseline_classifier(&toy_corpus(), 11, 0.3).unwrap();
        let (b, rb) = train_baseline_classifier(&toy_corpus(), 11, 0.3).unwrap();
        assert_eq!(a.version, b.version);
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn missing_category_is_incomplete() {
        let corpus: Vec<_> = toy_corpus()
            .into_iter()
            .filter(|e| e.category != ScamCategory::Romance)
            .collect();
        assert_eq!(
            train_baseline_classifier(&corpus, 1, 0.2).unwrap_err(),
            TrainingError::TrainingDataIncomplete(ScamCategory::Romance)
        );
    }

    #[test]
    fn empty_input_is_other_with_zero_confidence() {
        let m = BaselineModel::bundled();
        for text in ["", "   \n\t"] {
            let c = m.classify(text);
            assert_eq!(c.category, ScamCategory::Other);
            assert_eq!(c.confidence, 0.0);
        }
    }

    #[test]
    fn exact_ties_follow_declaration_order() {
        let m = BaselineModel {
            log_priors: [0.0; N],
            token_weights: BTreeMap::new(),
            version: "flat".into(),
        };
        let c = m.classify("anything at all");
        assert_eq!(c.category, ScamCategory::Transactional);
        assert_eq!(c.confidence, 0.0);
    }

    #[test]
    fn report_counts_match_hand_computation() {
        use ScamCategory::*;
        let pairs = [
            (Lottery, Lottery),
            (Lottery, Other),
            (Romance, Romance),
            (Other, Lottery),
            (Transactional, Transactional),
        ];
        let r = EvalReport::from_predictions(&pairs);
        let lottery = &r.rows[Lottery.index()];
        assert_eq!((lottery.precision, lottery.recall, lottery.support), (0.5, 0.5, 2));
        assert_eq!(r.accuracy, 0.6);
        // NonTransactional has no support and no predictions.
        assert_eq!(r.rows[NonTransactional.index()].f1, 0.0);
        assert!((r.macro_avg.precision - (0.5 + 1.0 + 0.0 + 1.0) / 5.0).abs() < 1e-12);
        assert!((r.weighted_avg.recall - 0.6).abs() < 1e-12);
    }

    struct DownBridge;

    impl ExternalClassifier for DownBridge {
        fn classify(&self, _: &str) -> Result<ClassifyResponse, BridgeError> {
            Err(BridgeError::Unavailable("timeout".into()))
        }
    }

    struct FixedBridge(&'static str, f64);

    impl ExternalClassifier for FixedBridge {
        fn classify(&self, _: &str) -> Result<ClassifyResponse, BridgeError> {
            Ok(ClassifyResponse { label: self.0.into(), confidence: self.1 })
        }
    }

    #[test]
    fn bridge_timeout_falls_back_to_baseline() {
        let fallback = BaselineModel::bundled();
        let expected = fallback.classify("You won the raffle draw jackpot");
        let model = ClassifierModel::ExternalBridge { client: Box::new(DownBridge), fallback };
        let c = classify("You won the raffle draw jackpot", &model);
        assert!(c.degraded);
        assert_eq!(c.category, expected.category);
    }

    #[test]
    fn bridge_labels_are_restricted() {
        let model = ClassifierModel::ExternalBridge {
            client: Box::new(FixedBridge("Romance", 0.93)),
            fallback: BaselineModel::bundled(),
        };
        let c = classify("hello", &model);
        assert_eq!((c.category, c.confidence, c.degraded), (ScamCategory::Romance, 0.93, false));
        let model = ClassifierModel::ExternalBridge {
            client: Box::new(FixedBridge("Phishing", 0.93)),
            fallback: BaselineModel::bundled(),
        };
        assert!(classify("hello", &model).degraded);
    }
}
