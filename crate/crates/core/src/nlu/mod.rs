//! Intent classification and entity extraction.
//!
//! The classifier is TF-IDF nearest neighbour: every usable training
//! example becomes an L2-normalized sparse vector and an intent's score is
//! the best cosine between the query and any of its examples. Scores of
//! nonnegative vectors already lie in `[0, 1]`, so the best score is used
//! directly as confidence (an exact training utterance scores 1.0).

mod entities;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::project::ProjectConfig;
use crate::text;

pub use entities::{
    extract_entities, synonym_canonical, EntityExtractor, EntityMatch, ExtractorKind,
};

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NluError {
    #[error("intent {0:?} has no example with provenance human or approved")]
    UntrainableIntent(String),
    #[error("utterance has no tokens")]
    EmptyUtterance,
    #[error("entity {0:?} is not a gazetteer")]
    WrongEntityKind(String),
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
}

/// Sparse vector: `(term index, weight)` sorted by index.
pub type SparseVector = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleVector {
    pub intent: String,
    pub vector: SparseVector,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentModel {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
    examples: Vec<ExampleVector>,
    intents: Vec<String>,
    tau_oos: f64,
    top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedIntent {
    pub intent: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentPrediction {
    pub intent: Option<String>,
    pub confidence: f64,
    /// Descending by score, ties by intent name.
    pub ranked: Vec<RankedIntent>,
}

impl IntentPrediction {
    pub fn none() -> Self {
        Self {
            intent: None,
            confidence: 0.0,
            ranked: Vec::new(),
        }
    }

    pub fn score_of(&self, intent: &str) -> Option<f64> {
        self.ranked
            .iter()
            .find(|r| r.intent == intent)
            .map(|r| r.score)
    }
}

fn tf_idf(tokens: &[String], vocabulary: &BTreeMap<String, usize>, idf: &[f64]) -> SparseVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for t in tokens {
        if let Some(&i) = vocabulary.get(t) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    let mut v: SparseVector = counts.into_iter().map(|(i, tf)| (i, tf * idf[i])).collect();
    let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in &mut v {
            *w /= norm;
        }
    }
    v
}

fn dot(a: &SparseVector, b: &SparseVector) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Builds the classifier from every human or approved example.
pub fn train(config: &ProjectConfig) -> Result<IntentModel, NluError> {
    let mut docs: Vec<(&str, &str, Vec<String>)> = Vec::new();
    for intent in &config.intents {
        let before = docs.len();
        for ex in intent.examples.iter().filter(|e| e.provenance.is_usable()) {
            docs.push((&intent.name, &ex.text, text::normalize(&ex.text)));
        }
        if docs.len() == before {
            return Err(NluError::UntrainableIntent(intent.name.clone()));
        }
    }

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, _, tokens) in &docs {
        let mut seen: Vec<&str> = tokens.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = docs.len() as f64;
    let vocabulary: BTreeMap<String, usize> = df
        .keys()
        .enumerate()
        .map(|(i, t)| (t.to_string(), i))
        .collect();
    let idf: Vec<f64> = df
        .values()
        .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
        .collect();
    let examples = docs
        .iter()
        .map(|(intent, text, tokens)| ExampleVector {
            intent: intent.to_string(),
            vector: tf_idf(tokens, &vocabulary, &idf),
            text: text.to_string(),
        })
        .collect();
    Ok(IntentModel {
        vocabulary,
        idf,
        examples,
        intents: config.intents.iter().map(|i| i.name.clone()).collect(),
        tau_oos: config.thresholds.tau_oos,
        top_k: DEFAULT_TOP_K,
    })
}

impl IntentModel {
    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn examples(&self) -> &[ExampleVector] {
        &self.examples
    }

    pub fn intents(&self) -> &[String] {
        &self.intents
    }

    pub fn example_count(&self) -> usize {
        self.examples.len()
    }

    pub fn with_top_k(mut self, k: usize) -> Self {
        self.top_k = k.max(1);
        self
    }

    pub fn vectorize(&self, text: &str) -> SparseVector {
        tf_idf(&text::normalize(text), &self.vocabulary, &self.idf)
    }

    /// Best cosine per intent, for every intent in `allowed`.
    fn scores(&self, query: &SparseVector, allowed: &[&str]) -> Vec<RankedIntent> {
        let mut best: BTreeMap<&str, f64> = allowed.iter().map(|i| (*i, 0.0)).collect();
        for ex in &self.examples {
            if let Some(s) = best.get_mut(ex.intent.as_str()) {
                *s = s.max(dot(query, &ex.vector).clamp(0.0, 1.0));
            }
        }
        let mut ranked: Vec<RankedIntent> = best
            .into_iter()
            .map(|(intent, score)| RankedIntent {
                intent: intent.to_string(),
                score,
            })
            .collect();
        ranked.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.intent.cmp(&b.intent))
        });
        ranked
    }

    /// Nearest-neighbour classification. `intent` is `None` when the best
    /// score falls below `tau_oos`.
    pub fn classify(&self, text: &str) -> Result<IntentPrediction, NluError> {
        let tokens = text::normalize(text);
        if tokens.is_empty() {
            return Err(NluError::EmptyUtterance);
        }
        let query = tf_idf(&tokens, &self.vocabulary, &self.idf);
        let all: Vec<&str> = self.intents.iter().map(String::as_str).collect();
        let mut ranked = self.scores(&query, &all);
        ranked.truncate(self.top_k);
        let confidence = ranked.first().map_or(0.0, |r| r.score);
        let intent = ranked
            .first()
            .filter(|r| r.score >= self.tau_oos)
            .map(|r| r.intent.clone());
        Ok(IntentPrediction {
            intent,
            confidence,
            ranked,
        })
    }

    /// Classification restricted to `candidates`; the best candidate is
    /// chosen whenever it has any lexical overlap with the utterance.
    pub fn classify_among(
        &self,
        text: &str,
        candidates: &[String],
    ) -> Result<IntentPrediction, NluError> {
        let tokens = text::normalize(text);
        if tokens.is_empty() {
            return Err(NluError::EmptyUtterance);
        }
        let query = tf_idf(&tokens, &self.vocabulary, &self.idf);
        let allowed: Vec<&str> = candidates.iter().map(String::as_str).collect();
        let ranked = self.scores(&query, &allowed);
        let confidence = ranked.first().map_or(0.0, |r| r.score);
        let intent = ranked
            .first()
            .filter(|r| r.score > 0.0)
            .map(|r| r.intent.clone());
        Ok(IntentPrediction {
            intent,
            confidence,
            ranked,
        })
    }
}

/// Convenience wrapper around [`IntentModel::classify`].
/// Leave-one-out evaluation over usable examples. Examples that are the
/// only usable one of their intent are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LeaveOneOut {
    pub hits: usize,
    pub total: usize,
}

impl LeaveOneOut {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.hits as f64 / self.total as f64)
    }
}

pub fn leave_one_out(config: &ProjectConfig) -> Result<LeaveOneOut, NluError> {
    let mut report = LeaveOneOut::default();
    for (i, intent) in config.intents.iter().enumerate() {
        let usable: Vec<usize> = (0..intent.examples.len())
            .filter(|&j| intent.examples[j].provenance.is_usable())
            .collect();
        if usable.len() < 2 {
            continue;
        }
        for j in usable {
            let mut reduced = config.clone();
            let held_out = reduced.intents[i].examples.remove(j);
            let prediction = train(&reduced)?.classify(&held_out.text)?;
            report.total += 1;
            if prediction.intent.as_deref() == Some(intent.name.as_str()) {
                report.hits += 1;
            }
        }
    }
    Ok(report)
}

pub fn classify(model: &IntentModel, text: &str) -> Result<IntentPrediction, NluError> {
    model.classify(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::{IntentDef, Provenance, TrainingExample};
    use crate::sample;

    fn one_intent(examples: &[&str]) -> ProjectConfig {
        let mut cfg = sample::banking();
        cfg.forms.clear();
        let mut intent = IntentDef::new("greet");
        intent.response = Some("fallback".into());
        intent.examples = examples
            .iter()
            .map(|e| TrainingExample::human(*e))
            .collect();
        cfg.intents = vec![intent];
        cfg
    }

    #[test]
    fn single_example_model() {
        let model = train(&one_intent(&["hello"])).unwrap();
        assert_eq!(model.vocabulary().keys().collect::<Vec<_>>(), ["hello"]);
        assert_eq!(model.examples().len(), 1);
        let v = &model.examples()[0].vector;
        assert_eq!(v.len(), 1);
        assert!((v[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn idf_formula() {
        // N = 2; "a" in both docs, "b" in one.
        let model = train(&one_intent(&["a b", "a"])).unwrap();
        let idf = model.idf();
        let a = model.vocabulary()["a"];
        let b = model.vocabulary()["b"];
        assert!((idf[a] - 1.0).abs() < 1e-12);
        assert!((idf[b] - ((3.0f64 / 2.0).ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn only_usable_examples_train() {
        let mut cfg = sample::banking();
        let before = train(&cfg).unwrap().example_count();
        cfg.intents[0].examples.push(TrainingExample {
            text: "totally new words here".into(),
            locale: "en".into(),
            provenance: Provenance::Generated,
        });
        let model = train(&cfg).unwrap();
        assert_eq!(model.example_count(), before);
        assert!(!model.vocabulary().contains_key("totally"));
    }

    #[test]
    fn untrainable_intent() {
        let mut cfg = sample::banking();
        let cancel = cfg
            .intents
            .iter_mut()
            .find(|i| i.name == "cancel_account")
            .unwrap();
        for ex in &mut cancel.examples {
            ex.provenance = Provenance::Generated;
        }
        assert_eq!(
            train(&cfg),
            Err(NluError::UntrainableIntent("cancel_account".into()))
        );
    }

    #[test]
    fn empty_utterance() {
        let model = train(&sample::banking()).unwrap();
        assert_eq!(model.classify("?!"), Err(NluError::EmptyUtterance));
    }

    #[test]
    fn unknown_words_score_zero() {
        let model = train(&sample::banking()).unwrap();
        let p = model.classify("zzz qqq").unwrap();
        assert_eq!(p.confidence, 0.0);
        assert_eq!(p.intent, None);
        // ties broken by name
        let names: Vec<_> = p.ranked.iter().map(|r| r.intent.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }

    #[test]
    fn vectors_are_unit_norm() {
        let model = train(&sample::banking()).unwrap();
        for ex in model.examples() {
            let n: f64 = ex.vector.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12, "{}", ex.text);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = sample::banking();
        assert_eq!(train(&cfg).unwrap(), train(&cfg).unwrap());
    }
}
