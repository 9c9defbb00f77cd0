//! One-vs-rest linear classifier over query embeddings.
//!
//! Each class gets an L2-regularized logistic model trained by SGD over a
//! seeded shuffle, so a given seed always yields the same weights.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifyError, FewShotExample};
use crate::provider::Embedder;

pub const MIN_EXAMPLES_PER_CLASS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { epochs: 200, learning_rate: 0.5, l2: 1e-4, seed: 17 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub objective: String,
    pub embedder: String,
    pub dim: usize,
    pub options: TrainOptions,
    pub weights: BTreeMap<String, Vec<f64>>,
    pub bias: BTreeMap<String, f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn train_linear(
    examples: &[FewShotExample],
    provider: &dyn Embedder,
    options: TrainOptions,
) -> Result<LinearClassifier, ClassifyError> {
    let mut per_class: BTreeMap<&str, usize> = BTreeMap::new();
    for e in examples {
        *per_class.entry(e.label.as_str()).or_default() += 1;
    }
    if per_class.len() < 2 {
        return Err(ClassifyError::InsufficientData(format!(
            "need at least 2 classes, got {}",
            per_class.len()
        )));
    }
    if let Some((label, n)) = per_class.iter().find(|(_, &n)| n < MIN_EXAMPLES_PER_CLASS) {
        return Err(ClassifyError::InsufficientData(format!(
            "class {label:?} has {n} examples, need {MIN_EXAMPLES_PER_CLASS}"
        )));
    }
    let texts: Vec<String> = examples.iter().map(|e| e.query.clone()).collect();
    let x: Vec<Vec<f64>> = provider.embed(&texts)?.into_iter().map(|v| v.0).collect();
    let dim = x[0].len();

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut weights = BTreeMap::new();
    let mut bias = BTreeMap::new();
    for &class in per_class.keys() {
        let y: Vec<f64> = examples.iter().map(|e| if e.label == class { 1.0 } else { 0.0 }).collect();
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        for _ in 0..options.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let z: f64 = w.iter().zip(&x[i]).map(|(a, b)| a * b).sum::<f64>() + b;
                let g = sigmoid(z) - y[i];
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj -= options.learning_rate * (g * xj + options.l2 * *wj);
                }
                b -= options.learning_rate * g;
            }
        }
        weights.insert(class.to_string(), w);
        bias.insert(class.to_string(), b);
    }
    Ok(LinearClassifier {
        objective: "one-vs-rest l2-regularized logistic regression (sgd)".into(),
        embedder: provider.fingerprint(),
        dim,
        options,
        weights,
        bias,
    })
}

impl LinearClassifier {
    pub fn scores(&self, embedding: &[f64]) -> BTreeMap<&str, f64> {
        self.weights
            .iter()
            .map(|(label, w)| {
                let z: f64 = w.iter().zip(embedding).map(|(a, b)| a * b).sum::<f64>() + self.bias[label];
                (label.as_str(), z)
            })
            .collect()
    }

    /// Highest-scoring class; ties go to the lexicographically smallest label.
    pub fn predict_embedding(&self, embedding: &[f64]) -> &str {
        let mut best: Option<(&str, f64)> = None;
        for (label, s) in self.scores(embedding) {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((label, s));
            }
        }
        best.expect("classifier has classes").0
    }

    pub fn predict(&self, query: &str, provider: &dyn Embedder) -> Result<String, ClassifyError> {
        if provider.fingerprint() != self.embedder {
            return Err(ClassifyError::EmbedderMismatch {
                trained: self.embedder.clone(),
                given: provider.fingerprint(),
            });
        }
        let v = provider.embed(&[query.to_string()])?;
        Ok(self.predict_embedding(&v[0].0).to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("classifier serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ClassifyError> {
        serde_json::from_str(s).map_err(|e| ClassifyError::BadModel(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifyError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ClassifyError::BadModel(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }
}
