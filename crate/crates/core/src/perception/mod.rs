//! Softmax regression from feature vectors to concept labels, and the
//! synthetic data it learns from.

mod dataset;

pub use dataset::{
    eval_concept_accuracy, generate_dataset, load_dataset, save_dataset, sequence_accuracy, Dataset,
    DatasetError, DatasetSpec, Example,
};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::logic::LabelId;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum PerceptionError {
    #[error("feature vector has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("label {label} is outside 0..{classes}")]
    Label { label: LabelId, classes: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite loss {loss} (max |logit| {max_logit}, max |weight| {max_weight})")]
    NonFinite { loss: f64, max_logit: f64, max_weight: f64 },
    #[error("label {0} never occurs in the validation set")]
    Uncovered(LabelId),
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&z| (z - top).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Multinomial logistic regression with row-major weights, one row per class.
#[derive(Clone, Debug, PartialEq)]
pub struct PerceptionModel {
    classes: usize,
    dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Gradient of the mean cross-entropy, laid out like the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl PerceptionModel {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        assert!(classes > 0 && dim > 0, "model needs classes and features");
        PerceptionModel {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        }
    }

    /// Weights drawn from N(0, `scale`²), zero bias.
    pub fn random<R: Rng + ?Sized>(classes: usize, dim: usize, scale: f64, rng: &mut R) -> Self {
        let mut model = Self::zeros(classes, dim);
        let normal = Normal::new(0.0, scale).expect("finite scale");
        for w in &mut model.weights {
            *w = normal.sample(rng);
        }
        model
    }

    pub fn from_parts(classes: usize, dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Self {
        assert_eq!(weights.len(), classes * dim, "weight shape");
        assert_eq!(bias.len(), classes, "bias shape");
        PerceptionModel {
            classes,
            dim,
            weights,
            bias,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Mutable access to all parameters, weights first.
    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    fn check(&self, x: &[f64]) -> Result<(), PerceptionError> {
        if x.len() != self.dim {
            return Err(PerceptionError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, PerceptionError> {
        self.check(x)?;
        Ok(self
            .weights
            .chunks_exact(self.dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, PerceptionError> {
        Ok(softmax(&self.logits(x)?))
    }

    pub fn classify(&self, x: &[f64]) -> Result<LabelId, PerceptionError> {
        Ok(argmax(&self.logits(x)?))
    }

    /// Mean cross-entropy over `batch` and its gradient.
    pub fn loss_and_gradient(&self, batch: &[(&[f64], LabelId)]) -> Result<(f64, Gradient), PerceptionError> {
        if batch.is_empty() {
            return Err(PerceptionError::EmptyBatch);
        }
        let mut grad = Gradient {
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.classes],
        };
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for &(x, label) in batch {
            if label >= self.classes {
                return Err(PerceptionError::Label {
                    label,
                    classes: self.classes,
                });
            }
            let logits = self.logits(x)?;
            let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_total = logits.iter().map(|z| (z - top).exp()).sum::<f64>().ln() + top;
            loss += log_total - logits[label];
            for (k, z) in logits.iter().enumerate() {
                let delta = ((z - log_total).exp() - f64::from(k == label)) * scale;
                grad.bias[k] += delta;
                for (g, v) in grad.weights[k * self.dim..(k + 1) * self.dim].iter_mut().zip(x) {
                    *g += delta * v;
                }
            }
        }
        Ok((loss * scale, grad))
    }

    /// One gradient-descent step on the mean cross-entropy of `batch`;
    /// returns the loss before the step.
    pub fn train_step(&mut self, batch: &[(&[f64], LabelId)], learning_rate: f64) -> Result<f64, PerceptionError> {
        let (loss, grad) = self.loss_and_gradient(batch)?;
        if !loss.is_finite() {
            let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let max_logit = batch
                .iter()
                .filter_map(|(x, _)| self.logits(x).ok())
                .map(|l| max_abs(&l))
                .fold(0.0, f64::max);
            return Err(PerceptionError::NonFinite {
                loss,
                max_logit,
                max_weight: max_abs(&self.weights),
            });
        }
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            *w -= learning_rate * g;
        }
        for (b, g) in self.bias.iter_mut().zip(&grad.bias) {
            *b -= learning_rate * g;
        }
        Ok(loss)
    }
}
