//! Loss functions, their gradients and optimal constant predictions.
//!
//! Pseudo-responses are the raw gradient of the loss with respect to the
//! current raw score; the boosting update subtracts the fitted tree.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Clamp applied to class frequencies before taking log-odds.
pub const PROB_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `½ (F − y)²`
    Mse,
    /// `log(1 + e^F) − y F` with `y ∈ {0, 1}` and `F` a logit.
    BinaryLogloss,
    /// `logsumexp(F) − F_y` over `classes` raw scores.
    MulticlassSoftmax { classes: usize },
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| libm::exp(s - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl Loss {
    /// Number of raw scores per example.
    pub fn outputs(&self) -> usize {
        match self {
            Loss::MulticlassSoftmax { classes } => *classes,
            _ => 1,
        }
    }

    /// `argmin_ρ Σ L(ρ, y)`. Labels are reals for mse, 0/1 for binary and
    /// class indices for multiclass.
    pub fn initial_prediction(&self, labels: &[f64]) -> Vec<f64> {
        if labels.is_empty() {
            return vec![0.0; self.outputs()];
        }
        let n = labels.len() as f64;
        match self {
            Loss::Mse => vec![labels.iter().sum::<f64>() / n],
            Loss::BinaryLogloss => {
                let p = labels.iter().filter(|&&y| y > 0.5).count() as f64 / n;
                let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                vec![libm::log(p / (1.0 - p))]
            }
            Loss::MulticlassSoftmax { classes } => {
                let mut counts = vec![0usize; *classes];
                for &y in labels {
                    counts[y as usize] += 1;
                }
                let logs: Vec<f64> = counts
                    .iter()
                    .map(|&c| libm::log((c as f64 / n).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)))
                    .collect();
                let mean = logs.iter().sum::<f64>() / logs.len() as f64;
                logs.into_iter().map(|l| l - mean).collect()
            }
        }
    }

    /// Loss of raw scores `scores` (length [`Loss::outputs`]) for label `y`.
    pub fn value(&self, scores: &[f64], y: f64) -> f64 {
        match self {
            Loss::Mse => 0.5 * (scores[0] - y) * (scores[0] - y),
            Loss::BinaryLogloss => softplus(scores[0]) - y * scores[0],
            Loss::MulticlassSoftmax { .. } => {
                let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + libm::log(scores.iter().map(|&s| libm::exp(s - max)).sum());
                lse - scores[y as usize]
            }
        }
    }

    /// Gradient of [`Loss::value`] with respect to each raw score.
    pub fn gradient(&self, scores: &[f64], y: f64, out: &mut [f64]) {
        match self {
            Loss::Mse => out[0] = scores[0] - y,
            Loss::BinaryLogloss => out[0] = sigmoid(scores[0]) - y,
            Loss::MulticlassSoftmax { .. } => {
                let p = softmax(scores);
                for (k, (o, pk)) in out.iter_mut().zip(p).enumerate() {
                    *o = pk - if k == y as usize { 1.0 } else { 0.0 };
                }
            }
        }
    }

    /// Scalar pseudo-response for single-output losses.
    pub fn pseudo_response(&self, score: f64, y: f64) -> f64 {
        let mut g = [0.0];
        self.gradient(&[score], y, &mut g);
        g[0]
    }

    /// Maps raw scores to the reported prediction: identity for mse,
    /// probability of the positive class for binary, class probabilities for
    /// multiclass.
    pub fn transform(&self, scores: &[f64]) -> Vec<f64> {
        match self {
            Loss::Mse => scores.to_vec(),
            Loss::BinaryLogloss => vec![sigmoid(scores[0])],
            Loss::MulticlassSoftmax { .. } => softmax(scores),
        }
    }
}
