use serde::{Deserialize, Serialize};

use super::{check_xy, sigmoid, ClassWeight};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub l2_lambda: f64,
    /// Stop once the gradient's max-norm drops below this.
    pub gradient_tolerance: f64,
    pub class_weight: ClassWeight,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            learning_rate: 0.1,
            max_epochs: 2000,
            l2_lambda: 1e-4,
            gradient_tolerance: 1e-6,
            class_weight: ClassWeight::Balanced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub class_weights: (f64, f64),
    pub epochs_run: usize,
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            class_weights: (1.0, 1.0),
            epochs_run: 0,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: x.len(),
            });
        }
        Ok(sigmoid(self.logit(x)))
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

/// Class-weighted mean binary cross-entropy plus `l2/2 * |w|^2`.
pub fn weighted_loss(
    weights: &[f64],
    bias: f64,
    x: &[Vec<f64>],
    y: &[u8],
    class_weights: (f64, f64),
    l2: f64,
) -> f64 {
    let n = x.len() as f64;
    let data: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let z = weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + bias;
            // log(1 + e^z) - y z, computed without overflow
            let softplus = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            let cw = if label == 1 { class_weights.1 } else { class_weights.0 };
            cw * (softplus - label as f64 * z)
        })
        .sum::<f64>()
        / n;
    data + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Full-batch gradient descent with a fixed step from all-zero weights.
pub fn train_logistic(x: &[Vec<f64>], y: &[u8], cfg: &LogisticConfig) -> Result<LogisticModel> {
    let dim = check_xy(x, y)?;
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    let cw = cfg.class_weight.resolve(y)?;
    let n = x.len() as f64;
    let mut model = LogisticModel::zeros(dim);
    model.class_weights = cw;

    let mut grad = vec![0.0; dim];
    for epoch in 0..cfg.max_epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (row, &label) in x.iter().zip(y) {
            let p = sigmoid(model.logit(row));
            let w = if label == 1 { cw.1 } else { cw.0 };
            let r = w * (p - label as f64) / n;
            for (g, v) in grad.iter_mut().zip(row) {
                *g += r * v;
            }
            grad_b += r;
        }
        for (g, w) in grad.iter_mut().zip(&model.weights) {
            *g += cfg.l2_lambda * w;
        }
        let gmax = grad.iter().fold(grad_b.abs(), |m, g| m.max(g.abs()));
        if !gmax.is_finite() {
            return Err(Error::Diverged(format!("non-finite gradient at epoch {epoch}")));
        }
        model.epochs_run = epoch;
        if gmax < cfg.gradient_tolerance {
            break;
        }
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * g;
        }
        model.bias -= cfg.learning_rate * grad_b;
        model.epochs_run = epoch + 1;
    }
    let loss = weighted_loss(&model.weights, model.bias, x, y, cw, cfg.l2_lambda);
    if !loss.is_finite() {
        return Err(Error::Diverged(format!(
            "non-finite loss after epoch {}",
            model.epochs_run
        )));
    }
    Ok(model)
}
