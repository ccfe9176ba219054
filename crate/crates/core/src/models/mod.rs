//! The three text classifiers.
//!
//! All predictors return the probability of class 1 (clickbait).

pub mod forest;
pub mod logistic;
pub mod mlp;

pub use forest::{ForestConfig, ForestModel};
pub use logistic::{LogisticConfig, LogisticModel};
pub use mlp::{AdamConfig, MlpConfig, MlpModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Balanced weights `w_c = n / (2 * n_c)`.
pub fn balanced_class_weights(labels: &[u8]) -> Result<(f64, f64)> {
    let n1 = labels.iter().filter(|&&y| y == 1).count();
    let n = labels.len();
    let n0 = n - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::invalid(
            "balanced class weights need both classes present",
        ));
    }
    let n = n as f64;
    Ok((n / (2.0 * n0 as f64), n / (2.0 * n1 as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum ClassWeight {
    Balanced,
    Uniform,
    Explicit { w0: f64, w1: f64 },
}

impl ClassWeight {
    pub fn resolve(self, labels: &[u8]) -> Result<(f64, f64)> {
        match self {
            ClassWeight::Balanced => balanced_class_weights(labels),
            ClassWeight::Uniform => Ok((1.0, 1.0)),
            ClassWeight::Explicit { w0, w1 } => {
                if w0 > 0.0 && w1 > 0.0 {
                    Ok((w0, w1))
                } else {
                    Err(Error::invalid("class weights must be positive"))
                }
            }
        }
    }
}

pub(crate) fn check_xy(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::invalid(format!("labels must be 0 or 1, got {bad}")));
    }
    let dim = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: r.len(),
        });
    }
    Ok(dim)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
