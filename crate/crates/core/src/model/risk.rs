// SPDX-License-Identifier: Apache-2.0

//! Logistic and cross-entropy risks, computed with log-sum-exp and log1p.

use crate::error::{Error, Result};
use crate::model::dataset::{sign_of_class, LabeledDataset};
use crate::model::mlp::{MlpModel, EXP_CLAMP};

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    let x = x.clamp(-EXP_CLAMP, EXP_CLAMP);
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| v - lse).collect()
}

/// `(1/N) sum log(1 + exp(-gamma_n f(h_n)))` over a binary dataset
/// (class 0 is `+1`, class 1 is `-1`).
pub fn logistic_risk<F>(dataset: &LabeledDataset, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut total = 0.0;
    for (h, &y) in dataset.iter() {
        total += softplus(-sign_of_class(y)? * f(h)?);
    }
    Ok(total / dataset.len() as f64)
}

/// Logistic risk from precomputed logit values and `+1/-1` labels.
pub fn logistic_risk_values(values: &[f64], signs: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if values.len() != signs.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            actual: signs.len(),
            context: "labels",
        });
    }
    let s: f64 = values.iter().zip(signs).map(|(f, g)| softplus(-g * f)).sum();
    Ok(s / values.len() as f64)
}

/// `-(1/N) sum log p(gamma_n | h_n)`.
pub fn cross_entropy_risk(model: &MlpModel, dataset: &LabeledDataset) -> Result<f64> {
    weighted_cross_entropy_risk(model, dataset, None)
}

/// Cross-entropy with per-sample weights `w_n` (a pmf); `None` means
/// uniform. Returns `sum w_n loss_n`.
pub fn weighted_cross_entropy_risk(
    model: &MlpModel,
    dataset: &LabeledDataset,
    weights: Option<&[f64]>,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let n = dataset.len() as f64;
    let m = model.num_classes();
    let mut total = 0.0;
    for (idx, (h, &y)) in dataset.iter().enumerate() {
        if y >= m {
            return Err(Error::OutOfRange(format!("label {y} with {m} outputs")));
        }
        let z = model.outputs(h)?;
        let loss = log_sum_exp(&z) - z[y];
        total += weights.map_or(1.0 / n, |w| w[idx]) * loss;
    }
    Ok(total)
}
