// SPDX-License-Identifier: Apache-2.0

//! Empirical-risk minimization by plain mini-batch gradient descent.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::dataset::LabeledDataset;
use crate::model::mlp::{MlpArchitecture, MlpModel};
use crate::model::risk::weighted_cross_entropy_risk;
use crate::seed::{self, Phase};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingHyperparameters {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainingHyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// A trained model with the empirical risk recorded after every epoch.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: MlpModel,
    pub risk_trace: Vec<f64>,
}

pub fn train_erm(
    dataset: &LabeledDataset,
    arch: &MlpArchitecture,
    hyper: &TrainingHyperparameters,
) -> Result<TrainedModel> {
    train_weighted(dataset, arch, hyper, None)
}

/// Mini-batch gradient descent on the (optionally sample-weighted)
/// cross-entropy risk.
///
/// With weights `w` (a pmf over samples) the per-sample loss is multiplied
/// by `N w_n`, so uniform weights reproduce the unweighted run exactly.
/// Initialization and shuffling both derive from `hyper.seed`.
pub fn train_weighted(
    dataset: &LabeledDataset,
    arch: &MlpArchitecture,
    hyper: &TrainingHyperparameters,
    weights: Option<&[f64]>,
) -> Result<TrainedModel> {
    hyper.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if dataset.dim() != Some(arch.input_dim) {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim,
            actual: dataset.dim().unwrap_or(0),
            context: "training features vs architecture input",
        });
    }
    if dataset.num_classes > arch.num_classes() {
        return Err(Error::invalid(format!(
            "dataset has {} classes but model has {} outputs",
            dataset.num_classes,
            arch.num_classes()
        )));
    }
    let n = dataset.len();
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: w.len(),
                context: "sample weights",
            });
        }
    }

    let mut model = MlpModel::random(arch.clone(), seed::derive(hyper.seed, &[Phase::Init as u64]))?;
    let mut shuffle_rng = seed::rng(seed::derive(hyper.seed, &[Phase::Shuffle as u64]));
    let mut order: Vec<usize> = (0..n).collect();
    let mut grads = model.zero_gradients();
    let mut trace = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut shuffle_rng);
        for (b, batch) in order.chunks(hyper.batch_size).enumerate() {
            grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
            let mut batch_loss = 0.0;
            for &i in batch {
                let scale = weights.map_or(1.0, |w| w[i] * n as f64);
                let loss = model.accumulate_loss_gradient(
                    &dataset.features[i],
                    dataset.labels[i],
                    scale,
                    &mut grads,
                )?;
                batch_loss += scale * loss;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {epoch}, batch {b}"
                )));
            }
            model.apply_update(&grads, hyper.learning_rate / batch.len() as f64);
        }
        let risk = weighted_cross_entropy_risk(&model, dataset, weights)?;
        if !risk.is_finite() {
            return Err(Error::NonFinite(format!("empirical risk after epoch {epoch}")));
        }
        trace.push(risk);
    }
    Ok(TrainedModel {
        model,
        risk_trace: trace,
    })
}

/// Max relative error between backprop gradients of the empirical
/// cross-entropy risk and central finite differences with step `eps`.
pub fn gradient_check(model: &MlpModel, dataset: &LabeledDataset, eps: f64) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let n = dataset.len() as f64;
    let mut analytic = model.zero_gradients();
    for (h, &y) in dataset.iter() {
        model.accumulate_loss_gradient(h, y, 1.0 / n, &mut analytic)?;
    }
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for l in 0..analytic.len() {
        for j in 0..analytic[l].len() {
            let orig = probe.weights()[l][j];
            probe.weights_mut()[l][j] = orig + eps;
            let up = weighted_cross_entropy_risk(&probe, dataset, None)?;
            probe.weights_mut()[l][j] = orig - eps;
            let down = weighted_cross_entropy_risk(&probe, dataset, None)?;
            probe.weights_mut()[l][j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[l][j];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
