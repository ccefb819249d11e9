// SPDX-License-Identifier: Apache-2.0

//! Feature generation and ingestion.

pub mod gaussian;
pub mod io;
pub mod patches;
pub mod stream;
pub mod synthetic;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::model::LabeledDataset;
use crate::seed;

pub use gaussian::{AgentLikelihoods, GaussianClass, GaussianScene, GaussianSceneSpec};
pub use patches::{split_patches, Image, PatchLayout};
pub use stream::{prediction_stream, PredictionStream, RegimeSchedule, SceneSource, ScenePool, Segment};

/// Indices of exactly `per_class` samples of every class, drawn uniformly
/// without replacement. Returned grouped by class, each group in sampled
/// order.
pub fn balanced_indices(labels: &[usize], num_classes: usize, per_class: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(per_class * num_classes);
    for c in 0..num_classes {
        let pool: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if pool.len() < per_class {
            return Err(Error::invalid(format!(
                "class {c} has {} samples, {per_class} requested",
                pool.len()
            )));
        }
        out.extend(sample(&mut rng, pool.len(), per_class).into_iter().map(|j| pool[j]));
    }
    Ok(out)
}

/// Balanced subsample with `per_class` samples of each class.
pub fn balanced_sample(dataset: &LabeledDataset, per_class: usize, seed: u64) -> Result<LabeledDataset> {
    let idx = balanced_indices(&dataset.labels, dataset.num_classes, per_class, seed)?;
    Ok(dataset.subset(&idx))
}

/// Draws `per_class` Gaussian samples of every class for one agent.
pub fn gaussian_training_set(scene: &GaussianScene, agent: usize, per_class: usize, seed: u64) -> Result<LabeledDataset> {
    use crate::data::stream::SceneSource;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for c in 0..scene.num_classes() {
        features.extend(scene.sample(agent, c, per_class, seed::derive(seed, &[c as u64]))?);
        labels.extend(std::iter::repeat_n(c, per_class));
    }
    LabeledDataset::new(features, labels, scene.num_classes())
}
