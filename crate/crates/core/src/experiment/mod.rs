// SPDX-License-Identifier: Apache-2.0

//! Config-driven experiment runner behind the `socialml` binary.

mod commands;
pub mod config;
pub mod output;

use std::path::Path;

use rand::RngCore;

use crate::data::io::DatasetManifest;
use crate::data::synthetic::noisy_digits;
use crate::data::{
    balanced_indices, prediction_stream, split_patches, GaussianScene, PatchLayout, PredictionStream, RegimeSchedule,
    SceneSource,
};
use crate::error::{Error, Result};
use crate::graph::{
    build_averaging_matrix, directed_ring_adjacency, grid_adjacency, is_strongly_connected, random_connected_adjacency,
    CombinationMatrix,
};
use crate::model::LabeledDataset;
use crate::seed;

pub use commands::{
    cmd_montecarlo, cmd_predict, cmd_theory, cmd_train, cmd_validate_data, monte_carlo_curves, MonteCarloCurves,
};
pub use config::{ExperimentConfig, LoadedConfig, Overrides};
pub use output::{Manifest, OutputDir};

use config::{DataConfig, GraphConfig};

/// Features available to an experiment.
#[derive(Debug, Clone)]
pub enum Source {
    Gaussian(GaussianScene),
    /// Pre-split samples: `views[k][n]` is agent `k`'s view of sample `n`.
    Pool {
        views: Vec<Vec<Vec<f64>>>,
        labels: Vec<usize>,
        num_classes: usize,
    },
}

impl Source {
    pub fn load(cfg: &LoadedConfig) -> Result<Self> {
        match &cfg.config.data {
            DataConfig::Gaussian { scene, .. } => Ok(Source::Gaussian(scene.spec().build()?)),
            DataConfig::Images { manifest, .. } => {
                let path = cfg.resolve(manifest);
                let m: DatasetManifest = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
                let base = path.parent().unwrap_or(Path::new("."));
                m.verify(base)?;
                let (images, labels) = m.load(base)?;
                Self::from_images(&images, labels, &m.layout()?, m.classes.len())
            }
            DataConfig::SyntheticDigits {
                digits,
                samples_per_class,
                noise,
                grid_rows,
                grid_cols,
                ..
            } => {
                let data_seed = seed::derive(cfg.config.seed, &[seed::Phase::TrainData as u64, u64::MAX]);
                let (images, labels) = noisy_digits(digits, *samples_per_class, *noise, data_seed)?;
                let g = crate::data::synthetic::GLYPH_SIZE;
                let layout = PatchLayout::grid(g, g, *grid_rows, *grid_cols)?;
                Self::from_images(&images, labels, &layout, digits.len())
            }
        }
    }

    fn from_images(
        images: &[crate::data::Image],
        labels: Vec<usize>,
        layout: &PatchLayout,
        num_classes: usize,
    ) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Empty("image dataset"));
        }
        Ok(Source::Pool {
            views: split_patches(images, layout)?,
            labels,
            num_classes,
        })
    }

    pub fn num_agents(&self) -> usize {
        match self {
            Source::Gaussian(s) => SceneSource::num_agents(s),
            Source::Pool { views, .. } => views.len(),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Source::Gaussian(s) => s.num_classes(),
            Source::Pool { num_classes, .. } => *num_classes,
        }
    }

    pub fn agent_dim(&self, agent: usize) -> usize {
        match self {
            Source::Gaussian(s) => s.dim(agent),
            Source::Pool { views, .. } => views[agent][0].len(),
        }
    }

    pub fn class_counts(&self) -> Option<Vec<usize>> {
        match self {
            Source::Gaussian(_) => None,
            Source::Pool {
                labels, num_classes, ..
            } => {
                let mut c = vec![0; *num_classes];
                labels.iter().for_each(|&l| c[l] += 1);
                Some(c)
            }
        }
    }

    /// A shared labelled sample with `per_class` samples of every class,
    /// seen by each agent through its own view. Also returns the pool
    /// indices used (empty for generated scenes).
    pub fn training_views(&self, per_class: usize, seed_: u64) -> Result<(Vec<LabeledDataset>, Vec<usize>)> {
        let m = self.num_classes();
        let k = self.num_agents();
        match self {
            Source::Gaussian(scene) => {
                let mut rng = seed::rng(seed_);
                let mut features = vec![Vec::with_capacity(per_class * m); k];
                let mut labels = Vec::with_capacity(per_class * m);
                for c in 0..m {
                    for _ in 0..per_class {
                        for (agent, h) in scene.draw_scene(c, &mut rng)?.into_iter().enumerate() {
                            features[agent].push(h);
                        }
                        labels.push(c);
                    }
                }
                let views = features
                    .into_iter()
                    .map(|f| LabeledDataset::new(f, labels.clone(), m))
                    .collect::<Result<Vec<_>>>()?;
                Ok((views, Vec::new()))
            }
            Source::Pool { views, labels, .. } => {
                let idx = balanced_indices(labels, m, per_class, seed_)?;
                let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
                let out = views
                    .iter()
                    .map(|v| LabeledDataset::new(idx.iter().map(|&i| v[i].clone()).collect(), y.clone(), m))
                    .collect::<Result<Vec<_>>>()?;
                Ok((out, idx))
            }
        }
    }

    /// Prediction stream drawn from fresh scenes, or from pool samples not
    /// used for training.
    pub fn prediction_stream(
        &self,
        used: &[usize],
        schedule: &RegimeSchedule,
        length: usize,
        seed_: u64,
    ) -> Result<PredictionStream> {
        match self {
            Source::Gaussian(scene) => prediction_stream(scene, schedule, length, seed_),
            Source::Pool {
                views,
                labels,
                num_classes,
            } => {
                let mut taken = vec![false; labels.len()];
                used.iter().for_each(|&i| taken[i] = true);
                let mut by_class = vec![Vec::new(); *num_classes];
                for (n, &y) in labels.iter().enumerate() {
                    if !taken[n] {
                        by_class[y].push(n);
                    }
                }
                for (c, pool) in by_class.iter_mut().enumerate() {
                    if pool.is_empty() {
                        log::warn!("class {c} has no held-out samples; predicting from training samples");
                        pool.extend((0..labels.len()).filter(|&n| labels[n] == c));
                    }
                }
                let held = HeldOut { views, by_class };
                prediction_stream(&held, schedule, length, seed_)
            }
        }
    }
}

struct HeldOut<'a> {
    views: &'a [Vec<Vec<f64>>],
    by_class: Vec<Vec<usize>>,
}

impl SceneSource for HeldOut<'_> {
    fn num_agents(&self) -> usize {
        self.views.len()
    }

    fn num_classes(&self) -> usize {
        self.by_class.len()
    }

    fn draw_scene(&self, class: usize, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
        use rand::Rng;
        let pool = self
            .by_class
            .get(class)
            .filter(|p| !p.is_empty())
            .ok_or_else(|| Error::invalid(format!("class {class} missing from source")))?;
        let n = pool[rng.random_range(0..pool.len())];
        Ok(self.views.iter().map(|v| v[n].clone()).collect())
    }
}

/// Combination matrix described by the config.
pub fn build_graph(cfg: &LoadedConfig) -> Result<CombinationMatrix> {
    let a = match &cfg.config.graph {
        GraphConfig::Ring { agents } => build_averaging_matrix(&directed_ring_adjacency(*agents))?,
        GraphConfig::Grid { rows, cols } => build_averaging_matrix(&grid_adjacency(*rows, *cols))?,
        GraphConfig::Random {
            agents,
            edge_probability,
        } => {
            let mut rng = seed::rng(seed::derive(cfg.config.seed, &[u64::MAX, 1]));
            build_averaging_matrix(&random_connected_adjacency(*agents, *edge_probability, &mut rng))?
        }
        GraphConfig::File { path } => CombinationMatrix::load(&cfg.resolve(path))?,
        GraphConfig::Matrix { rows } => CombinationMatrix::from_rows(rows.clone())?,
    };
    if !is_strongly_connected(&a).primitive {
        return Err(Error::NotPrimitive);
    }
    Ok(a)
}

/// Error split used for the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Config or data validation failed before any work started.
    Validation(Error),
    Runtime(Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(e) => write!(f, "validation error: {e}"),
            Failure::Runtime(e) => write!(f, "runtime failure: {e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Predict,
    MonteCarlo,
    Theory,
    ValidateData,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Predict => "predict",
            Command::MonteCarlo => "montecarlo",
            Command::Theory => "theory",
            Command::ValidateData => "validate-data",
        }
    }
}

/// Loads and validates `config`, then runs `command` on a thread pool of
/// `threads` workers (all cores when `None`).
pub fn run(
    command: Command,
    config: &Path,
    overrides: &Overrides,
    threads: Option<usize>,
) -> std::result::Result<Manifest, Failure> {
    let cfg = LoadedConfig::from_path(config, overrides).map_err(Failure::Validation)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Runtime(Error::Config(e.to_string())))?;
    pool.install(|| match command {
        Command::Train => cmd_train(&cfg),
        Command::Predict => cmd_predict(&cfg),
        Command::MonteCarlo => cmd_montecarlo(&cfg),
        Command::Theory => cmd_theory(&cfg),
        Command::ValidateData => cmd_validate_data(&cfg),
    })
    .map_err(|e| match e {
        Error::Config(_) | Error::NotPrimitive => Failure::Validation(e),
        other => Failure::Runtime(other),
    })
}
