// SPDX-License-Identifier: Apache-2.0

//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{io::DatasetManifest, GaussianSceneSpec, RegimeSchedule, Segment};
use crate::error::{Error, Result};
use crate::model::{Activation, MlpArchitecture, TrainingHyperparameters};
use crate::social::Engine;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub graph: GraphConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
    /// Per-agent overrides of `model`, one entry per agent.
    #[serde(default)]
    pub agent_models: Option<Vec<ModelConfig>>,
    #[serde(default)]
    pub prediction: Option<PredictionConfig>,
    #[serde(default)]
    pub montecarlo: Option<MonteCarloConfig>,
    #[serde(default)]
    pub theory: Option<TheoryConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphConfig {
    /// Directed ring `N_k = {k, k-1}` with uniform averaging weights.
    Ring { agents: usize },
    /// 4-neighbour grid with uniform averaging weights.
    Grid { rows: usize, cols: usize },
    /// Random strongly connected graph with self-loops.
    Random { agents: usize, edge_probability: f64 },
    /// Combination matrix file (`{"K": .., "rows": [[..]]}`).
    File { path: PathBuf },
    /// Inline combination matrix, `rows[l][k]` is the weight from `l` to `k`.
    Matrix { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataConfig {
    Gaussian {
        scene: SceneConfig,
        train_per_class: usize,
    },
    /// Image dataset described by a manifest file.
    Images {
        manifest: PathBuf,
        train_per_class: usize,
    },
    /// Generated 8x8 glyph images split into a patch grid.
    SyntheticDigits {
        digits: Vec<usize>,
        samples_per_class: usize,
        noise: f64,
        grid_rows: usize,
        grid_cols: usize,
        train_per_class: usize,
    },
}

impl DataConfig {
    pub fn train_per_class(&self) -> usize {
        match self {
            DataConfig::Gaussian { train_per_class, .. }
            | DataConfig::Images { train_per_class, .. }
            | DataConfig::SyntheticDigits { train_per_class, .. } => *train_per_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SceneConfig {
    FourAgentVariance,
    ShiftedMeans { means: Vec<f64> },
    Custom { spec: GaussianSceneSpec },
}

impl SceneConfig {
    pub fn spec(&self) -> GaussianSceneSpec {
        match self {
            SceneConfig::FourAgentVariance => GaussianSceneSpec::four_agent_variance_scene(),
            SceneConfig::ShiftedMeans { means } => GaussianSceneSpec::shifted_means(means),
            SceneConfig::Custom { spec } => spec.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default = "yes")]
    pub bias: bool,
    #[serde(default)]
    pub norm_bound: Option<f64>,
    #[serde(default)]
    pub input_bound: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default = "one")]
    pub repetitions: usize,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

impl ModelConfig {
    pub fn architecture(&self, input_dim: usize, classes: usize) -> MlpArchitecture {
        MlpArchitecture {
            input_dim,
            layers: self.hidden.iter().copied().chain([classes]).collect(),
            activation: self.activation,
            bias: self.bias,
            norm_bound: self.norm_bound,
            input_bound: self.input_bound,
        }
    }

    pub fn hyperparameters(&self, seed: u64) -> TrainingHyperparameters {
        TrainingHyperparameters {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        self.hyperparameters(0).validate()?;
        if self.repetitions == 0 {
            return Err(Error::Config("model.repetitions must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Sl,
    Asl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionConfig {
    pub engine: EngineKind,
    #[serde(default)]
    pub delta: Option<f64>,
    pub length: usize,
    pub schedule: ScheduleConfig,
}

impl PredictionConfig {
    pub fn engine(&self) -> Result<Engine> {
        let e = match (self.engine, self.delta) {
            (EngineKind::Sl, None) => Engine::Sl,
            (EngineKind::Asl, Some(delta)) => Engine::Asl { delta },
            (EngineKind::Sl, Some(_)) => {
                return Err(Error::Config("delta is only allowed with engine \"asl\"".into()))
            }
            (EngineKind::Asl, None) => return Err(Error::Config("engine \"asl\" requires delta".into())),
        };
        e.validate().map_err(|err| Error::Config(err.to_string()))?;
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Constant(usize),
    Switch { first: usize, at: usize, second: usize },
    Cyclic { states: Vec<usize>, period: usize },
    Segments(Vec<Segment>),
}

impl ScheduleConfig {
    pub fn build(&self, length: usize) -> Result<RegimeSchedule> {
        match self {
            ScheduleConfig::Constant(s) => Ok(RegimeSchedule::constant(*s)),
            ScheduleConfig::Switch { first, at, second } => RegimeSchedule::switch_at(*first, *at, *second),
            ScheduleConfig::Cyclic { states, period } => RegimeSchedule::cyclic(states, *period, length),
            ScheduleConfig::Segments(s) => RegimeSchedule::new(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub replications: usize,
    pub length: usize,
    /// Also evaluate the centralized AdaBoost baseline.
    #[serde(default = "yes")]
    pub adaboost: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    #[serde(default)]
    pub target_risk: Option<f64>,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    /// Network-wide logit bound; derived from the model constraints when
    /// absent.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    /// Per-agent complexity constants `C_k`; derived from the model
    /// constraints when absent.
    #[serde(default)]
    pub complexity_constants: Option<Vec<f64>>,
    /// Per-agent training-set sizes; taken from the data config when absent.
    #[serde(default)]
    pub counts: Option<Vec<usize>>,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

fn default_eps() -> f64 {
    0.05
}

fn default_grid() -> usize {
    50
}

/// A parsed config with the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
}

impl LoadedConfig {
    pub fn from_path(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_str(&text, base, overrides)
    }

    pub fn from_str(text: &str, base_dir: PathBuf, overrides: &Overrides) -> Result<Self> {
        let mut config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        if let Some(s) = overrides.seed {
            config.seed = s;
        }
        if let Some(r) = overrides.replications {
            match config.montecarlo.as_mut() {
                Some(mc) => mc.replications = r,
                None => return Err(Error::Config("--replications-override needs a montecarlo section".into())),
            }
        }
        if let Some(out) = &overrides.out {
            config.output_dir = Some(out.clone());
        }
        let loaded = LoadedConfig { config, base_dir };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        match &self.config.output_dir {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.clone()),
            None => PathBuf::from("out"),
        }
    }

    /// SHA-256 of the effective config with the output directory removed,
    /// so the same experiment hashes identically wherever it is written.
    pub fn hash(&self) -> String {
        let mut c = self.config.clone();
        c.output_dir = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn num_agents_hint(&self) -> Option<usize> {
        match &self.config.graph {
            GraphConfig::Ring { agents } | GraphConfig::Random { agents, .. } => Some(*agents),
            GraphConfig::Grid { rows, cols } => Some(rows * cols),
            GraphConfig::Matrix { rows } => Some(rows.len()),
            GraphConfig::File { .. } => None,
        }
    }

    pub fn model_for(&self, agent: usize) -> &ModelConfig {
        self.config
            .agent_models
            .as_ref()
            .and_then(|m| m.get(agent))
            .unwrap_or(&self.config.model)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        match &c.graph {
            GraphConfig::File { path } => {
                let p = self.resolve(path);
                if !p.exists() {
                    return Err(Error::Config(format!("graph file {} does not exist", p.display())));
                }
            }
            GraphConfig::Random { edge_probability, .. } if !(0.0..=1.0).contains(edge_probability) => {
                return Err(Error::Config("edge_probability must lie in [0, 1]".into()));
            }
            _ => {}
        }
        if c.data.train_per_class() == 0 {
            return Err(Error::Config("train_per_class must be positive".into()));
        }
        match &c.data {
            DataConfig::Images { manifest, .. } => {
                let p = self.resolve(manifest);
                if !p.exists() {
                    return Err(Error::Config(format!("manifest {} does not exist", p.display())));
                }
                let m: DatasetManifest = serde_json::from_str(&std::fs::read_to_string(&p)?)
                    .map_err(|e| Error::Config(format!("invalid manifest: {e}")))?;
                let base = p.parent().unwrap_or(Path::new("."));
                for f in m.files(base) {
                    if !f.exists() {
                        return Err(Error::Config(format!("data file {} does not exist", f.display())));
                    }
                }
                m.layout().map_err(|e| Error::Config(e.to_string()))?;
            }
            DataConfig::SyntheticDigits {
                digits,
                samples_per_class,
                train_per_class,
                noise,
                ..
            } => {
                if digits.len() < 2 || digits.iter().any(|&d| d > 9) {
                    return Err(Error::Config("need at least two digits in 0..=9".into()));
                }
                if samples_per_class < train_per_class {
                    return Err(Error::Config("samples_per_class must cover train_per_class".into()));
                }
                if !(*noise >= 0.0) {
                    return Err(Error::Config("noise must be nonnegative".into()));
                }
            }
            DataConfig::Gaussian { .. } => {}
        }
        c.model.validate()?;
        if let Some(models) = &c.agent_models {
            for m in models {
                m.validate()?;
            }
            if let Some(k) = self.num_agents_hint() {
                if models.len() != k {
                    return Err(Error::Config(format!(
                        "agent_models has {} entries for {k} agents",
                        models.len()
                    )));
                }
            }
        }
        if let Some(p) = &c.prediction {
            p.engine()?;
            p.schedule.build(p.length).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(mc) = &c.montecarlo {
            if mc.replications == 0 {
                return Err(Error::Config("montecarlo.replications must be positive".into()));
            }
            if c.prediction.is_none() {
                return Err(Error::Config("montecarlo needs a prediction section (engine, schedule)".into()));
            }
        }
        if let Some(t) = &c.theory {
            if !(t.epsilon > 0.0 && t.epsilon < 1.0) {
                return Err(Error::Config("theory.epsilon must lie in (0, 1)".into()));
            }
            if t.grid_points < 2 {
                return Err(Error::Config("theory.grid_points must be at least 2".into()));
            }
        }
        Ok(())
    }
}
