// SPDX-License-Identifier: Apache-2.0

//! Debiased plug-in statistics, class-conditional means and classifier
//! complexity estimates.

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::data::GaussianScene;
use crate::error::{Error, Result};
use crate::graph::PerronVector;
use crate::model::{LabeledDataset, MlpArchitecture, MlpModel, MINUS, PLUS};
use crate::seed;
use crate::theory::mlp_rademacher_constant;

/// `(1/N) sum_n f(h_n)`.
pub fn empirical_training_mean<F>(features: &[Vec<f64>], f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if features.is_empty() {
        return Err(Error::Empty("training features"));
    }
    let mut s = 0.0;
    for h in features {
        s += f(h)?;
    }
    Ok(s / features.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticKind {
    /// One statistic `f(h) - mean`.
    Binary,
    /// One statistic per class `g = 1..M` against reference class 0.
    MultiClass,
}

/// Trained logit(s) minus the empirical training mean(s).
#[derive(Debug, Clone)]
pub struct DebiasedStatistic {
    pub agent: usize,
    pub model: MlpModel,
    /// Binary: `[mean]`. Multi-class: mean of `z_0 - z_g` over samples with
    /// labels in `{0, g}`, for `g = 1..M`.
    pub training_means: Vec<f64>,
    pub kind: StatisticKind,
    pub num_classes: usize,
}

impl DebiasedStatistic {
    /// Binary statistic `c(h) = f(h) - mean_n f(h_n)` over every training
    /// sample.
    pub fn binary(agent: usize, model: MlpModel, training: &LabeledDataset) -> Result<Self> {
        if model.num_classes() != 2 {
            return Err(Error::invalid("binary statistic needs a two-output model"));
        }
        warn_if_unbalanced(agent, training);
        let mean = empirical_training_mean(&training.features, |h| model.logit(h))?;
        Ok(DebiasedStatistic {
            agent,
            model,
            training_means: vec![mean],
            kind: StatisticKind::Binary,
            num_classes: 2,
        })
    }

    /// Multi-class statistic `c(h, g) = [z_0(h) - z_g(h)] - mean_g`, each
    /// mean taken over the samples labelled `0` or `g`.
    pub fn multiclass(agent: usize, model: MlpModel, training: &LabeledDataset) -> Result<Self> {
        let m = model.num_classes();
        if m < 2 {
            return Err(Error::invalid("multi-class statistic needs at least two outputs"));
        }
        warn_if_unbalanced(agent, training);
        let mut means = Vec::with_capacity(m - 1);
        for g in 1..m {
            let idx = training.indices_with_labels(&[0, g]);
            if idx.is_empty() {
                return Err(Error::invalid(format!(
                    "agent {agent}: no training samples with labels 0 or {g}"
                )));
            }
            let mut s = 0.0;
            for &i in &idx {
                let z = model.outputs(&training.features[i])?;
                s += z[0] - z[g];
            }
            means.push(s / idx.len() as f64);
        }
        Ok(DebiasedStatistic {
            agent,
            model,
            training_means: means,
            kind: StatisticKind::MultiClass,
            num_classes: m,
        })
    }

    /// Picks the binary construction for two-class datasets and the
    /// multi-class one otherwise.
    pub fn new(agent: usize, model: MlpModel, training: &LabeledDataset) -> Result<Self> {
        if training.num_classes <= 2 && model.num_classes() == 2 {
            Self::binary(agent, model, training)
        } else {
            Self::multiclass(agent, model, training)
        }
    }

    /// Number of statistic components (`M - 1`, or 1 for binary).
    pub fn dim(&self) -> usize {
        self.training_means.len()
    }

    pub fn evaluate(&self, h: &[f64]) -> Result<Vec<f64>> {
        let raw = match self.kind {
            StatisticKind::Binary => vec![self.model.logit(h)?],
            StatisticKind::MultiClass => self.model.logits_vs_reference(h)?,
        };
        Ok(raw
            .into_iter()
            .zip(&self.training_means)
            .map(|(f, m)| f - m)
            .collect())
    }

    pub fn evaluate_scalar(&self, h: &[f64]) -> Result<f64> {
        Ok(self.evaluate(h)?[0])
    }
}

fn warn_if_unbalanced(agent: usize, training: &LabeledDataset) {
    if !training.is_balanced() {
        log::warn!(
            "agent {agent}: training set is unbalanced ({:?}); using the plain training mean",
            training.class_counts()
        );
    }
}

/// Source of class-conditional draws `h ~ L_k(. | class)`.
pub trait ClassConditionalSampler {
    fn num_agents(&self) -> usize;
    fn draw(&self, agent: usize, class: usize, rng: &mut dyn RngCore) -> Vec<f64>;
}

impl ClassConditionalSampler for GaussianScene {
    fn num_agents(&self) -> usize {
        crate::data::SceneSource::num_agents(self)
    }

    fn draw(&self, agent: usize, class: usize, rng: &mut dyn RngCore) -> Vec<f64> {
        GaussianScene::draw(self, agent, class, rng)
    }
}

/// Monte Carlo conditional means of per-agent functions and their network
/// averages.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalMeans {
    pub mu_plus_k: Vec<f64>,
    pub mu_minus_k: Vec<f64>,
    pub se_plus_k: Vec<f64>,
    pub se_minus_k: Vec<f64>,
    /// Empirical training means, zero for functions used without debiasing.
    pub training_mean_k: Vec<f64>,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub se_plus: f64,
    pub se_minus: f64,
    /// `(mu_plus + mu_minus) / 2`
    pub mu: f64,
    /// `sum_k pi_k training_mean_k`
    pub mu_tilde: f64,
    pub pi: Vec<f64>,
    pub n_mc: usize,
    pub seed: u64,
}

/// Estimates `mu_k^+ = E_{L_k(+1)} f_k` and `mu_k^- = E_{L_k(-1)} f_k` by
/// `n_mc` draws per agent and class, and their `pi`-weighted averages.
/// `training_means` supplies the debiasing offsets (zero when `None`).
pub fn conditional_means<F>(
    functions: &[F],
    training_means: Option<&[f64]>,
    sampler: &dyn ClassConditionalSampler,
    pi: &PerronVector,
    n_mc: usize,
    seed: u64,
) -> Result<ConditionalMeans>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let k = functions.len();
    if n_mc == 0 {
        return Err(Error::invalid("need at least one Monte Carlo draw"));
    }
    if k != pi.len() || k > sampler.num_agents() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            actual: k,
            context: "functions vs agents",
        });
    }
    let tm = match training_means {
        Some(t) if t.len() != k => {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: t.len(),
                context: "training means",
            })
        }
        Some(t) => t.to_vec(),
        None => vec![0.0; k],
    };
    let mut out = ConditionalMeans {
        mu_plus_k: vec![0.0; k],
        mu_minus_k: vec![0.0; k],
        se_plus_k: vec![0.0; k],
        se_minus_k: vec![0.0; k],
        training_mean_k: tm,
        mu_plus: 0.0,
        mu_minus: 0.0,
        se_plus: 0.0,
        se_minus: 0.0,
        mu: 0.0,
        mu_tilde: 0.0,
        pi: pi.as_slice().to_vec(),
        n_mc,
        seed,
    };
    for (agent, f) in functions.iter().enumerate() {
        for class in [PLUS, MINUS] {
            let mut rng = seed::rng(seed::derive(seed, &[agent as u64, class as u64]));
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n_mc {
                let v = f(&sampler.draw(agent, class, &mut rng))?;
                s += v;
                s2 += v * v;
            }
            let n = n_mc as f64;
            let mean = s / n;
            let var = if n_mc > 1 { (s2 - n * mean * mean).max(0.0) / (n - 1.0) } else { 0.0 };
            let se = (var / n).sqrt();
            if class == PLUS {
                out.mu_plus_k[agent] = mean;
                out.se_plus_k[agent] = se;
            } else {
                out.mu_minus_k[agent] = mean;
                out.se_minus_k[agent] = se;
            }
        }
    }
    out.mu_plus = pi.weighted_sum(&out.mu_plus_k);
    out.mu_minus = pi.weighted_sum(&out.mu_minus_k);
    let wse = |se: &[f64]| {
        pi.as_slice()
            .iter()
            .zip(se)
            .map(|(p, s)| (p * s).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    out.se_plus = wse(&out.se_plus_k);
    out.se_minus = wse(&out.se_minus_k);
    out.mu = 0.5 * (out.mu_plus + out.mu_minus);
    out.mu_tilde = pi.weighted_sum(&out.training_mean_k);
    Ok(out)
}

/// How Rademacher sign vectors are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignDraws {
    /// All `2^N` sign vectors, each with weight `2^-N` (requires `N <= 24`).
    Exhaustive,
    /// `n` independent uniform sign vectors.
    Sampled(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComplexityMethod {
    /// Sup over a finite candidate set (plus local ascent); approximates the
    /// true sup from below.
    MonteCarlo,
    AnalyticBound,
}

/// Empirical Rademacher complexity estimate of one function family.
#[derive(Debug, Clone, Serialize)]
pub struct RademacherEstimate {
    pub value: f64,
    pub std_error: f64,
    pub draws: usize,
    pub exhaustive: bool,
}

fn sign_vectors(n: usize, draws: SignDraws, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    match draws {
        SignDraws::Exhaustive => {
            if n > 24 {
                return Err(Error::invalid("exhaustive sign enumeration limited to N <= 24"));
            }
            Ok((0u64..1 << n)
                .map(|mask| (0..n).map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 }).collect())
                .collect())
        }
        SignDraws::Sampled(d) => {
            if d == 0 {
                return Err(Error::invalid("need at least one sign draw"));
            }
            Ok((0..d)
                .map(|_| (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect())
                .collect())
        }
    }
}

fn summarize(per_draw: &[f64], exhaustive: bool) -> RademacherEstimate {
    let n = per_draw.len() as f64;
    let mean = per_draw.iter().sum::<f64>() / n;
    let std_error = if exhaustive || per_draw.len() < 2 {
        0.0
    } else {
        (per_draw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    };
    RademacherEstimate {
        value: mean,
        std_error,
        draws: per_draw.len(),
        exhaustive,
    }
}

/// `E_r max_f |(1/N) sum_n r_n f(x_n)|` over a finite family given by its
/// value vectors `values[j] = [f_j(x_1), ..., f_j(x_N)]`.
pub fn empirical_rademacher(values: &[Vec<f64>], draws: SignDraws, seed: u64) -> Result<RademacherEstimate> {
    let n = values.first().map(Vec::len).ok_or(Error::Empty("function family"))?;
    if n == 0 {
        return Err(Error::Empty("features"));
    }
    if values.iter().any(|v| v.len() != n) {
        return Err(Error::invalid("family value vectors differ in length"));
    }
    let mut rng = seed::rng(seed);
    let signs = sign_vectors(n, draws, &mut rng)?;
    let per_draw: Vec<f64> = signs
        .iter()
        .map(|r| {
            values
                .iter()
                .map(|v| (r.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / n as f64).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(summarize(&per_draw, matches!(draws, SignDraws::Exhaustive)))
}

/// Sampled family of norm-constrained MLP logits.
///
/// Candidates are random models whose weight columns are pushed onto the
/// norm-ball boundary. For each sign draw the best candidate can be
/// refined by projected gradient ascent on the correlation.
#[derive(Debug, Clone)]
pub struct MlpFamily {
    pub arch: MlpArchitecture,
    pub candidates: usize,
    pub ascent_steps: usize,
    pub ascent_rate: f64,
}

impl MlpFamily {
    fn sample_candidates(&self, seed: u64) -> Result<Vec<MlpModel>> {
        if self.arch.norm_bound.is_none() {
            return Err(Error::invalid("MLP family needs a norm bound"));
        }
        if self.candidates == 0 {
            return Err(Error::Empty("function family"));
        }
        (0..self.candidates)
            .map(|j| {
                let mut m = MlpModel::random(self.arch.clone(), seed::derive(seed, &[j as u64]))?;
                let mut rng = seed::rng(seed::derive(seed, &[j as u64, 1]));
                let scale = 1.0 + 100.0 * rng.random::<f64>();
                for w in m.weights_mut() {
                    w.iter_mut().for_each(|v| *v *= scale);
                }
                m.project();
                Ok(m)
            })
            .collect()
    }
}

fn correlation(model: &MlpModel, features: &[Vec<f64>], signs: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (h, r) in features.iter().zip(signs) {
        s += r * model.logit(h)?;
    }
    Ok(s / features.len() as f64)
}

/// Monte Carlo estimate of the empirical Rademacher complexity of an MLP
/// family on fixed features.
pub fn rademacher_monte_carlo(family: &MlpFamily, features: &[Vec<f64>], n_draws: usize, seed: u64) -> Result<RademacherEstimate> {
    if features.is_empty() {
        return Err(Error::Empty("features"));
    }
    let models = family.sample_candidates(seed::derive(seed, &[0]))?;
    let mut rng = seed::rng(seed::derive(seed, &[1]));
    let signs = sign_vectors(features.len(), SignDraws::Sampled(n_draws), &mut rng)?;
    let mut per_draw = Vec::with_capacity(signs.len());
    for r in &signs {
        let mut best = (0.0f64, 0usize);
        for (j, m) in models.iter().enumerate() {
            let v = correlation(m, features, r)?.abs();
            if v > best.0 {
                best = (v, j);
            }
        }
        let mut value = best.0;
        if family.ascent_steps > 0 {
            let mut m = models[best.1].clone();
            let direction = correlation(&m, features, r)?.signum();
            for _ in 0..family.ascent_steps {
                let mut grad = m.zero_gradients();
                for (h, &rn) in features.iter().zip(r) {
                    let g = m.backward(h, &logit_direction(m.num_classes(), direction * rn))?;
                    for (acc, gl) in grad.iter_mut().zip(g) {
                        acc.iter_mut().zip(gl).for_each(|(a, b)| *a += b);
                    }
                }
                // ascent: step against the negated gradient
                m.apply_update(&grad, -family.ascent_rate / features.len() as f64);
                value = value.max(correlation(&m, features, r)?.abs());
            }
        }
        per_draw.push(value);
    }
    Ok(summarize(&per_draw, false))
}

fn logit_direction(m: usize, scale: f64) -> Vec<f64> {
    let mut dz = vec![0.0; m];
    dz[0] = scale;
    dz[1] = -scale;
    dz
}

/// Norm-constrained MLP bound
/// `(4 / sqrt(N)) (2 b L_sigma)^(L-1) b c sqrt(log(2 n0))`.
pub fn mlp_rademacher_bound(arch: &MlpArchitecture, n: usize) -> Result<f64> {
    let b = arch
        .norm_bound
        .ok_or_else(|| Error::invalid("Rademacher bound needs a norm bound b"))?;
    let c = arch
        .effective_input_bound()
        .ok_or_else(|| Error::invalid("Rademacher bound needs an input bound c"))?;
    if n == 0 {
        return Err(Error::Empty("samples"));
    }
    Ok(mlp_rademacher_constant(arch.depth(), b, arch.activation.lipschitz(), c, arch.n0()) / (n as f64).sqrt())
}

/// Per-agent complexities and their network average `rho = sum pi_k rho_k`.
#[derive(Debug, Clone, Serialize)]
pub struct ComplexityEstimate {
    pub per_agent: Vec<f64>,
    pub network: f64,
    pub method: ComplexityMethod,
    pub replications: Option<usize>,
    pub std_errors: Option<Vec<f64>>,
}

impl ComplexityEstimate {
    pub fn new(per_agent: Vec<f64>, pi: &PerronVector, method: ComplexityMethod) -> Result<Self> {
        if per_agent.len() != pi.len() {
            return Err(Error::DimensionMismatch {
                expected: pi.len(),
                actual: per_agent.len(),
                context: "per-agent complexities",
            });
        }
        if per_agent.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::invalid("complexities must be nonnegative"));
        }
        Ok(ComplexityEstimate {
            network: pi.weighted_sum(&per_agent),
            per_agent,
            method,
            replications: None,
            std_errors: None,
        })
    }

    pub fn from_monte_carlo(estimates: &[RademacherEstimate], pi: &PerronVector) -> Result<Self> {
        let mut e = Self::new(estimates.iter().map(|r| r.value).collect(), pi, ComplexityMethod::MonteCarlo)?;
        e.replications = estimates.first().map(|r| r.draws);
        e.std_errors = Some(estimates.iter().map(|r| r.std_error).collect());
        Ok(e)
    }
}
