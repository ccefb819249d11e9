// SPDX-License-Identifier: Apache-2.0

//! Prediction phase: SL and ASL recursions on log-belief ratios, decisions,
//! belief reconstruction and the known-model Bayes oracle.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{prediction_stream, GaussianScene, PredictionStream, RegimeSchedule, SceneSource};
use crate::error::{Error, Result};
use crate::graph::CombinationMatrix;
use crate::model::{log_sum_exp, sign_of_class};
use crate::statistics::{ConditionalMeans, DebiasedStatistic};

/// Log-belief ratios `lambda[k][g]` of every agent against reference class 0
/// (one component for binary problems), at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub lambda: Vec<Vec<f64>>,
    pub time: usize,
}

impl BeliefState {
    /// Uniform initial beliefs: all ratios zero.
    pub fn zeros(agents: usize, components: usize) -> Self {
        BeliefState {
            lambda: vec![vec![0.0; components]; agents],
            time: 0,
        }
    }

    pub fn num_agents(&self) -> usize {
        self.lambda.len()
    }

    pub fn components(&self) -> usize {
        self.lambda.first().map_or(0, Vec::len)
    }

    fn check_finite(&self) -> Result<()> {
        if self.lambda.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("belief state at time {}", self.time)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticSource {
    TrainedDebiased,
    TrueLogLikelihoodRatio,
    FixedFunction,
}

/// Per-agent statistic `c_k(h)` with one component per non-reference class.
pub trait StatisticProvider: Send + Sync {
    fn num_agents(&self) -> usize;
    fn components(&self) -> usize;
    fn evaluate(&self, agent: usize, h: &[f64]) -> Result<Vec<f64>>;
    fn source(&self) -> StatisticSource;
}

/// Trained, debiased logits for every agent.
#[derive(Debug, Clone)]
pub struct TrainedStatistics {
    pub agents: Vec<DebiasedStatistic>,
}

impl TrainedStatistics {
    pub fn new(agents: Vec<DebiasedStatistic>) -> Result<Self> {
        let first = agents.first().ok_or(Error::Empty("trained statistics"))?;
        if agents.iter().any(|a| a.dim() != first.dim()) {
            return Err(Error::invalid("agents disagree on the number of classes"));
        }
        Ok(TrainedStatistics { agents })
    }
}

impl StatisticProvider for TrainedStatistics {
    fn num_agents(&self) -> usize {
        self.agents.len()
    }

    fn components(&self) -> usize {
        self.agents[0].dim()
    }

    fn evaluate(&self, agent: usize, h: &[f64]) -> Result<Vec<f64>> {
        self.agents
            .get(agent)
            .ok_or_else(|| Error::OutOfRange(format!("agent {agent}")))?
            .evaluate(h)
    }

    fn source(&self) -> StatisticSource {
        StatisticSource::TrainedDebiased
    }
}

/// Exact `log L_k(h|0) / L_k(h|g)` from a Gaussian scene.
#[derive(Debug, Clone)]
pub struct TrueLikelihoodRatios {
    pub scene: GaussianScene,
}

impl StatisticProvider for TrueLikelihoodRatios {
    fn num_agents(&self) -> usize {
        SceneSource::num_agents(&self.scene)
    }

    fn components(&self) -> usize {
        self.scene.num_classes() - 1
    }

    fn evaluate(&self, agent: usize, h: &[f64]) -> Result<Vec<f64>> {
        let l0 = self.scene.log_density(agent, 0, h)?;
        (1..self.scene.num_classes())
            .map(|g| Ok(l0 - self.scene.log_density(agent, g, h)?))
            .collect()
    }

    fn source(&self) -> StatisticSource {
        StatisticSource::TrueLogLikelihoodRatio
    }
}

type AgentFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Arbitrary fixed per-agent functions.
pub struct FixedStatistics {
    components: usize,
    functions: Vec<AgentFn>,
}

impl FixedStatistics {
    pub fn new(components: usize, functions: Vec<AgentFn>) -> Result<Self> {
        if functions.is_empty() || components == 0 {
            return Err(Error::Empty("fixed statistics"));
        }
        Ok(FixedStatistics { components, functions })
    }

    /// Scalar statistic per agent.
    pub fn scalar<F>(functions: Vec<F>) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            1,
            functions
                .into_iter()
                .map(|f| Box::new(move |h: &[f64]| vec![f(h)]) as AgentFn)
                .collect(),
        )
    }

    /// `c_k(h) = 0` for every agent.
    pub fn zero(agents: usize, components: usize) -> Result<Self> {
        Self::new(
            components,
            (0..agents)
                .map(|_| Box::new(move |_: &[f64]| vec![0.0; components]) as AgentFn)
                .collect(),
        )
    }
}

impl std::fmt::Debug for FixedStatistics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FixedStatistics")
            .field("components", &self.components)
            .field("agents", &self.functions.len())
            .finish()
    }
}

impl StatisticProvider for FixedStatistics {
    fn num_agents(&self) -> usize {
        self.functions.len()
    }

    fn components(&self) -> usize {
        self.components
    }

    fn evaluate(&self, agent: usize, h: &[f64]) -> Result<Vec<f64>> {
        let f = self
            .functions
            .get(agent)
            .ok_or_else(|| Error::OutOfRange(format!("agent {agent}")))?;
        let v = f(h);
        if v.len() != self.components {
            return Err(Error::DimensionMismatch {
                expected: self.components,
                actual: v.len(),
                context: "fixed statistic output",
            });
        }
        Ok(v)
    }

    fn source(&self) -> StatisticSource {
        StatisticSource::FixedFunction
    }
}

/// Belief recursion: plain social learning or its adaptive variant with
/// step size `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "lowercase")]
pub enum Engine {
    Sl,
    Asl { delta: f64 },
}

impl Engine {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Engine::Sl => Ok(()),
            Engine::Asl { delta } if delta > 0.0 && delta < 1.0 => Ok(()),
            Engine::Asl { delta } => Err(Error::OutOfRange(format!(
                "ASL step size {delta} outside (0, 1)"
            ))),
        }
    }

    fn memory(&self) -> f64 {
        match *self {
            Engine::Sl => 1.0,
            Engine::Asl { delta } => 1.0 - delta,
        }
    }

    pub fn step(&self, state: &BeliefState, a: &CombinationMatrix, stats: &[Vec<f64>]) -> Result<BeliefState> {
        self.validate()?;
        combine_step(state, a, stats, self.memory())
    }
}

fn combine_step(state: &BeliefState, a: &CombinationMatrix, stats: &[Vec<f64>], memory: f64) -> Result<BeliefState> {
    let k = a.size();
    if state.num_agents() != k || stats.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: if state.num_agents() != k { state.num_agents() } else { stats.len() },
            context: "agents in belief step",
        });
    }
    let m = state.components();
    if let Some(s) = stats.iter().find(|s| s.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: s.len(),
            context: "statistic components",
        });
    }
    if stats.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("statistic at time {}", state.time + 1)));
    }
    let mut lambda = vec![vec![0.0; m]; k];
    for g in 0..m {
        let psi: Vec<f64> = (0..k).map(|l| memory * state.lambda[l][g] + stats[l][g]).collect();
        for (kk, v) in a.combine(&psi).into_iter().enumerate() {
            lambda[kk][g] = v;
        }
    }
    let next = BeliefState {
        lambda,
        time: state.time + 1,
    };
    next.check_finite()?;
    Ok(next)
}

/// `lambda_k,i = sum_l a_lk (lambda_l,i-1 + c_l)`.
pub fn sl_step(state: &BeliefState, a: &CombinationMatrix, stats: &[Vec<f64>]) -> Result<BeliefState> {
    Engine::Sl.step(state, a, stats)
}

/// `lambda_k,i = sum_l a_lk ((1 - delta) lambda_l,i-1 + c_l)`, `0 < delta < 1`.
pub fn asl_step(state: &BeliefState, a: &CombinationMatrix, stats: &[Vec<f64>], delta: f64) -> Result<BeliefState> {
    Engine::Asl { delta }.step(state, a, stats)
}

/// Belief pmf `[phi(0), phi(1), ...]` from the ratios `lambda(g) = log
/// phi(0)/phi(g)`.
pub fn beliefs_from_lambda(lambda: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = std::iter::once(0.0).chain(lambda.iter().map(|l| -l)).collect();
    let lse = log_sum_exp(&logits);
    logits.iter().map(|v| (v - lse).exp()).collect()
}

/// Class with the largest belief; ties go to the smallest index. With one
/// component this is `lambda >= 0 -> class 0`.
pub fn decide_agent(lambda: &[f64]) -> usize {
    let mut best = (0usize, 0.0f64);
    for (g, l) in lambda.iter().enumerate() {
        if -l > best.1 {
            best = (g + 1, -l);
        }
    }
    best.0
}

/// Per-agent class decisions.
pub fn decide(state: &BeliefState) -> Vec<usize> {
    state.lambda.iter().map(|l| decide_agent(l)).collect()
}

/// Full record of one prediction run.
#[derive(Debug, Clone)]
pub struct PredictionRun {
    /// `lambda[i][k][g]` after step `i + 1`.
    pub lambda: Vec<Vec<Vec<f64>>>,
    pub decisions: Vec<Vec<usize>>,
    pub true_states: Vec<usize>,
    pub num_classes: usize,
}

impl PredictionRun {
    pub fn len(&self) -> usize {
        self.true_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_states.is_empty()
    }

    pub fn correct(&self, i: usize, agent: usize) -> bool {
        self.decisions[i][agent] == self.true_states[i]
    }

    pub fn all_correct(&self, i: usize) -> bool {
        self.decisions[i].iter().all(|&d| d == self.true_states[i])
    }

    /// Fraction of agents deciding wrongly at step index `i`.
    pub fn error_fraction(&self, i: usize) -> f64 {
        let k = self.decisions[i].len();
        self.decisions[i].iter().filter(|&&d| d != self.true_states[i]).count() as f64 / k as f64
    }

    /// Steps after `start` until every agent first decides correctly, or
    /// `None` if that never happens before `end`.
    pub fn adaptation_time(&self, start: usize, end: usize) -> Option<usize> {
        (start..end.min(self.len())).find(|&i| self.all_correct(i)).map(|i| i - start)
    }

    /// Writes one row per (step, agent, component). Binary runs report
    /// decisions and states as `+1/-1`.
    pub fn write_csv<W: Write>(&self, out: &mut csv::Writer<W>, run_id: usize) -> Result<()> {
        let binary = self.num_classes == 2;
        let label = |c: usize| -> Result<String> {
            Ok(if binary {
                format!("{:+}", sign_of_class(c)? as i32)
            } else {
                c.to_string()
            })
        };
        for (i, (lam, dec)) in self.lambda.iter().zip(&self.decisions).enumerate() {
            let truth = self.true_states[i];
            for (k, comps) in lam.iter().enumerate() {
                for (g, v) in comps.iter().enumerate() {
                    let gamma = if binary { "binary".to_string() } else { (g + 1).to_string() };
                    out.write_record([
                        run_id.to_string(),
                        (i + 1).to_string(),
                        k.to_string(),
                        gamma,
                        format!("{v:e}"),
                        label(dec[k])?,
                        label(truth)?,
                        u8::from(dec[k] == truth).to_string(),
                    ])
                    .map_err(|e| Error::Format(e.to_string()))?;
                }
            }
        }
        Ok(())
    }
}

pub const TRAJECTORY_COLUMNS: [&str; 8] = [
    "run_id",
    "i",
    "agent",
    "gamma_or_binary",
    "lambda",
    "decision",
    "true_state",
    "correct",
];

/// Iterates `engine` over `stream` from `initial` (zeros when `None`).
pub fn run_prediction(
    engine: Engine,
    a: &CombinationMatrix,
    provider: &dyn StatisticProvider,
    stream: &PredictionStream,
    initial: Option<BeliefState>,
) -> Result<PredictionRun> {
    engine.validate()?;
    let k = a.size();
    if provider.num_agents() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: provider.num_agents(),
            context: "provider agents",
        });
    }
    let m = provider.components();
    let mut state = initial.unwrap_or_else(|| BeliefState::zeros(k, m));
    state.check_finite()?;
    let mut run = PredictionRun {
        lambda: Vec::with_capacity(stream.len()),
        decisions: Vec::with_capacity(stream.len()),
        true_states: stream.true_states.clone(),
        num_classes: m + 1,
    };
    for scene in &stream.features {
        if scene.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: scene.len(),
                context: "scene agents",
            });
        }
        let stats = scene
            .iter()
            .enumerate()
            .map(|(agent, h)| provider.evaluate(agent, h))
            .collect::<Result<Vec<_>>>()?;
        state = engine.step(&state, a, &stats)?;
        run.decisions.push(decide(&state));
        run.lambda.push(state.lambda.clone());
    }
    Ok(run)
}

/// Draws a stream from `source` under `schedule` and runs the engine on it.
pub fn simulate(
    engine: Engine,
    a: &CombinationMatrix,
    provider: &dyn StatisticProvider,
    source: &dyn SceneSource,
    schedule: &RegimeSchedule,
    length: usize,
    seed: u64,
) -> Result<PredictionRun> {
    let stream = prediction_stream(source, schedule, length, seed)?;
    run_prediction(engine, a, provider, &stream, None)
}

/// Margins of the consistency conditions `mu+ > mu_tilde` and
/// `mu- < mu_tilde`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    /// `mu+ - mu_tilde`
    pub margin_plus: f64,
    /// `mu_tilde - mu-`
    pub margin_minus: f64,
    pub condition_plus: bool,
    pub condition_minus: bool,
    pub satisfied: bool,
}

/// With zero training means this checks the sign conditions of exact
/// log-likelihood ratios.
pub fn check_consistency_conditions(means: &ConditionalMeans) -> ConsistencyReport {
    let margin_plus = means.mu_plus - means.mu_tilde;
    let margin_minus = means.mu_tilde - means.mu_minus;
    let condition_plus = margin_plus > 0.0;
    let condition_minus = margin_minus > 0.0;
    ConsistencyReport {
        margin_plus,
        margin_minus,
        condition_plus,
        condition_minus,
        satisfied: condition_plus && condition_minus,
    }
}

/// Single-agent Bayes oracle: running log-likelihood ratio plus the log
/// prior ratio, thresholded at zero. `log_likelihoods(h)` returns
/// `(log L(h|+1), log L(h|-1))`; the result is the `+1/-1` decision after
/// each observation.
pub fn bayes_classifier<F>(log_likelihoods: F, prior_plus: f64, stream: &[Vec<f64>]) -> Result<Vec<i8>>
where
    F: Fn(&[f64]) -> Result<(f64, f64)>,
{
    if !(0.0..=1.0).contains(&prior_plus) || prior_plus == 0.0 || prior_plus == 1.0 {
        return Err(Error::OutOfRange(format!(
            "prior {prior_plus} must lie strictly inside (0, 1)"
        )));
    }
    let mut stat = (prior_plus / (1.0 - prior_plus)).ln();
    let mut out = Vec::with_capacity(stream.len());
    for (i, h) in stream.iter().enumerate() {
        let (lp, lm) = log_likelihoods(h)?;
        if !lp.is_finite() || !lm.is_finite() {
            return Err(Error::NonFinite(format!("zero or invalid density at step {}", i + 1)));
        }
        stat += lp - lm;
        out.push(if stat >= 0.0 { 1 } else { -1 });
    }
    Ok(out)
}
