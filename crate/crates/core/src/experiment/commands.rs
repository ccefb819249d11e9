// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;
use serde::Serialize;

use super::output::{finish_csv, Manifest, OutputDir};
use super::{build_graph, LoadedConfig, Source};
use crate::baselines::{adaboost_decide, adaboost_train};
use crate::error::{Error, Result};
use crate::graph::{perron_eigenvector, PerronVector, PERRON_TOL};
use crate::model::{sign_of_class, train_erm, LabeledDataset, MlpArchitecture, TrainedModel, TrainingHyperparameters};
use crate::seed::{agent_seed, Phase};
use crate::social::{run_prediction, Engine, PredictionRun, TrainedStatistics, TRAJECTORY_COLUMNS};
use crate::statistics::DebiasedStatistic;
use crate::theory::{
    approx_exponent, exact_exponent, mlp_rademacher_constant, network_complexity_bound, pc_lower_bound,
    sample_complexity, BoundInputs, BoundReport, LogitBound, TrainingProfile, FOUR_E_ZERO,
};

fn open_output(cfg: &LoadedConfig) -> Result<OutputDir> {
    OutputDir::create(&cfg.output_dir(), cfg.hash(), cfg.config.seed)
}

fn architectures(cfg: &LoadedConfig, source: &Source) -> Vec<MlpArchitecture> {
    (0..source.num_agents())
        .map(|k| cfg.model_for(k).architecture(source.agent_dim(k), source.num_classes()))
        .collect()
}

fn check_agents(source: &Source, a_size: usize) -> Result<()> {
    if source.num_agents() != a_size {
        return Err(Error::Config(format!(
            "graph has {a_size} agents but the data provides {}",
            source.num_agents()
        )));
    }
    Ok(())
}

/// Trains every agent of replication `rep` on its view.
fn train_agents(
    cfg: &LoadedConfig,
    archs: &[MlpArchitecture],
    views: &[LabeledDataset],
    rep: u64,
) -> Result<Vec<TrainedModel>> {
    let master = cfg.config.seed;
    views
        .par_iter()
        .enumerate()
        .map(|(k, v)| {
            let hyper = cfg.model_for(k).hyperparameters(agent_seed(master, rep, k as u64, Phase::Init));
            train_erm(v, &archs[k], &hyper)
        })
        .collect()
}

fn statistics(models: &[TrainedModel], views: &[LabeledDataset]) -> Result<TrainedStatistics> {
    TrainedStatistics::new(
        models
            .iter()
            .zip(views)
            .enumerate()
            .map(|(k, (m, v))| DebiasedStatistic::new(k, m.model.clone(), v))
            .collect::<Result<Vec<_>>>()?,
    )
}

#[derive(Serialize)]
struct TrainSummary {
    agents: usize,
    repetitions: usize,
    training_samples_per_agent: usize,
    final_risk_mean: Vec<f64>,
    models: Vec<String>,
}

/// Trains all agents for every repetition; writes `risk_trace.csv` and the
/// repetition-0 models under `models/`.
pub fn cmd_train(cfg: &LoadedConfig) -> Result<Manifest> {
    let source = Source::load(cfg)?;
    let a = build_graph(cfg)?;
    check_agents(&source, a.size())?;
    let archs = architectures(cfg, &source);
    let reps = cfg.config.model.repetitions;
    let per_class = cfg.config.data.train_per_class();
    let mut out = open_output(cfg)?;
    let mut trace = out.csv("risk_trace.csv", &["agent", "repetition", "epoch", "empirical_risk"])?;
    let k = source.num_agents();
    let mut final_risk = vec![0.0; k];
    let mut model_files = Vec::new();
    let mut samples = 0;
    for rep in 0..reps {
        let (views, _) = source.training_views(per_class, agent_seed(cfg.config.seed, rep as u64, 0, Phase::TrainData))?;
        samples = views[0].len();
        let models = train_agents(cfg, &archs, &views, rep as u64)?;
        for (agent, m) in models.iter().enumerate() {
            for (e, r) in m.risk_trace.iter().enumerate() {
                trace
                    .write_record([agent.to_string(), rep.to_string(), (e + 1).to_string(), r.to_string()])
                    .map_err(|e| Error::Format(e.to_string()))?;
            }
            final_risk[agent] += m.risk_trace.last().copied().unwrap_or(f64::NAN) / reps as f64;
            if rep == 0 {
                let name = format!("models/agent_{agent}.json");
                out.json(&name, &m.model.to_file())?;
                model_files.push(name);
            }
        }
    }
    finish_csv(trace)?;
    out.json(
        "train_summary.json",
        &TrainSummary {
            agents: k,
            repetitions: reps,
            training_samples_per_agent: samples,
            final_risk_mean: final_risk,
            models: model_files,
        },
    )?;
    out.finish("train")
}

#[derive(Serialize)]
struct SegmentSummary {
    start: usize,
    end: usize,
    state: usize,
    /// Fraction of (step, agent) decisions that are correct.
    accuracy: f64,
    /// Steps from the segment start until all agents first agree with the
    /// true state.
    adaptation_time: Option<usize>,
}

#[derive(Serialize)]
struct PredictSummary {
    engine: Engine,
    length: usize,
    agents: usize,
    classes: usize,
    tie_rule: &'static str,
    initial_lambda: f64,
    agent_accuracy: Vec<f64>,
    segments: Vec<SegmentSummary>,
}

fn summarize(run: &PredictionRun, engine: Engine, schedule: &crate::data::RegimeSchedule, agents: usize) -> PredictSummary {
    let len = run.len();
    let mut segments = Vec::new();
    let segs = schedule.segments();
    for (j, s) in segs.iter().enumerate() {
        if s.start >= len {
            break;
        }
        let end = segs.get(j + 1).map_or(len, |n| n.start.min(len));
        let total = (end - s.start) * agents;
        let correct: usize = (s.start..end)
            .map(|i| (0..agents).filter(|&k| run.correct(i, k)).count())
            .sum();
        segments.push(SegmentSummary {
            start: s.start,
            end,
            state: s.state,
            accuracy: correct as f64 / total as f64,
            adaptation_time: run.adaptation_time(s.start, end),
        });
    }
    let agent_accuracy = (0..agents)
        .map(|k| {
            if len == 0 {
                0.0
            } else {
                (0..len).filter(|&i| run.correct(i, k)).count() as f64 / len as f64
            }
        })
        .collect();
    PredictSummary {
        engine,
        length: len,
        agents,
        classes: run.num_classes,
        tie_rule: "sign(0) = +1; multi-class ties go to the smallest class index",
        initial_lambda: 0.0,
        agent_accuracy,
        segments,
    }
}

/// Trains (repetition 0), builds debiased statistics and writes the
/// prediction trajectory plus a summary.
pub fn cmd_predict(cfg: &LoadedConfig) -> Result<Manifest> {
    let pc = cfg
        .config
        .prediction
        .as_ref()
        .ok_or_else(|| Error::Config("predict needs a prediction section".into()))?;
    let engine = pc.engine()?;
    let source = Source::load(cfg)?;
    let a = build_graph(cfg)?;
    check_agents(&source, a.size())?;
    let schedule = pc.schedule.build(pc.length)?;
    schedule
        .validate_states(source.num_classes())
        .map_err(|e| Error::Config(e.to_string()))?;
    let archs = architectures(cfg, &source);
    let master = cfg.config.seed;
    let (views, used) = source.training_views(cfg.config.data.train_per_class(), agent_seed(master, 0, 0, Phase::TrainData))?;
    let models = train_agents(cfg, &archs, &views, 0)?;
    let provider = statistics(&models, &views)?;
    let stream = source.prediction_stream(&used, &schedule, pc.length, agent_seed(master, 0, 0, Phase::Prediction))?;
    let run = run_prediction(engine, &a, &provider, &stream, None)?;

    let mut out = open_output(cfg)?;
    let mut w = out.csv("trajectory.csv", &TRAJECTORY_COLUMNS)?;
    run.write_csv(&mut w, 0)?;
    finish_csv(w)?;
    out.json("prediction_summary.json", &summarize(&run, engine, &schedule, a.size()))?;
    out.finish("predict")
}

/// Per-step Monte Carlo error curves.
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloCurves {
    pub replications: usize,
    pub sml_error: Vec<f64>,
    pub sml_stderr: Vec<f64>,
    pub adaboost_error: Option<Vec<f64>>,
    pub adaboost_stderr: Option<Vec<f64>>,
}

fn mean_and_stderr(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let r = samples.len() as f64;
    let len = samples.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; len];
    let mut se = vec![0.0; len];
    for i in 0..len {
        let m = samples.iter().map(|s| s[i]).sum::<f64>() / r;
        mean[i] = m;
        if samples.len() > 1 {
            let var = samples.iter().map(|s| (s[i] - m).powi(2)).sum::<f64>() / (r - 1.0);
            se[i] = (var / r).sqrt();
        }
    }
    (mean, se)
}

struct Replication {
    sml: Vec<f64>,
    adaboost: Option<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
fn replicate(
    cfg: &LoadedConfig,
    source: &Source,
    a: &crate::graph::CombinationMatrix,
    archs: &[MlpArchitecture],
    engine: Engine,
    schedule: &crate::data::RegimeSchedule,
    length: usize,
    with_adaboost: bool,
    rep: u64,
) -> Result<Replication> {
    let master = cfg.config.seed;
    let (views, used) = source.training_views(cfg.config.data.train_per_class(), agent_seed(master, rep, 0, Phase::TrainData))?;
    let models: Vec<TrainedModel> = views
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let hyper = cfg.model_for(k).hyperparameters(agent_seed(master, rep, k as u64, Phase::Init));
            train_erm(v, &archs[k], &hyper)
        })
        .collect::<Result<_>>()?;
    let provider = statistics(&models, &views)?;
    let stream = source.prediction_stream(&used, schedule, length, agent_seed(master, rep, 0, Phase::Prediction))?;
    let run = run_prediction(engine, a, &provider, &stream, None)?;
    let sml = (0..run.len()).map(|i| run.error_fraction(i)).collect();
    let adaboost = if with_adaboost {
        let hypers: Vec<TrainingHyperparameters> = (0..views.len())
            .map(|k| cfg.model_for(k).hyperparameters(agent_seed(master, rep, k as u64, Phase::Boost)))
            .collect();
        let ens = adaboost_train(&views, archs, &hypers)?;
        let mut errs = Vec::with_capacity(stream.len());
        for (scene, &truth) in stream.features.iter().zip(&stream.true_states) {
            let d = adaboost_decide(&ens, scene)?;
            errs.push(if f64::from(d) == sign_of_class(truth)? { 0.0 } else { 1.0 });
        }
        Some(errs)
    } else {
        None
    };
    Ok(Replication { sml, adaboost })
}

/// Runs independent train+predict replications in parallel and reports
/// per-step error rates of SML and, for binary problems, AdaBoost.
///
/// Every replication derives its own seeds, and results are combined in
/// replication order, so the output does not depend on the thread count.
pub fn monte_carlo_curves(cfg: &LoadedConfig) -> Result<MonteCarloCurves> {
    let mc = cfg
        .config
        .montecarlo
        .as_ref()
        .ok_or_else(|| Error::Config("montecarlo needs a montecarlo section".into()))?;
    let pc = cfg
        .config
        .prediction
        .as_ref()
        .ok_or_else(|| Error::Config("montecarlo needs a prediction section".into()))?;
    let engine = pc.engine()?;
    let source = Source::load(cfg)?;
    let a = build_graph(cfg)?;
    check_agents(&source, a.size())?;
    let schedule = pc.schedule.build(mc.length)?;
    schedule
        .validate_states(source.num_classes())
        .map_err(|e| Error::Config(e.to_string()))?;
    let archs = architectures(cfg, &source);
    let with_adaboost = mc.adaboost && source.num_classes() == 2;
    if mc.adaboost && !with_adaboost {
        log::warn!("AdaBoost baseline is binary; skipped for {} classes", source.num_classes());
    }
    let reps: Vec<Replication> = (0..mc.replications as u64)
        .into_par_iter()
        .map(|r| replicate(cfg, &source, &a, &archs, engine, &schedule, mc.length, with_adaboost, r))
        .collect::<Result<_>>()?;
    let sml: Vec<Vec<f64>> = reps.iter().map(|r| r.sml.clone()).collect();
    let (sml_error, sml_stderr) = mean_and_stderr(&sml);
    let (adaboost_error, adaboost_stderr) = if with_adaboost {
        let ada: Vec<Vec<f64>> = reps.iter().filter_map(|r| r.adaboost.clone()).collect();
        let (m, s) = mean_and_stderr(&ada);
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    Ok(MonteCarloCurves {
        replications: mc.replications,
        sml_error,
        sml_stderr,
        adaboost_error,
        adaboost_stderr,
    })
}

/// Writes `montecarlo.csv` with columns `i, strategy, error_rate, stderr`.
pub fn cmd_montecarlo(cfg: &LoadedConfig) -> Result<Manifest> {
    let curves = monte_carlo_curves(cfg)?;
    let mut out = open_output(cfg)?;
    if curves.replications == 1 {
        log::warn!("a single replication gives degenerate (zero) standard errors");
        out.note("degenerate: one replication, stderr column is zero");
    }
    let mut w = out.csv("montecarlo.csv", &["i", "strategy", "error_rate", "stderr"])?;
    for i in 0..curves.sml_error.len() {
        let step = (i + 1).to_string();
        w.write_record([step.as_str(), "sml", &curves.sml_error[i].to_string(), &curves.sml_stderr[i].to_string()])
            .map_err(|e| Error::Format(e.to_string()))?;
        if let (Some(e), Some(s)) = (&curves.adaboost_error, &curves.adaboost_stderr) {
            w.write_record([step.as_str(), "adaboost", &e[i].to_string(), &s[i].to_string()])
                .map_err(|e| Error::Format(e.to_string()))?;
        }
    }
    finish_csv(w)?;
    out.finish("montecarlo")
}

#[derive(Serialize)]
struct ExponentPoint {
    target_risk: f64,
    exact: f64,
    approx: f64,
}

#[derive(Serialize)]
struct BoundSection {
    target_risk: f64,
    epsilon: f64,
    beta: f64,
    beta_source: &'static str,
    complexity_constants: Vec<f64>,
    network_constant: f64,
    rho: f64,
    rho_source: &'static str,
    profile: TrainingProfile,
    report: BoundReport,
    sample_complexity: Option<u64>,
}

#[derive(Serialize)]
struct TheoryReport {
    four_e_zero_reference: f64,
    four_e_zero: f64,
    exponent_grid: Vec<ExponentPoint>,
    max_approx_error: f64,
    max_approx_error_relative_to_e0: f64,
    perron: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<BoundSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound_skipped: Option<String>,
}

fn bound_section(cfg: &LoadedConfig, pi: &PerronVector) -> Result<std::result::Result<BoundSection, String>> {
    let t = match &cfg.config.theory {
        Some(t) => t,
        None => return Ok(Err("no theory section".into())),
    };
    let target_risk = match t.target_risk {
        Some(r) => r,
        None => return Ok(Err("theory.target_risk not given".into())),
    };
    let k = pi.len();
    let m = if let crate::experiment::config::DataConfig::Gaussian { scene, .. } = &cfg.config.data {
        scene.spec().agents.first().map_or(2, |a| a.classes.len())
    } else {
        2
    };
    let counts = t
        .counts
        .clone()
        .unwrap_or_else(|| vec![cfg.config.data.train_per_class() * m; k]);
    let profile = TrainingProfile::new(counts, pi)?;
    let dims = agent_dims(cfg, k);
    let archs: Vec<MlpArchitecture> = (0..k).map(|j| cfg.model_for(j).architecture(dims[j], 2)).collect();
    let (beta, beta_source) = match t.beta {
        Some(b) => (b, "config"),
        None => {
            let per: Option<Vec<f64>> = archs.iter().map(MlpArchitecture::logit_bound).collect();
            match per {
                Some(v) => (v.iter().copied().fold(0.0, f64::max), "model constraints"),
                None => return Ok(Err("beta needs theory.beta or model norm_bound and input_bound".into())),
            }
        }
    };
    let constants = match &t.complexity_constants {
        Some(c) => c.clone(),
        None => {
            let derived: Option<Vec<f64>> = archs
                .iter()
                .map(|a| {
                    Some(mlp_rademacher_constant(
                        a.depth(),
                        a.norm_bound?,
                        a.activation.lipschitz(),
                        a.effective_input_bound()?,
                        a.n0(),
                    ))
                })
                .collect();
            derived.unwrap_or_default()
        }
    };
    let (rho, rho_source, network_constant) = match (t.rho, constants.is_empty()) {
        (Some(r), _) => {
            let c = if constants.is_empty() { 0.0 } else { network_complexity_bound(&constants, &profile)?.1 };
            (r, "config", c)
        }
        (None, false) => {
            let (r, c) = network_complexity_bound(&constants, &profile)?;
            (r, "C / sqrt(N_max)", c)
        }
        (None, true) => return Ok(Err("rho needs theory.rho, complexity constants or model constraints".into())),
    };
    let report = pc_lower_bound(&BoundInputs {
        target_risk,
        beta: LogitBound::Uniform(beta),
        rho,
        profile: profile.clone(),
    })?;
    let sample_complexity = if network_constant > 0.0 {
        sample_complexity(network_constant, target_risk, profile.alpha, beta, t.epsilon).ok()
    } else {
        None
    };
    Ok(Ok(BoundSection {
        target_risk,
        epsilon: t.epsilon,
        beta,
        beta_source,
        complexity_constants: constants,
        network_constant,
        rho,
        rho_source,
        profile,
        report,
        sample_complexity,
    }))
}

fn agent_dims(cfg: &LoadedConfig, k: usize) -> Vec<usize> {
    match &cfg.config.data {
        crate::experiment::config::DataConfig::Gaussian { scene, .. } => {
            let spec = scene.spec();
            (0..k)
                .map(|j| spec.agents.get(j).and_then(|a| a.classes.first()).map_or(0, |c| c.mean.len()))
                .collect()
        }
        _ => Source::load(cfg).map_or(vec![0; k], |s| (0..k).map(|j| s.agent_dim(j)).collect()),
    }
}

/// Exponent curves over a target-risk grid and, when inputs allow, the
/// consistency bound with every input echoed.
pub fn cmd_theory(cfg: &LoadedConfig) -> Result<Manifest> {
    let a = build_graph(cfg)?;
    let pi = perron_eigenvector(&a, PERRON_TOL)?;
    let points = cfg.config.theory.as_ref().map_or(50, |t| t.grid_points);
    let top = 0.95 * std::f64::consts::LN_2;
    let mut grid = Vec::with_capacity(points);
    for j in 0..points {
        let r = top * j as f64 / (points - 1) as f64;
        grid.push(ExponentPoint {
            target_risk: r,
            exact: exact_exponent(r)?,
            approx: approx_exponent(r),
        });
    }
    let e0 = exact_exponent(0.0)?;
    let max_err = grid.iter().map(|p| (p.exact - p.approx).abs()).fold(0.0, f64::max);
    let (bound, bound_skipped) = match bound_section(cfg, &pi)? {
        Ok(b) => (Some(b), None),
        Err(why) => (None, Some(why)),
    };
    let report = TheoryReport {
        four_e_zero_reference: FOUR_E_ZERO,
        four_e_zero: 4.0 * e0,
        exponent_grid: grid,
        max_approx_error: max_err,
        max_approx_error_relative_to_e0: max_err / e0,
        perron: pi.into_vec(),
        bound,
        bound_skipped,
    };
    let mut out = open_output(cfg)?;
    out.json("theory.json", &report)?;
    out.finish("theory")
}

#[derive(Serialize)]
struct DataReport {
    agents: usize,
    classes: usize,
    agent_dims: Vec<usize>,
    class_counts: Option<Vec<usize>>,
    files: Vec<(String, String)>,
    graph_agents: usize,
}

/// Loads and checks the data source (hashes, shapes, class coverage).
pub fn cmd_validate_data(cfg: &LoadedConfig) -> Result<Manifest> {
    let files = if let crate::experiment::config::DataConfig::Images { manifest, .. } = &cfg.config.data {
        let path = cfg.resolve(manifest);
        let m: crate::data::io::DatasetManifest = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        m.verify(path.parent().unwrap_or(std::path::Path::new(".")))?
    } else {
        Vec::new()
    };
    let source = Source::load(cfg)?;
    let a = build_graph(cfg)?;
    check_agents(&source, a.size())?;
    if let Some(counts) = source.class_counts() {
        let need = cfg.config.data.train_per_class();
        if let Some((c, n)) = counts.iter().enumerate().find(|(_, &n)| n < need) {
            return Err(Error::Config(format!("class {c} has {n} samples, {need} needed for training")));
        }
    }
    let report = DataReport {
        agents: source.num_agents(),
        classes: source.num_classes(),
        agent_dims: (0..source.num_agents()).map(|k| source.agent_dim(k)).collect(),
        class_counts: source.class_counts(),
        files,
        graph_agents: a.size(),
    };
    let mut out = open_output(cfg)?;
    out.json("data_report.json", &report)?;
    out.finish("validate-data")
}
