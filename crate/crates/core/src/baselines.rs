// SPDX-License-Identifier: Apache-2.0

//! Centralized AdaBoost over the per-agent classifiers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sign_of_class, train_weighted, LabeledDataset, MlpArchitecture, MlpModel, TrainingHyperparameters};

/// Weighted errors are kept inside `[ERR_CLAMP, 1 - ERR_CLAMP]`.
pub const ERR_CLAMP: f64 = 1e-10;

/// `+1` for nonnegative `x`, `-1` otherwise.
pub fn sign(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// Boosting weight `0.5 log((1 - err) / err)` of a clamped error, and
/// whether clamping was needed.
pub fn boosting_weight(err: f64) -> (f64, bool) {
    let clamped = err.clamp(ERR_CLAMP, 1.0 - ERR_CLAMP);
    (0.5 * ((1.0 - clamped) / clamped).ln(), clamped != err)
}

/// Outcome of the sequential reweighting rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRounds {
    pub weights: Vec<f64>,
    pub errors: Vec<f64>,
    pub clamped: Vec<bool>,
    /// Sample weights before round 1 and after every round.
    pub sample_weights: Vec<Vec<f64>>,
}

/// Runs `rounds` AdaBoost rounds. `fit(round, sample_weights)` trains the
/// round's learner and returns its `+1/-1` decisions on the training
/// samples.
pub fn adaboost_rounds<F>(labels: &[i8], rounds: usize, mut fit: F) -> Result<BoostRounds>
where
    F: FnMut(usize, &[f64]) -> Result<Vec<i8>>,
{
    let n = labels.len();
    if n == 0 {
        return Err(Error::Empty("boosting samples"));
    }
    let mut w = vec![1.0 / n as f64; n];
    let mut out = BoostRounds {
        weights: Vec::with_capacity(rounds),
        errors: Vec::with_capacity(rounds),
        clamped: Vec::with_capacity(rounds),
        sample_weights: vec![w.clone()],
    };
    for r in 0..rounds {
        let pred = fit(r, &w)?;
        if pred.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: pred.len(),
                context: "weak learner predictions",
            });
        }
        let err: f64 = w
            .iter()
            .zip(pred.iter().zip(labels))
            .filter(|(_, (p, y))| p != y)
            .map(|(wn, _)| wn)
            .sum();
        let (a, clamped) = boosting_weight(err);
        if clamped {
            log::warn!("boosting round {r}: degenerate weighted error {err}, clamped");
        }
        for ((wn, &p), &y) in w.iter_mut().zip(&pred).zip(labels) {
            *wn *= (-a * f64::from(p) * f64::from(y)).exp();
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        out.weights.push(a);
        out.errors.push(err);
        out.clamped.push(clamped);
        out.sample_weights.push(w.clone());
    }
    Ok(out)
}

/// `sign(sum_k a_k votes_k)` with `sign(0) = +1`.
pub fn weighted_vote(weights: &[f64], votes: &[i8]) -> i8 {
    sign(weights.iter().zip(votes).map(|(a, &v)| a * f64::from(v)).sum())
}

/// Boosted ensemble of per-agent MLPs.
#[derive(Debug, Clone)]
pub struct BoostedEnsemble {
    pub models: Vec<MlpModel>,
    pub rounds: BoostRounds,
}

/// Serialized ensemble: model files by path plus boosting weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub models: Vec<String>,
    pub rounds: BoostRounds,
}

impl BoostedEnsemble {
    pub fn num_agents(&self) -> usize {
        self.models.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.rounds.weights
    }

    /// Writes `model_<k>.json` files and `ensemble.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut names = Vec::with_capacity(self.models.len());
        for (k, m) in self.models.iter().enumerate() {
            let name = format!("model_{k}.json");
            m.save(&dir.join(&name))?;
            names.push(name);
        }
        let file = EnsembleFile {
            models: names,
            rounds: self.rounds.clone(),
        };
        std::fs::write(dir.join("ensemble.json"), serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    /// Model paths are resolved relative to the ensemble file.
    pub fn load(path: &Path) -> Result<Self> {
        let file: EnsembleFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let models = file
            .models
            .iter()
            .map(|p| MlpModel::load(&base.join(p)))
            .collect::<Result<Vec<_>>>()?;
        if models.len() != file.rounds.weights.len() {
            return Err(Error::Format("ensemble weights and models differ in count".into()));
        }
        Ok(BoostedEnsemble {
            models,
            rounds: file.rounds,
        })
    }
}

/// Hard `+1/-1` decision of one model.
fn hard_decision(model: &MlpModel, h: &[f64]) -> Result<i8> {
    Ok(sign(model.logit(h)?))
}

/// Trains agents in ascending index order, each on its own view of the
/// shared samples under the current boosting weights.
pub fn adaboost_train(
    views: &[LabeledDataset],
    archs: &[MlpArchitecture],
    hyper: &[TrainingHyperparameters],
) -> Result<BoostedEnsemble> {
    let first = views.first().ok_or(Error::Empty("agent views"))?;
    if archs.len() != views.len() || hyper.len() != views.len() {
        return Err(Error::DimensionMismatch {
            expected: views.len(),
            actual: archs.len().min(hyper.len()),
            context: "per-agent architectures and hyperparameters",
        });
    }
    if first.num_classes != 2 {
        return Err(Error::invalid("AdaBoost baseline is binary"));
    }
    if views.iter().any(|v| v.labels != first.labels) {
        return Err(Error::invalid("agent views must share the same labels"));
    }
    let labels = first
        .labels
        .iter()
        .map(|&c| Ok(sign_of_class(c)? as i8))
        .collect::<Result<Vec<i8>>>()?;
    let mut models = Vec::with_capacity(views.len());
    let rounds = adaboost_rounds(&labels, views.len(), |k, w| {
        let model = train_weighted(&views[k], &archs[k], &hyper[k], Some(w))?.model;
        let pred = views[k]
            .features
            .iter()
            .map(|h| hard_decision(&model, h))
            .collect::<Result<Vec<_>>>()?;
        models.push(model);
        Ok(pred)
    })?;
    Ok(BoostedEnsemble { models, rounds })
}

/// Ensemble decision from the agents' features at one time step.
pub fn adaboost_decide(ensemble: &BoostedEnsemble, features: &[Vec<f64>]) -> Result<i8> {
    if features.len() != ensemble.num_agents() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.num_agents(),
            actual: features.len(),
            context: "agents in ensemble decision",
        });
    }
    let votes = ensemble
        .models
        .iter()
        .zip(features)
        .map(|(m, h)| hard_decision(m, h))
        .collect::<Result<Vec<_>>>()?;
    Ok(weighted_vote(ensemble.weights(), &votes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gaussian_training_set, GaussianSceneSpec};

    #[test]
    fn perfect_learner_weight() {
        let (a, clamped) = boosting_weight(0.0);
        assert!(clamped);
        assert!((a - 0.5 * ((1.0 - 1e-10) / 1e-10f64).ln()).abs() < 1e-12);
        assert!((a - 11.51).abs() < 5e-3);
        assert_eq!(boosting_weight(0.5).0, 0.0);
    }

    #[test]
    fn vote_arithmetic() {
        assert_eq!(weighted_vote(&[1.0, 1.0, 1.0], &[1, 1, 1]), 1);
        assert_eq!(weighted_vote(&[3.0, 1.0, 1.0], &[-1, 1, 1]), -1);
        assert_eq!(weighted_vote(&[1.0, 1.0], &[-1, 1]), 1);
        assert_eq!(weighted_vote(&[30.0, 10.0, 10.0], &[-1, 1, 1]), -1);
    }

    #[test]
    fn stumps_boost_to_zero_error() {
        let xs: Vec<f64> = (1..=20).map(f64::from).collect();
        let labels: Vec<i8> = xs.iter().map(|&x| if (6.0..=15.0).contains(&x) { 1 } else { -1 }).collect();
        let learners: [fn(f64) -> i8; 3] = [
            |x| if x >= 6.0 { 1 } else { -1 },
            |x| if x <= 15.0 { 1 } else { -1 },
            |_| -1,
        ];
        let rounds = adaboost_rounds(&labels, 3, |r, _| Ok(xs.iter().map(|&x| learners[r](x)).collect())).unwrap();
        let expect = [0.5 * 3f64.ln(), 0.5 * 5f64.ln(), 0.5 * 4f64.ln()];
        for (a, e) in rounds.weights.iter().zip(expect) {
            assert!((a - e).abs() < 1e-12);
        }
        for w in &rounds.sample_weights {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&v| v >= 0.0));
        }
        // evaluate every point directly against the labels
        let mut ensemble_errors = 0;
        for (&x, &y) in xs.iter().zip(&labels) {
            let votes: Vec<i8> = learners.iter().map(|f| f(x)).collect();
            if weighted_vote(&rounds.weights, &votes) != y {
                ensemble_errors += 1;
            }
        }
        assert_eq!(ensemble_errors, 0);
        for f in &learners {
            assert!(xs.iter().zip(&labels).any(|(&x, &y)| f(x) != y));
        }
    }

    #[test]
    fn single_agent_reduces_to_weighted_training() {
        let scene = GaussianSceneSpec::shifted_means(&[1.0]).build().unwrap();
        let d = gaussian_training_set(&scene, 0, 40, 1).unwrap();
        let arch = MlpArchitecture::new(1, &[4], 2);
        let hyper = TrainingHyperparameters {
            epochs: 20,
            batch_size: 10,
            learning_rate: 0.1,
            seed: 9,
        };
        let ens = adaboost_train(std::slice::from_ref(&d), std::slice::from_ref(&arch), &[hyper]).unwrap();
        let uniform = vec![1.0 / 80.0; 80];
        let direct = train_weighted(&d, &arch, &hyper, Some(&uniform)).unwrap().model;
        assert_eq!(ens.models[0].weights(), direct.weights());
        let err = d
            .iter()
            .filter(|(h, &c)| hard_decision(&direct, h).unwrap() != sign_of_class(c).unwrap() as i8)
            .count() as f64
            / 80.0;
        assert!((ens.rounds.errors[0] - err).abs() < 1e-12);
        assert!((ens.weights()[0] - boosting_weight(err).0).abs() < 1e-12);
    }

    #[test]
    fn decisions_are_scale_invariant_and_roundtrip() {
        let scene = GaussianSceneSpec::shifted_means(&[1.0, 0.5]).build().unwrap();
        let views: Vec<_> = (0..2).map(|k| gaussian_training_set(&scene, k, 30, 2).unwrap()).collect();
        // both views must share labels; gaussian_training_set orders by class
        let arch = MlpArchitecture::new(1, &[3], 2);
        let hyper = TrainingHyperparameters {
            epochs: 5,
            batch_size: 6,
            learning_rate: 0.05,
            seed: 1,
        };
        let mut ens = adaboost_train(&views, &[arch.clone(), arch], &[hyper, hyper]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ens.save(dir.path()).unwrap();
        let back = BoostedEnsemble::load(&dir.path().join("ensemble.json")).unwrap();
        let probe: Vec<Vec<Vec<f64>>> = (0..20).map(|i| vec![vec![i as f64 * 0.2 - 2.0], vec![1.0 - i as f64 * 0.1]]).collect();
        let before: Vec<i8> = probe.iter().map(|f| adaboost_decide(&ens, f).unwrap()).collect();
        assert_eq!(before, probe.iter().map(|f| adaboost_decide(&back, f).unwrap()).collect::<Vec<_>>());
        ens.rounds.weights.iter_mut().for_each(|a| *a *= 7.5);
        assert_eq!(before, probe.iter().map(|f| adaboost_decide(&ens, f).unwrap()).collect::<Vec<_>>());
    }

    #[test]
    fn mismatched_labels_rejected() {
        let a = LabeledDataset::new(vec![vec![0.0], vec![1.0]], vec![0, 1], 2).unwrap();
        let b = LabeledDataset::new(vec![vec![0.0], vec![1.0]], vec![1, 0], 2).unwrap();
        let arch = MlpArchitecture::new(1, &[], 2);
        let hyper = TrainingHyperparameters {
            epochs: 1,
            batch_size: 1,
            learning_rate: 0.1,
            seed: 0,
        };
        assert!(adaboost_train(&[a, b], &[arch.clone(), arch], &[hyper, hyper]).is_err());
    }
}
