// SPDX-License-Identifier: Apache-2.0

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::stream::SceneSource;
use crate::error::{Error, Result};

/// One class-conditional Gaussian `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianClass {
    pub mean: Vec<f64>,
    /// Row-major `d x d` covariance.
    pub cov: Vec<Vec<f64>>,
}

/// Likelihoods `L_k(h | gamma)` of one agent, indexed by class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentLikelihoods {
    pub classes: Vec<GaussianClass>,
}

/// Per-agent, per-class Gaussian likelihood models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSceneSpec {
    pub agents: Vec<AgentLikelihoods>,
}

#[derive(Debug, Clone)]
struct Factor {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    inv: DMatrix<f64>,
    log_norm: f64,
}

/// A validated scene with cached Cholesky factors.
#[derive(Debug, Clone)]
pub struct GaussianScene {
    spec: GaussianSceneSpec,
    factors: Vec<Vec<Factor>>,
    num_classes: usize,
}

impl GaussianClass {
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Self {
        let d = mean.len();
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { variance } else { 0.0 }).collect())
            .collect();
        GaussianClass { mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn factor(&self) -> Result<Factor> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::invalid("Gaussian with zero dimension"));
        }
        if self.cov.len() != d || self.cov.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: self.cov.len(),
                context: "covariance shape",
            });
        }
        let cov = DMatrix::from_fn(d, d, |i, j| self.cov[i][j]);
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * (1.0 + cov[(i, j)].abs()) {
                    return Err(Error::invalid("covariance is not symmetric"));
                }
            }
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::invalid("covariance is not positive definite"))?;
        let l = chol.l();
        if (0..d).any(|i| !(l[(i, i)] > 1e-150)) {
            return Err(Error::invalid("covariance is not positive definite"));
        }
        let log_det: f64 = 2.0 * (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
        let inv = chol.inverse();
        Ok(Factor {
            mean: DVector::from_column_slice(&self.mean),
            chol: l,
            inv,
            log_norm: -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det),
        })
    }
}

impl GaussianSceneSpec {
    /// Four agents observing 2-D features; only agent index 1 is
    /// informative. Class 0 (`+1`) is `N(0, I)` everywhere; class 1 (`-1`)
    /// is `N(0, 1.5 I)` for agent 1 and `N(0, I)` for the others.
    pub fn four_agent_variance_scene() -> Self {
        let g1 = GaussianClass::isotropic(vec![0.0, 0.0], 1.0);
        let g2 = GaussianClass::isotropic(vec![0.0, 0.0], 1.5);
        let agents = (0..4)
            .map(|k| AgentLikelihoods {
                classes: vec![g1.clone(), if k == 1 { g2.clone() } else { g1.clone() }],
            })
            .collect();
        GaussianSceneSpec { agents }
    }

    /// `K` agents with scalar features `N(+m_k, 1)` under class 0 and
    /// `N(-m_k, 1)` under class 1.
    pub fn shifted_means(means: &[f64]) -> Self {
        let agents = means
            .iter()
            .map(|&m| AgentLikelihoods {
                classes: vec![
                    GaussianClass::isotropic(vec![m], 1.0),
                    GaussianClass::isotropic(vec![-m], 1.0),
                ],
            })
            .collect();
        GaussianSceneSpec { agents }
    }

    pub fn build(self) -> Result<GaussianScene> {
        if self.agents.is_empty() {
            return Err(Error::Empty("Gaussian scene"));
        }
        let num_classes = self.agents[0].classes.len();
        if num_classes < 2 {
            return Err(Error::invalid("scene needs at least two classes"));
        }
        let mut factors = Vec::with_capacity(self.agents.len());
        for (k, a) in self.agents.iter().enumerate() {
            if a.classes.len() != num_classes {
                return Err(Error::invalid(format!(
                    "agent {k} has {} classes, expected {num_classes}",
                    a.classes.len()
                )));
            }
            let d = a.classes[0].dim();
            if a.classes.iter().any(|c| c.dim() != d) {
                return Err(Error::invalid(format!("agent {k} classes differ in dimension")));
            }
            factors.push(a.classes.iter().map(GaussianClass::factor).collect::<Result<Vec<_>>>()?);
        }
        Ok(GaussianScene {
            spec: self,
            factors,
            num_classes,
        })
    }
}

impl GaussianScene {
    pub fn spec(&self) -> &GaussianSceneSpec {
        &self.spec
    }

    pub fn dim(&self, agent: usize) -> usize {
        self.spec.agents[agent].classes[0].dim()
    }

    fn check(&self, agent: usize, class: usize) -> Result<()> {
        if agent >= self.factors.len() {
            return Err(Error::OutOfRange(format!("agent {agent}")));
        }
        if class >= self.num_classes {
            return Err(Error::OutOfRange(format!("class {class}")));
        }
        Ok(())
    }

    /// One draw from `L_agent(. | class)`.
    pub fn draw<R: Rng + ?Sized>(&self, agent: usize, class: usize, rng: &mut R) -> Vec<f64> {
        let f = &self.factors[agent][class];
        let d = f.mean.len();
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&f.mean + &f.chol * z).iter().copied().collect()
    }

    /// `n` i.i.d. draws, deterministic in `seed`.
    pub fn sample(&self, agent: usize, class: usize, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.check(agent, class)?;
        let mut rng = crate::seed::rng(seed);
        Ok((0..n).map(|_| self.draw(agent, class, &mut rng)).collect())
    }

    pub fn log_density(&self, agent: usize, class: usize, h: &[f64]) -> Result<f64> {
        self.check(agent, class)?;
        let f = &self.factors[agent][class];
        if h.len() != f.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: f.mean.len(),
                actual: h.len(),
                context: "feature vector",
            });
        }
        let diff = DVector::from_column_slice(h) - &f.mean;
        let q = (diff.transpose() * &f.inv * &diff)[(0, 0)];
        Ok(f.log_norm - 0.5 * q)
    }

    /// True binary log-likelihood ratio `log L(h|0) / L(h|1)`.
    pub fn log_likelihood_ratio(&self, agent: usize, h: &[f64]) -> Result<f64> {
        Ok(self.log_density(agent, 0, h)? - self.log_density(agent, 1, h)?)
    }
}

impl SceneSource for GaussianScene {
    fn num_agents(&self) -> usize {
        self.factors.len()
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn draw_scene(&self, class: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<Vec<f64>>> {
        if class >= self.num_classes {
            return Err(Error::OutOfRange(format!("class {class} missing from scene")));
        }
        Ok((0..self.num_agents()).map(|k| self.draw(k, class, rng)).collect())
    }
}
