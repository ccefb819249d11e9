// SPDX-License-Identifier: Apache-2.0

//! Consistency guarantees in executable form: the error exponent of the
//! target risk, the lower bound on the probability of consistent learning,
//! imbalance penalties, network complexity and sample complexity.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::PerronVector;

/// Slope constant of the linear approximation: `4 E(0)` rounded to four
/// digits.
pub const FOUR_E_ZERO: f64 = 0.2812;

/// Root `y* > 1` of `e^R y^3 - y - 1 = 0`.
pub fn exponent_root(target_risk: f64) -> Result<f64> {
    if !(0.0..LN_2).contains(&target_risk) {
        return Err(Error::OutOfRange(format!(
            "target risk {target_risk} must lie in [0, log 2)"
        )));
    }
    let a = target_risk.exp();
    let f = |y: f64| a * y * y * y - y - 1.0;
    // f(1) = e^R - 2 < 0 and f(2) = 8 e^R - 3 > 0; f is increasing on y > 1
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = 3.0 * a * y * y - 1.0;
        let next = y - f(y) / d;
        if next > 1.0 && next.is_finite() {
            y = next;
        }
    }
    Ok(y)
}

/// Exact error exponent `E(R) = log(y*) / 4`.
pub fn exact_exponent(target_risk: f64) -> Result<f64> {
    Ok(0.25 * exponent_root(target_risk)?.ln())
}

/// Linear approximation `E(R) ~ E(0) (1 - R / log 2)` with
/// `E(0) = 0.2812 / 4`.
pub fn approx_exponent(target_risk: f64) -> f64 {
    0.25 * approx_scaled_exponent(target_risk)
}

/// The same approximation on the `4 E` scale: `0.2812 (1 - R / log 2)`.
pub fn approx_scaled_exponent(target_risk: f64) -> f64 {
    FOUR_E_ZERO * (1.0 - target_risk / LN_2)
}

/// Training-set sizes and the imbalance penalties derived from them.
#[derive(Debug, Clone, Serialize)]
pub struct TrainingProfile {
    pub counts: Vec<usize>,
    pub n_max: usize,
    /// `alpha_k = N_max / N_k`
    pub alpha_k: Vec<f64>,
    /// `alpha = sum_k pi_k alpha_k`
    pub alpha: f64,
    pub pi: Vec<f64>,
}

impl TrainingProfile {
    pub fn new(counts: Vec<usize>, pi: &PerronVector) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Empty("training profile"));
        }
        if counts.len() != pi.len() {
            return Err(Error::DimensionMismatch {
                expected: pi.len(),
                actual: counts.len(),
                context: "sample counts vs Perron vector",
            });
        }
        if counts.contains(&0) {
            return Err(Error::invalid("every agent needs at least one sample"));
        }
        let n_max = *counts.iter().max().expect("nonempty");
        let alpha_k: Vec<f64> = counts.iter().map(|&n| n_max as f64 / n as f64).collect();
        let alpha = if counts.iter().all(|&n| n == n_max) {
            1.0
        } else {
            pi.weighted_sum(&alpha_k)
        };
        Ok(TrainingProfile {
            counts,
            n_max,
            alpha_k,
            alpha,
            pi: pi.as_slice().to_vec(),
        })
    }

    /// `alpha` computed as `N_max sum_k pi_k / N_k`.
    pub fn alpha_alternative(&self) -> f64 {
        self.n_max as f64
            * self
                .pi
                .iter()
                .zip(&self.counts)
                .map(|(p, &n)| p / n as f64)
                .sum::<f64>()
    }
}

/// Logit bound: one network-wide `beta`, or per-agent `beta_k`.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogitBound {
    Uniform(f64),
    PerAgent(Vec<f64>),
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundInputs {
    pub target_risk: f64,
    pub beta: LogitBound,
    pub rho: f64,
    pub profile: TrainingProfile,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub exponent: f64,
    pub rho: f64,
    /// `alpha beta`, or `sum_k pi_k alpha_k beta_k` for per-agent bounds.
    pub scale: f64,
    /// `1 - 2 exp{-8 N_max (E - rho)^2 / scale^2}` before clamping.
    pub raw: f64,
    /// `raw` clamped to `[0, 1)`.
    pub value: f64,
    /// Set when `rho >= E(R)`; the bound carries no information.
    pub vacuous: bool,
}

/// Lower bound on the probability of consistent learning.
pub fn pc_lower_bound(inputs: &BoundInputs) -> Result<BoundReport> {
    let exponent = exact_exponent(inputs.target_risk)?;
    if !(inputs.rho >= 0.0) {
        return Err(Error::invalid("Rademacher complexity must be nonnegative"));
    }
    let p = &inputs.profile;
    let scale = match &inputs.beta {
        LogitBound::Uniform(b) => {
            if !(*b > 0.0) {
                return Err(Error::invalid("beta must be positive"));
            }
            p.alpha * b
        }
        LogitBound::PerAgent(bs) => {
            if bs.len() != p.counts.len() {
                return Err(Error::DimensionMismatch {
                    expected: p.counts.len(),
                    actual: bs.len(),
                    context: "per-agent beta",
                });
            }
            if bs.iter().any(|b| !(*b > 0.0)) {
                return Err(Error::invalid("beta_k must be positive"));
            }
            p.pi
                .iter()
                .zip(&p.alpha_k)
                .zip(bs)
                .map(|((pi, a), b)| pi * a * b)
                .sum()
        }
    };
    let gap = exponent - inputs.rho;
    let vacuous = gap <= 0.0;
    let raw = if vacuous {
        // exponent treated as zero
        -1.0
    } else {
        1.0 - 2.0 * (-8.0 * p.n_max as f64 * gap * gap / (scale * scale)).exp()
    };
    Ok(BoundReport {
        exponent,
        rho: inputs.rho,
        scale,
        raw,
        value: raw.clamp(0.0, 1.0),
        vacuous,
    })
}

/// `C = sum_k pi_k C_k sqrt(alpha_k)` and `rho <= C / sqrt(N_max)`.
/// Returns `(rho_bound, C)`.
pub fn network_complexity_bound(constants: &[f64], profile: &TrainingProfile) -> Result<(f64, f64)> {
    if constants.len() != profile.counts.len() {
        return Err(Error::DimensionMismatch {
            expected: profile.counts.len(),
            actual: constants.len(),
            context: "complexity constants",
        });
    }
    if constants.iter().any(|c| !(*c >= 0.0)) {
        return Err(Error::invalid("complexity constants must be nonnegative"));
    }
    let c: f64 = profile
        .pi
        .iter()
        .zip(constants)
        .zip(&profile.alpha_k)
        .map(|((p, ck), a)| p * ck * a.sqrt())
        .sum();
    Ok((c / (profile.n_max as f64).sqrt(), c))
}

/// Smallest integer `N_max` exceeding
/// `(C/E)^2 (1 + (alpha beta / 2C) sqrt(log(2/eps) / 2))^2`.
pub fn sample_complexity(c: f64, target_risk: f64, alpha: f64, beta: f64, eps: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::OutOfRange(format!("epsilon {eps} must lie in (0, 1)")));
    }
    if !(c > 0.0) || !(alpha >= 1.0) || !(beta > 0.0) {
        return Err(Error::invalid("need C > 0, alpha >= 1, beta > 0"));
    }
    let e = exact_exponent(target_risk)?;
    let threshold = sample_complexity_threshold(c, e, alpha, beta, eps);
    if !threshold.is_finite() || threshold >= u64::MAX as f64 {
        return Err(Error::OutOfRange("sample complexity overflows".into()));
    }
    Ok(threshold.floor() as u64 + 1)
}

fn sample_complexity_threshold(c: f64, e: f64, alpha: f64, beta: f64, eps: f64) -> f64 {
    let lead = (c / e).powi(2);
    let bracket = 1.0 + alpha * beta / (2.0 * c) * (0.5 * (2.0 / eps).ln()).sqrt();
    lead * bracket * bracket
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfCheck {
    pub n_max: Option<u64>,
    pub bound: Option<f64>,
    pub passed: bool,
    pub skipped: bool,
}

/// Plugs `N = sample_complexity(...)` and `rho = C / sqrt(N)` into the
/// consistency bound and checks it reaches `1 - eps`. Inputs where the
/// exponent vanishes are skipped.
pub fn self_consistency_check(c: f64, target_risk: f64, alpha: f64, beta: f64, eps: f64) -> Result<SelfCheck> {
    let e = exact_exponent(target_risk)?;
    if e <= 0.0 {
        return Ok(SelfCheck {
            n_max: None,
            bound: None,
            passed: false,
            skipped: true,
        });
    }
    let n = sample_complexity(c, target_risk, alpha, beta, eps)?;
    let first_condition = n as f64 > (c / e).powi(2);
    let rho = c / (n as f64).sqrt();
    let gap = e - rho;
    let bound = 1.0 - 2.0 * (-8.0 * n as f64 * gap * gap / (alpha * beta).powi(2)).exp();
    Ok(SelfCheck {
        n_max: Some(n),
        bound: Some(bound),
        passed: first_condition && gap > 0.0 && bound >= 1.0 - eps,
        skipped: false,
    })
}

/// Rademacher bound for norm-constrained MLPs:
/// `(4 / sqrt(N)) (2 b L_sigma)^(L-1) b c sqrt(log(2 n0))`.
pub fn mlp_rademacher_constant(depth: usize, b: f64, lipschitz: f64, c: f64, n0: usize) -> f64 {
    4.0 * (2.0 * b * lipschitz).powi(depth as i32 - 1) * b * c * ((2 * n0) as f64).ln().sqrt()
}
