// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::risk::log_softmax;
use crate::seed;

/// Clamp applied to exponent arguments.
pub const EXP_CLAMP: f64 = 500.0;

/// Hidden-layer activation. All variants satisfy `sigma(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed in terms of the pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn lipschitz(self) -> f64 {
        1.0
    }
}

/// Layer sizes and constraints of a multilayer perceptron.
///
/// `input_dim` counts raw features. With `bias` set, a constant 1 is appended
/// to every input, so the first weight matrix has `input_dim + 1` columns and
/// `n0()` reports the augmented width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    /// Hidden layer widths followed by the output width `M`.
    pub layers: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default = "default_bias")]
    pub bias: bool,
    /// Max column-sum norm allowed for every weight matrix.
    #[serde(default)]
    pub norm_bound: Option<f64>,
    /// Bound on `|feature entry|`.
    #[serde(default)]
    pub input_bound: Option<f64>,
}

fn default_bias() -> bool {
    true
}

impl MlpArchitecture {
    pub fn new(input_dim: usize, hidden: &[usize], outputs: usize) -> Self {
        let mut layers = hidden.to_vec();
        layers.push(outputs);
        MlpArchitecture {
            input_dim,
            layers,
            activation: Activation::Tanh,
            bias: true,
            norm_bound: None,
            input_bound: None,
        }
    }

    pub fn with_activation(mut self, a: Activation) -> Self {
        self.activation = a;
        self
    }

    pub fn with_bias(mut self, bias: bool) -> Self {
        self.bias = bias;
        self
    }

    pub fn with_norm_bound(mut self, b: f64) -> Self {
        self.norm_bound = Some(b);
        self
    }

    pub fn with_input_bound(mut self, c: f64) -> Self {
        self.input_bound = Some(c);
        self
    }

    /// Width of the (augmented) input layer.
    pub fn n0(&self) -> usize {
        self.input_dim + usize::from(self.bias)
    }

    /// Number of weight layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn num_classes(&self) -> usize {
        *self.layers.last().expect("validated architecture")
    }

    /// `(rows, cols)` of each weight matrix.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let mut prev = self.n0();
        self.layers
            .iter()
            .map(|&n| {
                let s = (n, prev);
                prev = n;
                s
            })
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.shapes().iter().map(|(r, c)| r * c).sum()
    }

    /// Bound on entries of the augmented input: `max(c, 1)` when a bias
    /// feature is present.
    pub fn effective_input_bound(&self) -> Option<f64> {
        self.input_bound
            .map(|c| if self.bias { c.max(1.0) } else { c })
    }

    /// `|logit| <= 2 (b L_sigma)^(L-1) b c n0` for norm-bounded models.
    pub fn logit_bound(&self) -> Option<f64> {
        let b = self.norm_bound?;
        let c = self.effective_input_bound()?;
        let l = self.depth() as i32;
        let ls = self.activation.lipschitz();
        Some(2.0 * (b * ls).powi(l - 1) * b * c * self.n0() as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("architecture needs at least one layer"));
        }
        if self.n0() == 0 || self.layers.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        if let Some(b) = self.norm_bound {
            if !(b > 0.0) {
                return Err(Error::invalid("norm bound must be positive"));
            }
        }
        if let Some(c) = self.input_bound {
            if !(c > 0.0) {
                return Err(Error::invalid("input bound must be positive"));
            }
        }
        Ok(())
    }
}

/// Output of [`MlpModel::forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Output-layer pre-activations `z`.
    pub z: Vec<f64>,
    /// `softmax(z)`.
    pub posteriors: Vec<f64>,
}

/// Multilayer perceptron `z = W_L sigma(... sigma(W_1 h))` with softmax
/// outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    arch: MlpArchitecture,
    // weights[l] is row-major with shape arch.shapes()[l]
    weights: Vec<Vec<f64>>,
}

/// Per-layer gradient with the same layout as the weights.
pub type Gradients = Vec<Vec<f64>>;

struct Trace {
    // inputs[l]: input to layer l (augmented h for l = 0, sigma(g_{l-1}) after)
    inputs: Vec<Vec<f64>>,
    // pre[l]: g_l = W_l inputs[l]
    pre: Vec<Vec<f64>>,
}

impl MlpModel {
    pub fn zeros(arch: MlpArchitecture) -> Result<Self> {
        arch.validate()?;
        let weights = arch.shapes().iter().map(|(r, c)| vec![0.0; r * c]).collect();
        Ok(MlpModel { arch, weights })
    }

    /// Uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn random(arch: MlpArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = seed::rng(seed);
        let weights = arch
            .shapes()
            .iter()
            .map(|&(r, c)| {
                let s = 1.0 / (c as f64).sqrt();
                (0..r * c).map(|_| rng.random_range(-s..=s)).collect()
            })
            .collect();
        let mut m = MlpModel { arch, weights };
        m.project();
        Ok(m)
    }

    pub fn from_weights(arch: MlpArchitecture, weights: Vec<Vec<f64>>) -> Result<Self> {
        arch.validate()?;
        let shapes = arch.shapes();
        if weights.len() != shapes.len() {
            return Err(Error::DimensionMismatch {
                expected: shapes.len(),
                actual: weights.len(),
                context: "number of weight matrices",
            });
        }
        for (w, (r, c)) in weights.iter().zip(&shapes) {
            if w.len() != r * c {
                return Err(Error::DimensionMismatch {
                    expected: r * c,
                    actual: w.len(),
                    context: "weight matrix size",
                });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("model weight".into()));
            }
        }
        let m = MlpModel { arch, weights };
        if let Some(b) = m.arch.norm_bound {
            for (l, n) in m.column_norms().iter().enumerate() {
                if *n > b * (1.0 + 1e-12) {
                    return Err(Error::invalid(format!(
                        "layer {} has column-sum norm {n} above bound {b}",
                        l + 1
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn architecture(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes()
    }

    /// `||W_l||_1` (max column sum of absolute values) for every layer.
    pub fn column_norms(&self) -> Vec<f64> {
        self.arch
            .shapes()
            .iter()
            .zip(&self.weights)
            .map(|(&(r, c), w)| {
                (0..c)
                    .map(|j| (0..r).map(|i| w[i * c + j].abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// Rescales every column whose absolute sum exceeds the norm bound.
    pub fn project(&mut self) {
        let Some(b) = self.arch.norm_bound else {
            return;
        };
        for (&(r, c), w) in self.arch.shapes().iter().zip(self.weights.iter_mut()) {
            for j in 0..c {
                let s: f64 = (0..r).map(|i| w[i * c + j].abs()).sum();
                if s > b {
                    let f = b / s;
                    (0..r).for_each(|i| w[i * c + j] *= f);
                }
            }
        }
    }

    fn augment(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.arch.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.arch.input_dim,
                actual: h.len(),
                context: "feature vector",
            });
        }
        let mut x = Vec::with_capacity(self.arch.n0());
        x.extend_from_slice(h);
        if self.arch.bias {
            x.push(1.0);
        }
        Ok(x)
    }

    fn run(&self, h: &[f64]) -> Result<Trace> {
        let shapes = self.arch.shapes();
        let act = self.arch.activation;
        let mut inputs = Vec::with_capacity(shapes.len());
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(shapes.len());
        let mut cur = self.augment(h)?;
        for (l, (&(r, c), w)) in shapes.iter().zip(&self.weights).enumerate() {
            if l > 0 {
                cur = pre[l - 1].iter().map(|&g| act.apply(g)).collect();
            }
            let g: Vec<f64> = (0..r)
                .map(|i| {
                    w[i * c..(i + 1) * c]
                        .iter()
                        .zip(&cur)
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect();
            inputs.push(std::mem::take(&mut cur));
            pre.push(g);
        }
        Ok(Trace { inputs, pre })
    }

    /// Output pre-activations `z`.
    pub fn outputs(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.run(h)?.pre.pop().expect("at least one layer"))
    }

    pub fn forward(&self, h: &[f64]) -> Result<ForwardOutput> {
        let z = self.outputs(h)?;
        let posteriors = log_softmax(&z).into_iter().map(f64::exp).collect();
        Ok(ForwardOutput { z, posteriors })
    }

    /// Binary logit `z_0 - z_1`: class index 0 stands for `+1`, index 1 for
    /// `-1`.
    pub fn logit(&self, h: &[f64]) -> Result<f64> {
        let z = self.outputs(h)?;
        if z.len() < 2 {
            return Err(Error::invalid("logit needs at least two outputs"));
        }
        Ok(z[0] - z[1])
    }

    /// Pairwise logits against reference class 0: `z_0 - z_g` for
    /// `g = 1..M`.
    pub fn logits_vs_reference(&self, h: &[f64]) -> Result<Vec<f64>> {
        let z = self.outputs(h)?;
        Ok(z[1..].iter().map(|zg| z[0] - zg).collect())
    }

    /// Zero gradient buffer shaped like the weights.
    pub fn zero_gradients(&self) -> Gradients {
        self.arch.shapes().iter().map(|(r, c)| vec![0.0; r * c]).collect()
    }

    /// Backpropagates an output-gradient `dz` (w.r.t. `z`) to the weights.
    pub fn backward(&self, h: &[f64], dz: &[f64]) -> Result<Gradients> {
        let trace = self.run(h)?;
        let mut out = self.zero_gradients();
        self.backprop(&trace, dz.to_vec(), 1.0, &mut out);
        Ok(out)
    }

    // out += scale * d(.)/dW given delta = d(.)/dz
    fn backprop(&self, trace: &Trace, dz: Vec<f64>, scale: f64, out: &mut Gradients) {
        let shapes = self.arch.shapes();
        let act = self.arch.activation;
        let mut delta = dz;
        for l in (0..shapes.len()).rev() {
            let (r, c) = shapes[l];
            let input = &trace.inputs[l];
            let g = &mut out[l];
            for i in 0..r {
                let d = scale * delta[i];
                if d != 0.0 {
                    for (gij, xj) in g[i * c..(i + 1) * c].iter_mut().zip(input) {
                        *gij += d * xj;
                    }
                }
            }
            if l > 0 {
                let w = &self.weights[l];
                delta = (0..c)
                    .map(|j| {
                        let back: f64 = (0..r).map(|i| w[i * c + j] * delta[i]).sum();
                        back * act.derivative(trace.pre[l - 1][j])
                    })
                    .collect();
            }
        }
    }

    /// Adds `scale` times the cross-entropy gradient of one sample to `out`
    /// and returns the unscaled loss.
    pub fn accumulate_loss_gradient(
        &self,
        h: &[f64],
        label: usize,
        scale: f64,
        out: &mut Gradients,
    ) -> Result<f64> {
        let m = self.num_classes();
        if label >= m {
            return Err(Error::OutOfRange(format!("label {label} with {m} classes")));
        }
        let trace = self.run(h)?;
        let z = trace.pre.last().expect("at least one layer");
        let ls = log_softmax(z);
        let loss = -ls[label];
        let mut dz: Vec<f64> = ls.iter().map(|v| v.exp()).collect();
        dz[label] -= 1.0;
        self.backprop(&trace, dz, scale, out);
        Ok(loss)
    }

    /// Cross-entropy loss of one sample and its weight gradient.
    pub fn loss_and_gradient(&self, h: &[f64], label: usize) -> Result<(f64, Gradients)> {
        let mut out = self.zero_gradients();
        let loss = self.accumulate_loss_gradient(h, label, 1.0, &mut out)?;
        Ok((loss, out))
    }

    /// `W <- W - step * grads`, followed by norm projection.
    pub fn apply_update(&mut self, grads: &Gradients, step: f64) {
        for (w, g) in self.weights.iter_mut().zip(grads) {
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= step * gi;
            }
        }
        self.project();
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            architecture: self.arch.clone(),
            weights: self.weights.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        MlpModel::from_weights(f.architecture, f.weights)
    }
}

/// JSON form of a model: architecture block and row-major weights.
///
/// Floats are written in shortest round-trip form and parsed exactly, so
/// save/load reproduces every weight bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub architecture: MlpArchitecture,
    pub weights: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straightforward_forward(m: &MlpModel, h: &[f64]) -> Vec<f64> {
        // independent re-implementation with nested Vec matrices
        let arch = m.architecture();
        let mut x: Vec<f64> = h.to_vec();
        if arch.bias {
            x.push(1.0);
        }
        let mut z = Vec::new();
        for (l, (w, (r, c))) in m.weights().iter().zip(arch.shapes()).enumerate() {
            let mat: Vec<Vec<f64>> = (0..r).map(|i| w[i * c..(i + 1) * c].to_vec()).collect();
            let input: Vec<f64> = if l == 0 {
                x.clone()
            } else {
                z.iter().map(|v: &f64| arch.activation.apply(*v)).collect()
            };
            z = mat
                .iter()
                .map(|row| {
                    let mut s = 0.0;
                    for j in 0..c {
                        s += row[j] * input[j];
                    }
                    s
                })
                .collect();
        }
        let mx = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - mx).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|v| v / s).collect()
    }

    #[test]
    fn zero_weights_give_uniform_posteriors() {
        let m = MlpModel::zeros(MlpArchitecture::new(3, &[4], 5)).unwrap();
        let out = m.forward(&[0.3, -1.0, 2.0]).unwrap();
        assert!(out.z.iter().all(|&v| v == 0.0));
        for p in out.posteriors {
            assert!((p - 0.2).abs() < 1e-15);
        }
        assert_eq!(m.logit(&[0.3, -1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(m.logits_vs_reference(&[0.0; 3]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn single_layer_analytic_softmax() {
        let arch = MlpArchitecture::new(1, &[], 2);
        let m = MlpModel::from_weights(arch, vec![vec![1.0, 0.0, 0.0, 0.0]]).unwrap();
        let out = m.forward(&[3.0]).unwrap();
        assert_eq!(out.z, vec![3.0, 0.0]);
        let expect = 3f64.exp() / (3f64.exp() + 1.0);
        assert!((out.posteriors[0] - expect).abs() < 1e-15);
        assert!((out.posteriors[0] - 0.9526).abs() < 1e-4);
        assert_eq!(m.logit(&[3.0]).unwrap(), 3.0);
    }

    #[test]
    fn multiclass_logits_against_class_zero() {
        // z = [1, 2, 0] via identity weights on (h1, h2, h3), no bias
        let arch = MlpArchitecture::new(3, &[], 3).with_bias(false);
        let w = vec![1., 0., 0., 0., 1., 0., 0., 0., 1.];
        let m = MlpModel::from_weights(arch, vec![w]).unwrap();
        assert_eq!(m.logits_vs_reference(&[1.0, 2.0, 0.0]).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn forward_matches_independent_reimplementation() {
        let arch = MlpArchitecture::new(4, &[7, 5], 3);
        let m = MlpModel::random(arch, 99).unwrap();
        let mut rng = seed::rng(5);
        for _ in 0..20 {
            let h: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = m.forward(&h).unwrap().posteriors;
            let q = straightforward_forward(&m, &h);
            let s: f64 = p.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            for (a, b) in p.iter().zip(&q) {
                assert!(*a > 0.0);
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = MlpModel::zeros(MlpArchitecture::new(2, &[3], 2)).unwrap();
        assert!(matches!(
            m.forward(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projection_enforces_column_norm() {
        let arch = MlpArchitecture::new(3, &[6], 2).with_norm_bound(0.5);
        let mut m = MlpModel::random(arch.clone(), 1).unwrap();
        for w in m.weights_mut() {
            w.iter_mut().for_each(|v| *v *= 10.0);
        }
        m.project();
        for n in m.column_norms() {
            assert!(n <= 0.5 + 1e-12);
        }
        let mut bad = m.weights().to_vec();
        bad[0][0] = 10.0;
        assert!(MlpModel::from_weights(arch, bad).is_err());
    }

    #[test]
    fn logit_bound_holds_on_samples() {
        let arch = MlpArchitecture::new(3, &[8, 8], 2)
            .with_norm_bound(1.5)
            .with_input_bound(1.0);
        let beta = arch.logit_bound().unwrap();
        let mut rng = seed::rng(3);
        for s in 0..10 {
            let mut m = MlpModel::random(arch.clone(), s).unwrap();
            for w in m.weights_mut() {
                w.iter_mut().for_each(|v| *v *= 20.0);
            }
            m.project();
            for _ in 0..50 {
                let h: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect();
                assert!(m.logit(&h).unwrap().abs() <= beta);
            }
        }
    }

    #[test]
    fn model_json_is_bit_exact() {
        let m = MlpModel::random(MlpArchitecture::new(3, &[5], 4), 42).unwrap();
        let text = serde_json::to_string(&m.to_file()).unwrap();
        let f: ModelFile = serde_json::from_str(&text).unwrap();
        let back = MlpModel::from_weights(f.architecture, f.weights).unwrap();
        for (a, b) in m.weights().iter().flatten().zip(back.weights().iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
