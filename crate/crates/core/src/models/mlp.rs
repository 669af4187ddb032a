//! Fully connected networks over flat parameter vectors, with a hand-written
//! reverse pass.
//!
//! Parameters are laid out layer by layer: the `out × in` weight matrix in
//! row-major order followed by the `out` biases. Hidden layers use a leaky
//! rectifier with slope [`LEAKY_SLOPE`]; the last layer is affine.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const LEAKY_SLOPE: f64 = 0.01;

/// Layer widths `[input, hidden..., output]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Arch(pub Vec<usize>);

impl Arch {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::arg(
                "arch",
                format!("need ≥ 2 positive widths, got {widths:?}"),
            ));
        }
        Ok(Arch(widths))
    }

    pub fn input_dim(&self) -> usize {
        self.0[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.0.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.0.len() - 1
    }

    /// `(fan_in, fan_out)` of layer `l`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        (self.0[l], self.0[l + 1])
    }

    /// Offset of layer `l`'s weight block.
    pub fn layer_offset(&self, l: usize) -> usize {
        (0..l).map(|k| self.0[k + 1] * (self.0[k] + 1)).sum()
    }

    pub fn num_params(&self) -> usize {
        self.layer_offset(self.num_layers())
    }
}

/// Flat parameters tied to an architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    arch: Arch,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(arch: Arch, values: Vec<f64>) -> Result<Self> {
        if values.len() != arch.num_params() {
            return Err(Error::arg(
                "params",
                format!(
                    "architecture {:?} needs {} parameters, got {}",
                    arch.0,
                    arch.num_params(),
                    values.len()
                ),
            ));
        }
        Ok(Self { arch, values })
    }

    pub fn zeros(arch: Arch) -> Self {
        let n = arch.num_params();
        Self {
            arch,
            values: vec![0.0; n],
        }
    }

    /// Seeded He-style initialization. The last layer uses a smaller scale;
    /// in L1 mode its bias starts at 0.5 so the clamped head is not saturated.
    pub fn init(arch: Arch, mode: OutputMode, seed: u64) -> Self {
        let mut rng = rng::stream(seed, 0x1417);
        let mut values = vec![0.0; arch.num_params()];
        let last = arch.num_layers() - 1;
        for l in 0..arch.num_layers() {
            let (fan_in, fan_out) = arch.layer_shape(l);
            let gain = if l == last { 1.0 } else { 2.0 };
            let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("positive std");
            let off = arch.layer_offset(l);
            for v in &mut values[off..off + fan_in * fan_out] {
                *v = normal.sample(&mut rng);
            }
            if l == last && mode == OutputMode::L1 {
                for v in &mut values[off + fan_in * fan_out..off + (fan_in + 1) * fan_out] {
                    *v = 0.5;
                }
            }
        }
        Self { arch, values }
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Weight block of layer `l` (row-major `out × in`).
    pub fn layer_weights(&self, l: usize) -> &[f64] {
        let (i, o) = self.arch.layer_shape(l);
        let off = self.arch.layer_offset(l);
        &self.values[off..off + i * o]
    }

    pub fn layer_weights_mut(&mut self, l: usize) -> &mut [f64] {
        let (i, o) = self.arch.layer_shape(l);
        let off = self.arch.layer_offset(l);
        &mut self.values[off..off + i * o]
    }

    pub fn layer_bias(&self, l: usize) -> &[f64] {
        let (i, o) = self.arch.layer_shape(l);
        let off = self.arch.layer_offset(l) + i * o;
        &self.values[off..off + o]
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ParamVector) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.values {
            *v *= alpha;
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// How the network output is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    /// Label by argmax over logits (a single logit is thresholded at 0).
    Hard,
    /// Single output clamped to `[0, 1]`, read as a real-valued score.
    L1,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`
    /// (post-activation for hidden layers, raw affine output for the last).
    pub acts: Vec<Vec<f64>>,
    /// Pre-activations per layer.
    pub pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

#[inline]
fn leaky(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        LEAKY_SLOPE * v
    }
}

#[inline]
fn leaky_grad(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Forward pass that keeps every intermediate for [`backward`].
pub fn forward(params: &ParamVector, x: &[f64]) -> Trace {
    let arch = params.arch();
    let layers = arch.num_layers();
    let mut acts = Vec::with_capacity(layers + 1);
    let mut pre = Vec::with_capacity(layers);
    acts.push(x.to_vec());
    for l in 0..layers {
        let (fan_in, fan_out) = arch.layer_shape(l);
        let w = params.layer_weights(l);
        let b = params.layer_bias(l);
        let input = &acts[l];
        let z: Vec<f64> = (0..fan_out)
            .map(|o| {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + b[o]
            })
            .collect();
        let a = if l + 1 == layers {
            z.clone()
        } else {
            z.iter().map(|&v| leaky(v)).collect()
        };
        pre.push(z);
        acts.push(a);
    }
    Trace { acts, pre }
}

/// Raw network output (logits).
pub fn output(params: &ParamVector, x: &[f64]) -> Vec<f64> {
    forward(params, x).acts.pop().unwrap()
}

/// Reverse pass: adds `∂(d_out · output)/∂params` into `grad` and returns the
/// gradient with respect to the input.
pub fn backward(
    params: &ParamVector,
    trace: &Trace,
    d_out: &[f64],
    grad: &mut ParamVector,
) -> Vec<f64> {
    let arch = params.arch();
    let layers = arch.num_layers();
    let mut delta = d_out.to_vec();
    for l in (0..layers).rev() {
        let (fan_in, fan_out) = arch.layer_shape(l);
        if l + 1 != layers {
            for (d, &z) in delta.iter_mut().zip(&trace.pre[l]) {
                *d *= leaky_grad(z);
            }
        }
        let input = &trace.acts[l];
        let off = arch.layer_offset(l);
        {
            let g = &mut grad.values[off..off + (fan_in + 1) * fan_out];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (gi, &xi) in g[o * fan_in..(o + 1) * fan_in].iter_mut().zip(input) {
                    *gi += d * xi;
                }
                g[fan_in * fan_out + o] += d;
            }
        }
        let w = params.layer_weights(l);
        let mut next = vec![0.0; fan_in];
        for o in 0..fan_out {
            let d = delta[o];
            if d == 0.0 {
                continue;
            }
            for (n, &wi) in next.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                *n += d * wi;
            }
        }
        delta = next;
    }
    delta
}

/// Index of the largest value; ties go to the first index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax probabilities.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// A network together with its output reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRepr", into = "MlpRepr")]
pub struct Mlp {
    params: ParamVector,
    mode: OutputMode,
}

#[derive(Serialize, Deserialize)]
struct MlpRepr {
    arch: Vec<usize>,
    params: Vec<f64>,
    mode: OutputMode,
}

impl TryFrom<MlpRepr> for Mlp {
    type Error = Error;

    fn try_from(r: MlpRepr) -> Result<Self> {
        Mlp::new(ParamVector::new(Arch::new(r.arch)?, r.params)?, r.mode)
    }
}

impl From<Mlp> for MlpRepr {
    fn from(m: Mlp) -> Self {
        MlpRepr {
            arch: m.params.arch.0,
            params: m.params.values,
            mode: m.mode,
        }
    }
}

impl Mlp {
    pub fn new(params: ParamVector, mode: OutputMode) -> Result<Self> {
        if mode == OutputMode::L1 && params.arch().output_dim() != 1 {
            return Err(Error::arg("arch", "L1 mode needs a single output unit"));
        }
        Ok(Self { params, mode })
    }

    pub fn init(arch: Arch, mode: OutputMode, seed: u64) -> Result<Self> {
        Self::new(ParamVector::init(arch, mode, seed), mode)
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    pub fn into_params(self) -> ParamVector {
        self.params
    }

    pub fn arch(&self) -> &Arch {
        self.params.arch()
    }

    pub fn mode(&self) -> OutputMode {
        self.mode
    }

    pub fn input_dim(&self) -> usize {
        self.arch().input_dim()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        output(&self.params, x)
    }

    /// Real-valued score: the clamped output in L1 mode, the predicted label
    /// otherwise.
    pub fn score(&self, x: &[f64]) -> f64 {
        match self.mode {
            OutputMode::L1 => self.logits(x)[0].clamp(0.0, 1.0),
            OutputMode::Hard => self.predict(x) as f64,
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(x);
        match self.mode {
            OutputMode::L1 => usize::from(z[0].clamp(0.0, 1.0) >= 0.5),
            OutputMode::Hard if z.len() == 1 => usize::from(z[0] >= 0.0),
            OutputMode::Hard => argmax(&z),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_count_matches_architecture() {
        let arch = Arch::new(vec![3, 5, 2]).unwrap();
        assert_eq!(arch.num_params(), 3 * 5 + 5 + 5 * 2 + 2);
        let p = ParamVector::init(arch.clone(), OutputMode::Hard, 1);
        assert_eq!(p.len(), arch.num_params());
        assert!(ParamVector::new(arch, vec![0.0; 3]).is_err());
        assert!(Arch::new(vec![3]).is_err());
    }

    #[test]
    fn forward_matches_hand_computation() {
        // 1 -> 2 -> 1 network.
        let arch = Arch::new(vec![1, 2, 1]).unwrap();
        let p = ParamVector::new(arch, vec![1.0, -1.0, 0.0, 0.0, 2.0, 3.0, 0.5]).unwrap();
        // x = 2: hidden pre = (2, -2) -> act (2, -0.02); out = 4 - 0.06 + 0.5
        let out = output(&p, &[2.0]);
        assert!((out[0] - 4.44).abs() < 1e-12);
    }

    #[test]
    fn init_is_seeded() {
        let arch = Arch::new(vec![4, 8, 3]).unwrap();
        let a = ParamVector::init(arch.clone(), OutputMode::Hard, 9);
        assert_eq!(a, ParamVector::init(arch.clone(), OutputMode::Hard, 9));
        assert_ne!(a, ParamVector::init(arch, OutputMode::Hard, 10));
    }

    #[test]
    fn json_shape() {
        let m = Mlp::new(
            ParamVector::new(Arch::new(vec![1, 1]).unwrap(), vec![2.0, 0.5]).unwrap(),
            OutputMode::L1,
        )
        .unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"{"arch":[1,1],"params":[2.0,0.5],"mode":"l1"}"#);
        let back: Mlp = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(
            serde_json::from_str::<Mlp>(r#"{"arch":[1,2],"params":[0,0,0,0],"mode":"l1"}"#)
                .is_err()
        );
    }

    #[test]
    fn hard_and_l1_readouts() {
        let arch = Arch::new(vec![1, 1]).unwrap();
        let ramp = Mlp::new(
            ParamVector::new(arch.clone(), vec![1.0, 0.0]).unwrap(),
            OutputMode::L1,
        )
        .unwrap();
        assert_eq!(ramp.score(&[-3.0]), 0.0);
        assert_eq!(ramp.score(&[0.25]), 0.25);
        assert_eq!(ramp.score(&[7.0]), 1.0);
        assert_eq!(ramp.predict(&[0.75]), 1);
        let logit = Mlp::new(
            ParamVector::new(arch, vec![1.0, 0.0]).unwrap(),
            OutputMode::Hard,
        )
        .unwrap();
        assert_eq!(logit.predict(&[-0.1]), 0);
        assert_eq!(logit.predict(&[0.0]), 1);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
