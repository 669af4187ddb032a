//! Supervised losses, their gradients and plain SGD training.

use rand::seq::index::sample_weighted;
use serde::{Deserialize, Serialize};

use super::lipschitz::project_params;
use super::mlp::{
    backward, forward, sigmoid, softmax, softplus, Arch, Mlp, OutputMode, ParamVector,
};
use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;

/// Supervised loss on a labeled batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Softmax cross-entropy; a single-logit network uses the logistic loss.
    CrossEntropy,
    /// `|clamp(z, 0, 1) - y|` for binary labels.
    L1,
}

/// Per-sample loss and its gradient with respect to the network output.
pub fn output_loss(loss: Loss, out: &[f64], label: usize) -> (f64, Vec<f64>) {
    match loss {
        Loss::CrossEntropy if out.len() == 1 => {
            let z = out[0];
            let y = label as f64;
            (softplus(z) - y * z, vec![sigmoid(z) - y])
        }
        Loss::CrossEntropy => {
            let p = softmax(out);
            let value = -p[label].max(f64::MIN_POSITIVE).ln();
            let mut d = p;
            d[label] -= 1.0;
            (value, d)
        }
        Loss::L1 => {
            let z = out[0];
            let y = label as f64;
            let s = z.clamp(0.0, 1.0);
            let diff = s - y;
            // Outside [0, 1] the clamp is flat; keep pulling toward the label
            // anyway so a saturated head can recover.
            let d = if diff != 0.0 { diff.signum() } else { 0.0 };
            (diff.abs(), vec![d])
        }
    }
}

/// `Σ_i w_i ℓ(x_i, y_i)` and its exact gradient. Weights need not be normalized.
pub fn weighted_loss_and_grad(
    params: &ParamVector,
    points: &[Vec<f64>],
    labels: &[usize],
    weights: &[f64],
    loss: Loss,
) -> Result<(f64, ParamVector)> {
    let mut grad = ParamVector::zeros(params.arch().clone());
    let mut total = 0.0;
    for ((x, &y), &w) in points.iter().zip(labels).zip(weights) {
        if w == 0.0 {
            continue;
        }
        let trace = forward(params, x);
        let (value, mut d) = output_loss(loss, trace.output(), y);
        total += w * value;
        for v in &mut d {
            *v *= w;
        }
        backward(params, &trace, &d, &mut grad);
    }
    if !total.is_finite() || !grad.is_finite() {
        return Err(Error::NonFinite {
            context: "loss gradient".into(),
            step: 0,
        });
    }
    Ok((total, grad))
}

/// Weighted batch loss (no gradient).
pub fn batch_loss(params: &ParamVector, data: &LabeledDataset, loss: Loss) -> f64 {
    data.iter()
        .map(|(x, y, w)| {
            let trace = forward(params, x);
            w * output_loss(loss, trace.output(), y).0
        })
        .sum()
}

/// Exact reverse-mode gradient of the weighted batch loss at `params`.
pub fn grad(
    arch: &Arch,
    params: &[f64],
    batch: &LabeledDataset,
    loss: Loss,
) -> Result<ParamVector> {
    let params = ParamVector::new(arch.clone(), params.to_vec())?;
    if !params.is_finite() {
        return Err(Error::NonFinite {
            context: "parameters".into(),
            step: 0,
        });
    }
    if batch.dim() != arch.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim(),
            found: batch.dim(),
        });
    }
    weighted_loss_and_grad(
        &params,
        batch.points(),
        batch.labels(),
        batch.weights(),
        loss,
    )
    .map(|(_, g)| g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Constant,
    /// Step size decays linearly to zero over the run.
    Linear,
}

/// Optimizer settings shared by every trainer in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub steps: usize,
    pub lr: f64,
    #[serde(default)]
    pub momentum: f64,
    /// `None` trains on the full weighted support; `Some(b)` draws `b`
    /// indices per step proportionally to the weights.
    #[serde(default)]
    pub batch_size: Option<usize>,
    pub loss: Loss,
    #[serde(default)]
    pub schedule: Schedule,
    /// Project every layer after each step so the certified constant stays
    /// below this value.
    #[serde(default)]
    pub lipschitz: Option<f64>,
}

impl OptConfig {
    pub fn new(steps: usize, lr: f64, loss: Loss) -> Self {
        Self {
            steps,
            lr,
            momentum: 0.0,
            batch_size: None,
            loss,
            schedule: Schedule::Constant,
            lipschitz: None,
        }
    }

    pub fn with_momentum(mut self, momentum: f64) -> Self {
        self.momentum = momentum;
        self
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_lipschitz(mut self, k: Option<f64>) -> Self {
        self.lipschitz = k;
        self
    }

    pub fn with_batch_size(mut self, b: Option<usize>) -> Self {
        self.batch_size = b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::arg(
                "opt.lr",
                "step size must be finite and nonnegative",
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::arg("opt.momentum", "momentum must lie in [0, 1)"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::arg("opt.batch_size", "batch size must be positive"));
        }
        if let Some(k) = self.lipschitz {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::arg(
                    "opt.lipschitz",
                    "Lipschitz target must be positive and finite",
                ));
            }
        }
        Ok(())
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.lr,
            Schedule::Linear => self.lr * (1.0 - step as f64 / self.steps.max(1) as f64),
        }
    }
}

/// SGD with optional heavy-ball momentum.
#[derive(Debug, Clone)]
pub struct Sgd {
    momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(num_params: usize, momentum: f64) -> Self {
        Self {
            momentum,
            velocity: vec![0.0; num_params],
        }
    }

    pub fn step(&mut self, params: &mut ParamVector, grad: &ParamVector, lr: f64) {
        if self.momentum == 0.0 {
            params.axpy(-lr, grad);
            return;
        }
        for ((p, v), g) in params
            .values_mut()
            .iter_mut()
            .zip(&mut self.velocity)
            .zip(grad.values())
        {
            *v = self.momentum * *v + g;
            *p -= lr * *v;
        }
    }
}

/// Trains a freshly initialized network on `data`.
pub fn train_supervised(
    arch: &Arch,
    mode: OutputMode,
    data: &LabeledDataset,
    opt: &OptConfig,
    seed: u64,
) -> Result<Mlp> {
    let init = Mlp::init(arch.clone(), mode, seed)?;
    train_from(init, data, opt, seed)
}

/// Continues training from `model`. Deterministic given `seed`.
pub fn train_from(model: Mlp, data: &LabeledDataset, opt: &OptConfig, seed: u64) -> Result<Mlp> {
    opt.validate()?;
    if data.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: data.dim(),
        });
    }
    if opt.loss == Loss::L1 && (model.mode() != OutputMode::L1 || data.num_classes() != 2) {
        return Err(Error::arg(
            "opt.loss",
            "L1 loss needs an L1-mode network and binary labels",
        ));
    }
    let mode = model.mode();
    let mut params = model.into_params();
    let mut sgd = Sgd::new(params.len(), opt.momentum);
    let mut rng = rng::stream(seed, 0x7EA1);
    for step in 0..opt.steps {
        let g = match opt.batch_size {
            None => weighted_loss_and_grad(
                &params,
                data.points(),
                data.labels(),
                data.weights(),
                opt.loss,
            ),
            Some(b) => {
                let idx = sample_weighted(
                    &mut rng,
                    data.len(),
                    |i| data.weights()[i],
                    b.min(data.len()),
                )
                .map_err(|e| Error::arg("opt.batch_size", e.to_string()))?;
                let idx: Vec<usize> = idx.into_iter().collect();
                let points: Vec<Vec<f64>> = idx.iter().map(|&i| data.point(i).to_vec()).collect();
                let labels: Vec<usize> = idx.iter().map(|&i| data.labels()[i]).collect();
                let w = vec![1.0 / idx.len() as f64; idx.len()];
                weighted_loss_and_grad(&params, &points, &labels, &w, opt.loss)
            }
        };
        let (_, g) = g.map_err(|_| Error::NonFinite {
            context: "supervised training".into(),
            step,
        })?;
        sgd.step(&mut params, &g, opt.lr_at(step));
        if let Some(k) = opt.lipschitz {
            project_params(&mut params, k);
        }
        if !params.is_finite() {
            return Err(Error::NonFinite {
                context: "supervised training".into(),
                step,
            });
        }
    }
    Mlp::new(params, mode)
}
