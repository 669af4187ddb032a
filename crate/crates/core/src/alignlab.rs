//! Encoder-plus-head classifiers trained with and without a domain
//! alignment term, and probes that expose what alignment did to the labels.
//!
//! Training only ever sees the target through an [`UnlabeledView`].

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::datasets::{LabeledDataset, TransferInstance, UnlabeledView};
use crate::error::{Error, Result};
use crate::models::lipschitz::project_params;
use crate::models::mlp::{argmax, backward, forward, softmax, Trace};
use crate::models::train::{output_loss, Loss, Sgd};
use crate::models::{Arch, Mlp, OutputMode, ParamVector};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMethod {
    SourceOnly,
    Dann,
    Mdd,
    Wdgrl,
}

impl AlignMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            AlignMethod::SourceOnly => "source_only",
            AlignMethod::Dann => "dann",
            AlignMethod::Mdd => "mdd",
            AlignMethod::Wdgrl => "wdgrl",
        }
    }
}

impl std::str::FromStr for AlignMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace('-', "_").as_str() {
            "source_only" | "so" => AlignMethod::SourceOnly,
            "dann" => AlignMethod::Dann,
            "mdd" => AlignMethod::Mdd,
            "wdgrl" => AlignMethod::Wdgrl,
            other => return Err(Error::arg("method", format!("unknown method `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub method: AlignMethod,
    /// Weight of the alignment term in the encoder objective.
    pub weight: f64,
    pub encoder_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub head_hidden: Vec<usize>,
    /// Hidden widths of the domain critic (DANN, WDGRL) or adversarial head (MDD).
    pub critic_hidden: Vec<usize>,
    pub steps: usize,
    pub lr: f64,
    pub critic_lr: f64,
    /// Critic updates per encoder update.
    pub critic_steps: usize,
    pub momentum: f64,
    /// MDD margin factor γ on the source disparity.
    pub margin: f64,
    /// Gradients of each network are rescaled to at most this norm.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            method: AlignMethod::SourceOnly,
            weight: 1.0,
            encoder_hidden: vec![32],
            latent_dim: 2,
            head_hidden: vec![],
            critic_hidden: vec![32],
            steps: 1000,
            lr: 0.01,
            critic_lr: 0.01,
            critic_steps: 5,
            momentum: 0.9,
            margin: 4.0,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl AlignConfig {
    pub fn with_method(method: AlignMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight >= 0.0) || !self.weight.is_finite() {
            return Err(Error::arg("weight", "must be finite and nonnegative"));
        }
        if self.latent_dim == 0 {
            return Err(Error::arg("latent_dim", "must be at least 1"));
        }
        for (field, v) in [("lr", self.lr), ("critic_lr", self.critic_lr)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::arg(field, "must be finite and nonnegative"));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::arg("momentum", "must lie in [0, 1)"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::arg("clip_norm", "must be positive"));
        }
        if self.method == AlignMethod::Mdd && !(self.margin > 0.0) {
            return Err(Error::arg("margin", "must be positive"));
        }
        if self.method != AlignMethod::SourceOnly && self.weight > 0.0 && self.critic_steps == 0 {
            return Err(Error::arg(
                "critic_steps",
                "alignment needs at least one critic step",
            ));
        }
        for (field, widths) in [
            ("encoder_hidden", &self.encoder_hidden),
            ("head_hidden", &self.head_hidden),
            ("critic_hidden", &self.critic_hidden),
        ] {
            if widths.contains(&0) {
                return Err(Error::arg(field, "layer widths must be positive"));
            }
        }
        Ok(())
    }

    fn arch(input: usize, hidden: &[usize], output: usize) -> Result<Arch> {
        let mut w = vec![input];
        w.extend_from_slice(hidden);
        w.push(output);
        Arch::new(w)
    }
}

/// Encoder `Ψ` followed by a classification head on the latent code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepClassifier {
    pub psi: Mlp,
    pub head: Mlp,
    pub latent_dim: usize,
}

impl RepClassifier {
    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        self.psi.logits(x)
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.head.logits(&self.encode(x))
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    /// Weighted source cross-entropy.
    pub class_loss: f64,
    /// Critic loss (DANN), adversary objective (MDD) or critic W1 estimate
    /// (WDGRL); zero when no alignment runs.
    pub align_loss: f64,
    /// Norm of the last critic gradient.
    pub critic_grad_norm: f64,
    /// The critic gradient vanished: it has nothing left to learn from.
    pub critic_collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub method: AlignMethod,
    pub rows: Vec<TraceRow>,
    pub notes: Vec<String>,
}

impl TrainingTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record([
            "step",
            "class_loss",
            "align_loss",
            "critic_grad_norm",
            "critic_collapsed",
        ])
        .map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.step.to_string(),
                r.class_loss.to_string(),
                r.align_loss.to_string(),
                r.critic_grad_norm.to_string(),
                r.critic_collapsed.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

const COLLAPSE_TOL: f64 = 1e-10;

fn clip(grad: &mut ParamVector, max_norm: f64) {
    let n = grad.norm();
    if n > max_norm {
        grad.scale(max_norm / n);
    }
}

struct Encoded {
    traces: Vec<Trace>,
    z: Vec<Vec<f64>>,
}

fn encode_all(psi: &ParamVector, points: &[Vec<f64>]) -> Encoded {
    let traces: Vec<Trace> = points.iter().map(|x| forward(psi, x)).collect();
    let z = traces.iter().map(|t| t.output().to_vec()).collect();
    Encoded { traces, z }
}

/// Adds `Σ_i ∂/∂ψ (dz_i · Ψ(x_i))` into `grad`.
fn encoder_backward(psi: &ParamVector, enc: &Encoded, dz: &[Vec<f64>], grad: &mut ParamVector) {
    for (t, d) in enc.traces.iter().zip(dz) {
        if d.iter().any(|v| *v != 0.0) {
            backward(psi, t, d, grad);
        }
    }
}

fn add_into(acc: &mut [Vec<f64>], scale: f64, other: &[Vec<f64>]) {
    for (a, o) in acc.iter_mut().zip(other) {
        for (x, y) in a.iter_mut().zip(o) {
            *x += scale * y;
        }
    }
}

/// `Σ_i w_i CE(net(z_i), y_i)`, its parameter gradient and `∂/∂z_i`.
fn ce_terms(
    net: &ParamVector,
    z: &[Vec<f64>],
    labels: &[usize],
    weights: &[f64],
) -> (f64, ParamVector, Vec<Vec<f64>>) {
    let mut grad = ParamVector::zeros(net.arch().clone());
    let mut dz = Vec::with_capacity(z.len());
    let mut total = 0.0;
    for ((x, &y), &w) in z.iter().zip(labels).zip(weights) {
        if w == 0.0 {
            dz.push(vec![0.0; x.len()]);
            continue;
        }
        let t = forward(net, x);
        let (v, mut d) = output_loss(Loss::CrossEntropy, t.output(), y);
        total += w * v;
        d.iter_mut().for_each(|g| *g *= w);
        dz.push(backward(net, &t, &d, &mut grad));
    }
    (total, grad, dz)
}

/// `Σ_i w_i f(z_i)` for a scalar-output network, with gradients.
fn mean_terms(
    net: &ParamVector,
    z: &[Vec<f64>],
    weights: &[f64],
) -> (f64, ParamVector, Vec<Vec<f64>>) {
    let mut grad = ParamVector::zeros(net.arch().clone());
    let mut dz = Vec::with_capacity(z.len());
    let mut total = 0.0;
    for (x, &w) in z.iter().zip(weights) {
        let t = forward(net, x);
        total += w * t.output()[0];
        dz.push(backward(net, &t, &[w], &mut grad));
    }
    (total, grad, dz)
}

/// `∂/∂z_i` of `Σ_i w_i CE(D(z_i), ½)`: pushes a domain critic towards
/// indifference.
fn confusion_dz(net: &ParamVector, z: &[Vec<f64>], weights: &[f64]) -> Vec<Vec<f64>> {
    let mut scratch = ParamVector::zeros(net.arch().clone());
    z.iter()
        .zip(weights)
        .map(|(x, &w)| {
            let t = forward(net, x);
            let d = w * (crate::models::mlp::sigmoid(t.output()[0]) - 0.5);
            backward(net, &t, &[d], &mut scratch)
        })
        .collect()
}

/// `Σ_i w_i −log(1 − p'_{ŷ_i})`: the adversary's target-side disagreement loss.
fn anti_terms(
    net: &ParamVector,
    z: &[Vec<f64>],
    labels: &[usize],
    weights: &[f64],
) -> (f64, ParamVector, Vec<Vec<f64>>) {
    let mut grad = ParamVector::zeros(net.arch().clone());
    let mut dz = Vec::with_capacity(z.len());
    let mut total = 0.0;
    for ((x, &y), &w) in z.iter().zip(labels).zip(weights) {
        let t = forward(net, x);
        let p = softmax(t.output());
        let q = p[y].min(1.0 - 1e-12);
        total += -w * (1.0 - q).ln();
        let d: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(k, pk)| {
                let dq = if k == y { q * (1.0 - pk) } else { -q * pk };
                w * dq / (1.0 - q)
            })
            .collect();
        dz.push(backward(net, &t, &d, &mut grad));
    }
    (total, grad, dz)
}

/// Critic/adversary loss as a function of the latent codes.
enum Critic {
    /// Domain classifier, source = 0, target = 1.
    Domain,
    /// Adversarial head agreeing with `ŷ` on source, disagreeing on target.
    Disparity { margin: f64 },
    /// Negated W1 dual objective `−(E_S f − E_T f)`.
    Dual,
}

struct CriticOut {
    loss: f64,
    grad: ParamVector,
    dz_s: Vec<Vec<f64>>,
    dz_t: Vec<Vec<f64>>,
}

fn critic_terms(
    kind: &Critic,
    net: &ParamVector,
    zs: &[Vec<f64>],
    ws: &[f64],
    zt: &[Vec<f64>],
    wt: &[f64],
    yhat_s: &[usize],
    yhat_t: &[usize],
) -> CriticOut {
    match kind {
        Critic::Domain => {
            let (ls, mut g, dz_s) = ce_terms(net, zs, &vec![0; zs.len()], ws);
            let (lt, gt, dz_t) = ce_terms(net, zt, &vec![1; zt.len()], wt);
            g.axpy(1.0, &gt);
            CriticOut {
                loss: ls + lt,
                grad: g,
                dz_s,
                dz_t,
            }
        }
        Critic::Disparity { margin } => {
            let (ls, mut g, mut dz_s) = ce_terms(net, zs, yhat_s, ws);
            g.scale(*margin);
            dz_s.iter_mut().flatten().for_each(|v| *v *= margin);
            let (lt, gt, dz_t) = anti_terms(net, zt, yhat_t, wt);
            g.axpy(1.0, &gt);
            CriticOut {
                loss: margin * ls + lt,
                grad: g,
                dz_s,
                dz_t,
            }
        }
        Critic::Dual => {
            let (ms, mut g, mut dz_s) = mean_terms(net, zs, ws);
            let (mt, gt, dz_t) = mean_terms(net, zt, wt);
            g.scale(-1.0);
            g.axpy(1.0, &gt);
            dz_s.iter_mut().flatten().for_each(|v| *v = -*v);
            CriticOut {
                loss: mt - ms,
                grad: g,
                dz_s,
                dz_t,
            }
        }
    }
}

fn non_finite(step: usize) -> Error {
    Error::NonFinite {
        context: "aligned training".into(),
        step,
    }
}

/// Trains an encoder and head on the labeled source, with the configured
/// alignment term computed against the unlabeled target.
///
/// Every method alternates `critic_steps` critic updates on frozen codes with
/// one encoder/head update. With weight 0 no critic is built, so the run is
/// identical to source-only training.
pub fn train_aligned(
    source: &LabeledDataset,
    target: &UnlabeledView,
    cfg: &AlignConfig,
) -> Result<(RepClassifier, TrainingTrace)> {
    train_aligned_from(None, source, target, cfg)
}

/// [`train_aligned`] starting from `init` instead of a seeded initialization.
/// The encoder and head shapes in `cfg` are ignored when `init` is given.
pub fn train_aligned_from(
    init: Option<RepClassifier>,
    source: &LabeledDataset,
    target: &UnlabeledView,
    cfg: &AlignConfig,
) -> Result<(RepClassifier, TrainingTrace)> {
    cfg.validate()?;
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            found: target.dim(),
        });
    }
    let c = source.num_classes();
    let (mut psi, mut head) = match init {
        Some(m) => {
            if m.psi.input_dim() != source.dim()
                || m.head.input_dim() != m.latent_dim
                || m.head.arch().output_dim() != c
            {
                return Err(Error::arg(
                    "init",
                    "initial model does not fit the data shape",
                ));
            }
            (m.psi.into_params(), m.head.into_params())
        }
        None => {
            let psi_arch = AlignConfig::arch(source.dim(), &cfg.encoder_hidden, cfg.latent_dim)?;
            let head_arch = AlignConfig::arch(cfg.latent_dim, &cfg.head_hidden, c)?;
            (
                ParamVector::init(psi_arch, OutputMode::Hard, rng::derive(cfg.seed, 1)),
                ParamVector::init(head_arch, OutputMode::Hard, rng::derive(cfg.seed, 2)),
            )
        }
    };
    let latent_dim = psi.arch().output_dim();
    let head_arch = head.arch().clone();

    let mut notes = Vec::new();
    let critic_kind = match cfg.method {
        _ if cfg.weight == 0.0 => None,
        AlignMethod::SourceOnly => None,
        AlignMethod::Dann => Some(Critic::Domain),
        AlignMethod::Mdd => {
            notes.push(format!(
                "adversarial head trained on the margin-disparity surrogate, margin {}",
                cfg.margin
            ));
            Some(Critic::Disparity { margin: cfg.margin })
        }
        AlignMethod::Wdgrl => {
            notes.push("critic kept 1-Lipschitz by spectral projection after every step (no gradient penalty)".into());
            Some(Critic::Dual)
        }
    };
    let mut critic = critic_kind.as_ref().map(|k| {
        let arch = match k {
            Critic::Disparity { .. } => head_arch.clone(),
            _ => AlignConfig::arch(latent_dim, &cfg.critic_hidden, 1).expect("widths validated"),
        };
        let mut p = ParamVector::init(arch, OutputMode::Hard, rng::derive(cfg.seed, 3));
        if matches!(k, Critic::Dual) {
            project_params(&mut p, 1.0);
        }
        p
    });

    let mut opt_psi = Sgd::new(psi.len(), cfg.momentum);
    let mut opt_head = Sgd::new(head.len(), cfg.momentum);
    let mut opt_critic = critic.as_ref().map(|p| Sgd::new(p.len(), cfg.momentum));
    let (ws, wt) = (source.weights(), target.weights());
    let mut rows = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let es = encode_all(&psi, source.points());
        let (class_loss, g_head, dz_class) = ce_terms(&head, &es.z, source.labels(), ws);
        let mut dz_s = dz_class;
        let mut g_psi = ParamVector::zeros(psi.arch().clone());
        let mut row = TraceRow {
            step,
            class_loss,
            align_loss: 0.0,
            critic_grad_norm: 0.0,
            critic_collapsed: false,
        };

        if let (Some(kind), Some(net), Some(opt)) =
            (&critic_kind, critic.as_mut(), opt_critic.as_mut())
        {
            let et = encode_all(&psi, target.points());
            let predict = |z: &[Vec<f64>]| -> Vec<usize> {
                z.iter()
                    .map(|v| argmax(forward(&head, v).output()))
                    .collect()
            };
            let (yhat_s, yhat_t) = match kind {
                Critic::Disparity { .. } => (predict(&es.z), predict(&et.z)),
                _ => (Vec::new(), Vec::new()),
            };
            for _ in 0..cfg.critic_steps {
                let out = critic_terms(kind, net, &es.z, ws, &et.z, wt, &yhat_s, &yhat_t);
                let mut g = out.grad;
                row.critic_grad_norm = g.norm();
                clip(&mut g, cfg.clip_norm);
                opt.step(net, &g, cfg.critic_lr);
                if matches!(kind, Critic::Dual) {
                    project_params(net, 1.0);
                }
            }
            row.critic_collapsed = row.critic_grad_norm < COLLAPSE_TOL;
            // Encoder works against the updated critic.
            let out = critic_terms(kind, net, &es.z, ws, &et.z, wt, &yhat_s, &yhat_t);
            row.align_loss = match kind {
                Critic::Dual => -out.loss,
                _ => out.loss,
            };
            let (enc_s, enc_t, sign) = match kind {
                Critic::Domain => (
                    confusion_dz(net, &es.z, ws),
                    confusion_dz(net, &et.z, wt),
                    1.0,
                ),
                _ => (out.dz_s, out.dz_t, -1.0),
            };
            add_into(&mut dz_s, sign * cfg.weight, &enc_s);
            let dz_t: Vec<Vec<f64>> = enc_t
                .iter()
                .map(|d| d.iter().map(|v| sign * cfg.weight * v).collect())
                .collect();
            encoder_backward(&psi, &et, &dz_t, &mut g_psi);
        }
        encoder_backward(&psi, &es, &dz_s, &mut g_psi);

        if !class_loss.is_finite()
            || !row.align_loss.is_finite()
            || !g_psi.is_finite()
            || !g_head.is_finite()
        {
            return Err(non_finite(step));
        }
        let mut g_head = g_head;
        clip(&mut g_psi, cfg.clip_norm);
        clip(&mut g_head, cfg.clip_norm);
        opt_psi.step(&mut psi, &g_psi, cfg.lr);
        opt_head.step(&mut head, &g_head, cfg.lr);
        rows.push(row);
    }

    let model = RepClassifier {
        psi: Mlp::new(psi, OutputMode::Hard)?,
        head: Mlp::new(head, OutputMode::Hard)?,
        latent_dim,
    };
    Ok((
        model,
        TrainingTrace {
            method: cfg.method,
            rows,
            notes,
        },
    ))
}

/// [`train_aligned`] on an instance, reading only the target's inputs.
pub fn train_on_instance(
    inst: &TransferInstance,
    cfg: &AlignConfig,
) -> Result<(RepClassifier, TrainingTrace)> {
    train_aligned(inst.source(), &inst.target_view(), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub source_acc: f64,
    pub target_acc: f64,
}

/// Exact weighted accuracy.
pub fn accuracy(model: &RepClassifier, data: &LabeledDataset) -> f64 {
    data.iter()
        .filter(|(x, y, _)| model.predict(x) == *y)
        .map(|(_, _, w)| w)
        .fold(0.0, |a, b| a + b)
}

pub fn evaluate(model: &RepClassifier, inst: &TransferInstance) -> Evaluation {
    Evaluation {
        source_acc: accuracy(model, inst.source()),
        target_acc: accuracy(model, inst.evaluation_target()),
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Target mass whose nearest source point in latent space (first index on
/// ties) has a different true label.
pub fn label_mixing_score(model: &RepClassifier, inst: &TransferInstance) -> f64 {
    let zs: Vec<Vec<f64>> = inst
        .source()
        .points()
        .iter()
        .map(|x| model.encode(x))
        .collect();
    let labels = inst.source().labels();
    inst.evaluation_target()
        .iter()
        .filter(|(x, y, _)| {
            let z = model.encode(x);
            let mut best = (0, f64::INFINITY);
            for (i, s) in zs.iter().enumerate() {
                let d = sq_dist(&z, s);
                if d < best.1 {
                    best = (i, d);
                }
            }
            labels[best.0] != *y
        })
        .map(|(_, _, w)| w)
        .fold(0.0, |a, b| a + b)
}

pub const DEFAULT_PROBE_K: usize = 50;

/// Weighted target accuracy of a `k`-nearest-source-neighbour vote in the
/// feature space `features`.
///
/// Votes are summed source weights; vote ties go to the smallest label.
/// Distance ties are broken by label and then weight, never by position, so
/// the result does not depend on source order.
pub fn knn_probe<F>(inst: &TransferInstance, features: F, k: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let source = inst.source();
    if k == 0 || k > source.len() {
        return Err(Error::arg(
            "k",
            format!("must be in 1..={}, found {k}", source.len()),
        ));
    }
    let feats: Vec<Vec<f64>> = source.points().iter().map(|x| features(x)).collect();
    let c = inst.num_classes();
    let mut correct = 0.0;
    let mut order: Vec<(f64, usize, f64)> = Vec::with_capacity(source.len());
    for (x, y, w) in inst.evaluation_target().iter() {
        let q = features(x);
        order.clear();
        order.extend(
            feats
                .iter()
                .zip(source.labels())
                .zip(source.weights())
                .map(|((f, &l), &sw)| (sq_dist(&q, f), l, sw)),
        );
        order.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        });
        let mut votes = vec![0.0; c];
        for &(_, l, sw) in &order[..k] {
            votes[l] += sw;
        }
        if argmax(&votes) == y {
            correct += w;
        }
    }
    Ok(correct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfers::{gen_gaussian_pair, gen_mixup_swap, GeneratorKind, GeneratorSpec};

    fn easy() -> TransferInstance {
        gen_gaussian_pair(&GeneratorSpec {
            shift: 0.5,
            ..GeneratorSpec::preset(GeneratorKind::GaussianPair)
        })
        .unwrap()
    }

    #[test]
    fn source_only_transfers_on_easy_pair() {
        let inst = easy();
        let (m, trace) = train_on_instance(&inst, &AlignConfig::default()).unwrap();
        let e = evaluate(&m, &inst);
        assert!(e.source_acc >= 0.99, "{e:?}");
        assert!(e.target_acc >= 0.95, "{e:?}");
        assert_eq!(trace.rows.len(), 1000);
    }

    #[test]
    fn zero_weight_dann_is_source_only() {
        let inst = easy();
        let cfg = AlignConfig {
            steps: 50,
            ..AlignConfig::default()
        };
        let so = train_on_instance(&inst, &cfg).unwrap();
        let dann = train_on_instance(
            &inst,
            &AlignConfig {
                method: AlignMethod::Dann,
                weight: 0.0,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(so.0, dann.0);
        assert_eq!(so.1.rows, dann.1.rows);
    }

    #[test]
    fn every_method_runs_and_is_deterministic() {
        let inst = easy();
        for method in [AlignMethod::Dann, AlignMethod::Mdd, AlignMethod::Wdgrl] {
            let cfg = AlignConfig {
                method,
                steps: 30,
                ..AlignConfig::default()
            };
            let a = train_on_instance(&inst, &cfg).unwrap();
            let b = train_on_instance(&inst, &cfg).unwrap();
            assert_eq!(a, b);
            assert!(a.1.rows.iter().all(|r| r.align_loss != 0.0));
        }
    }

    #[test]
    fn mixup_identity_probes() {
        let inst = gen_mixup_swap(&GeneratorSpec {
            n_per_class: 60,
            ..GeneratorSpec::preset(GeneratorKind::MixupSwap)
        })
        .unwrap();
        assert_eq!(
            knn_probe(&inst, |x| x.to_vec(), DEFAULT_PROBE_K).unwrap(),
            0.0
        );
        assert!(knn_probe(&inst, |x| x.to_vec(), 121).is_err());
    }
}
