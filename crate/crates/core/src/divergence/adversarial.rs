//! Gradient-ascent lower bounds on the hypothesis-based divergences.
//!
//! The 0-1 disagreement has zero gradient almost everywhere, so the ascent runs
//! on the soft disagreement `1 − ⟨p, p'⟩` between predicted class
//! distributions. Every iterate is scored with the hard 0-1 objective and the
//! best value found is reported: it is attained by a concrete pair of
//! networks, hence a lower bound on the supremum over the family.

use serde::{Deserialize, Serialize};

use super::{Diagnostics, DivergenceEstimate, Method, Status};
use crate::datasets::UnlabeledView;
use crate::error::{Error, Result};
use crate::models::mlp::{backward, forward, output, sigmoid, softmax};
use crate::models::train::Sgd;
use crate::models::{Arch, Hypothesis, Mlp, OutputMode, ParamVector};
use crate::rng;

pub const SURROGATE: &str = "soft disagreement 1 - <p, p'> (product of class probabilities)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub steps: usize,
    pub lr: f64,
    #[serde(default)]
    pub momentum: f64,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            lr: 1.0,
            momentum: 0.5,
        }
    }
}

/// Class probabilities from raw outputs; a single logit is read as binary.
pub(crate) fn probs(out: &[f64]) -> Vec<f64> {
    if out.len() == 1 {
        let s = sigmoid(out[0]);
        vec![1.0 - s, s]
    } else {
        softmax(out)
    }
}

/// Chain rule from `∂/∂p` to `∂/∂z` through [`probs`].
pub(crate) fn probs_backward(out: &[f64], p: &[f64], dp: &[f64]) -> Vec<f64> {
    if out.len() == 1 {
        let s = p[1];
        vec![s * (1.0 - s) * (dp[1] - dp[0])]
    } else {
        let inner: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
        p.iter().zip(dp).map(|(pk, dk)| pk * (dk - inner)).collect()
    }
}

/// Pooled per-coordinate standardization. The first layer is affine, so this
/// reparametrizes the family without changing its reachable labelings.
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(sx: &UnlabeledView, tx: &UnlabeledView) -> Self {
        let d = sx.dim();
        let mut mean = vec![0.0; d];
        for view in [sx, tx] {
            for (x, w) in view.iter() {
                for k in 0..d {
                    mean[k] += 0.5 * w * x[k];
                }
            }
        }
        let mut var = vec![0.0; d];
        for view in [sx, tx] {
            for (x, w) in view.iter() {
                for k in 0..d {
                    var[k] += 0.5 * w * (x[k] - mean[k]).powi(2);
                }
            }
        }
        let scale = var
            .iter()
            .map(|v| if *v > 1e-24 { 1.0 / v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    fn apply(&self, view: &UnlabeledView) -> Vec<Vec<f64>> {
        view.points()
            .iter()
            .map(|x| {
                x.iter()
                    .zip(&self.mean)
                    .zip(&self.scale)
                    .map(|((v, m), s)| (v - m) * s)
                    .collect()
            })
            .collect()
    }
}

/// One side of the objective: standardized points with signed weights
/// (`+w` on target, `−w` on source).
struct Signed {
    points: Vec<Vec<f64>>,
    coef: Vec<f64>,
}

fn signed_support(sx: &UnlabeledView, tx: &UnlabeledView) -> Signed {
    let st = Standardizer::fit(sx, tx);
    let mut points = st.apply(sx);
    let mut coef: Vec<f64> = sx.weights().iter().map(|w| -w).collect();
    points.extend(st.apply(tx));
    coef.extend(tx.weights().iter().cloned());
    Signed { points, coef }
}

/// Soft objective and its gradient for `params`, against fixed partner
/// distributions `partner[i]`.
fn ascent_grad(params: &ParamVector, data: &Signed, partner: &[Vec<f64>]) -> (f64, ParamVector) {
    let mut grad = ParamVector::zeros(params.arch().clone());
    let mut total = 0.0;
    for ((x, &c), q) in data.points.iter().zip(&data.coef).zip(partner) {
        if c == 0.0 {
            continue;
        }
        let trace = forward(params, x);
        let out = trace.output();
        let p = probs(out);
        let agree: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
        total += c * (1.0 - agree);
        let dp: Vec<f64> = q.iter().map(|qk| -c * qk).collect();
        let dz = probs_backward(out, &p, &dp);
        backward(params, &trace, &dz, &mut grad);
    }
    (total, grad)
}

fn hard_labels(params: &ParamVector, data: &Signed) -> Vec<usize> {
    let m = Mlp::new(params.clone(), OutputMode::Hard).expect("hard mode accepts any arch");
    data.points.iter().map(|x| m.predict(x)).collect()
}

fn soft_outputs(params: &ParamVector, data: &Signed) -> Vec<Vec<f64>> {
    data.points
        .iter()
        .map(|x| probs(&output(params, x)))
        .collect()
}

fn hard_objective(a: &[usize], b: &[usize], data: &Signed) -> f64 {
    a.iter()
        .zip(b)
        .zip(&data.coef)
        .filter(|((x, y), _)| x != y)
        .map(|(_, c)| c)
        .fold(0.0, |a, b| a + b)
}

fn check(
    arch: &Arch,
    sx: &UnlabeledView,
    tx: &UnlabeledView,
    config: &AdversaryConfig,
) -> Result<()> {
    if sx.dim() != tx.dim() || arch.input_dim() != sx.dim() {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim(),
            found: if sx.dim() != arch.input_dim() {
                sx.dim()
            } else {
                tx.dim()
            },
        });
    }
    if !(config.lr > 0.0) || !config.lr.is_finite() {
        return Err(Error::arg(
            "adversary.lr",
            "step size must be positive and finite",
        ));
    }
    Ok(())
}

fn diverged(step: usize) -> Error {
    Error::NonFinite {
        context: "adversarial divergence ascent".into(),
        step,
    }
}

/// Lower bound on `sup_{h,h'} ε_T(h,h') − ε_S(h,h')` over hard-mode networks
/// of architecture `arch`, by alternating ascent on both networks.
pub fn hdh_divergence_adversarial(
    arch: &Arch,
    sx: &UnlabeledView,
    tx: &UnlabeledView,
    config: &AdversaryConfig,
    seed: u64,
) -> Result<DivergenceEstimate> {
    check(arch, sx, tx, config)?;
    let data = signed_support(sx, tx);
    let mut h = ParamVector::init(arch.clone(), OutputMode::Hard, rng::derive(seed, 1));
    let mut g = ParamVector::init(arch.clone(), OutputMode::Hard, rng::derive(seed, 2));
    let mut opt_h = Sgd::new(h.len(), config.momentum);
    let mut opt_g = Sgd::new(g.len(), config.momentum);
    let mut best = hard_objective(&hard_labels(&h, &data), &hard_labels(&g, &data), &data).max(0.0);
    let mut soft = 0.0;
    for step in 0..config.steps {
        let partner = soft_outputs(&g, &data);
        let (_, grad_h) = ascent_grad(&h, &data, &partner);
        opt_h.step(&mut h, &grad_h, -config.lr);
        let partner = soft_outputs(&h, &data);
        let (value, grad_g) = ascent_grad(&g, &data, &partner);
        opt_g.step(&mut g, &grad_g, -config.lr);
        if !h.is_finite() || !g.is_finite() || !value.is_finite() {
            return Err(diverged(step));
        }
        soft = value;
        best = best.max(hard_objective(
            &hard_labels(&h, &data),
            &hard_labels(&g, &data),
            &data,
        ));
    }
    Ok(DivergenceEstimate {
        value: best,
        method: Method::Adversarial,
        status: Status::LowerBound,
        diagnostics: Diagnostics {
            iterations: config.steps,
            final_objective: soft,
            converged: true,
            surrogate: Some(SURROGATE.into()),
            ..Diagnostics::default()
        },
    })
}

/// Lower bound on `sup_{h'} ε_T(h,h') − ε_S(h,h')` with `h` fixed and `h'`
/// ranging over hard-mode networks of architecture `arch`.
pub fn single_hyp_discrepancy_adversarial(
    h: &Hypothesis,
    arch: &Arch,
    sx: &UnlabeledView,
    tx: &UnlabeledView,
    config: &AdversaryConfig,
    seed: u64,
) -> Result<DivergenceEstimate> {
    check(arch, sx, tx, config)?;
    let data = signed_support(sx, tx);
    let labels = arch.output_dim().max(2);
    let fixed: Vec<usize> = sx
        .points()
        .iter()
        .chain(tx.points())
        .map(|x| h.predict(x))
        .collect();
    if let Some(&l) = fixed.iter().find(|&&l| l >= labels) {
        return Err(Error::arg(
            "h",
            format!("label {l} exceeds the adversary's {labels} outputs"),
        ));
    }
    let partner: Vec<Vec<f64>> = fixed
        .iter()
        .map(|&l| {
            (0..labels)
                .map(|k| if k == l { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let mut g = ParamVector::init(arch.clone(), OutputMode::Hard, rng::derive(seed, 2));
    let mut opt = Sgd::new(g.len(), config.momentum);
    let mut best = hard_objective(&fixed, &hard_labels(&g, &data), &data);
    let mut soft = 0.0;
    for step in 0..config.steps {
        let (value, grad) = ascent_grad(&g, &data, &partner);
        opt.step(&mut g, &grad, -config.lr);
        if !g.is_finite() || !value.is_finite() {
            return Err(diverged(step));
        }
        soft = value;
        best = best.max(hard_objective(&fixed, &hard_labels(&g, &data), &data));
    }
    Ok(DivergenceEstimate {
        value: best,
        method: Method::Adversarial,
        status: Status::LowerBound,
        diagnostics: Diagnostics {
            iterations: config.steps,
            final_objective: soft,
            converged: true,
            surrogate: Some(SURROGATE.into()),
            ..Diagnostics::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_chain_rule_matches_differences() {
        for out in [vec![0.3], vec![0.2, -1.0, 0.7]] {
            let p = probs(&out);
            let dp: Vec<f64> = (0..p.len()).map(|k| 0.5 - k as f64).collect();
            let dz = probs_backward(&out, &p, &dp);
            for k in 0..out.len() {
                let f = |delta: f64| {
                    let mut o = out.clone();
                    o[k] += delta;
                    probs(&o).iter().zip(&dp).map(|(a, b)| a * b).sum::<f64>()
                };
                let fd = (f(1e-6) - f(-1e-6)) / 2e-6;
                assert!((fd - dz[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn identical_marginals_find_nothing() {
        let v = UnlabeledView::uniform(
            (0..20)
                .map(|i| vec![i as f64 * 0.1, (i % 3) as f64])
                .collect(),
        )
        .unwrap();
        let arch = Arch::new(vec![2, 8, 1]).unwrap();
        for seed in 0..3 {
            let est = hdh_divergence_adversarial(&arch, &v, &v, &AdversaryConfig::default(), seed)
                .unwrap();
            assert!(est.value <= 0.05);
            assert_eq!(est.status, Status::LowerBound);
        }
    }

    #[test]
    fn separated_supports_are_found() {
        let s = UnlabeledView::uniform(vec![vec![0.0, 0.0], vec![0.2, 0.1]]).unwrap();
        let t = UnlabeledView::uniform(vec![vec![2.0, 1.0], vec![2.1, 1.3]]).unwrap();
        let arch = Arch::new(vec![2, 8, 2]).unwrap();
        let est =
            hdh_divergence_adversarial(&arch, &s, &t, &AdversaryConfig::default(), 0).unwrap();
        assert_eq!(est.value, 1.0);
        let h = Hypothesis::Constant { label: 0 };
        let est =
            single_hyp_discrepancy_adversarial(&h, &arch, &s, &t, &AdversaryConfig::default(), 0)
                .unwrap();
        assert_eq!(est.value, 1.0);
    }
}
