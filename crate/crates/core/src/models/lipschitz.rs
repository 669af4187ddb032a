//! Spectral Lipschitz certificates and projection.
//!
//! A network's Lipschitz constant (Euclidean in, Euclidean out) is bounded by
//! the product of its layers' spectral norms, since the leaky rectifier and the
//! output clamp are 1-Lipschitz.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, ParamVector};
use crate::rng;

pub const POWER_ITERATIONS: usize = 50;
pub const POWER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCertificate {
    pub k: f64,
    pub per_layer: Vec<f64>,
}

impl LipschitzCertificate {
    fn from_layers(per_layer: Vec<f64>) -> Self {
        let k = per_layer.iter().product();
        Self { k, per_layer }
    }
}

/// Largest singular value estimate of a row-major `rows × cols` matrix by
/// power iteration on `WᵀW`, started from a vector seeded by `layer`.
pub fn power_iteration(w: &[f64], rows: usize, cols: usize, layer: usize) -> f64 {
    let mut rng = rng::stream(0xD1CE, layer as u64);
    let mut v: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= n);
        let u: Vec<f64> = (0..rows)
            .map(|r| {
                w[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let next_sigma = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut next = vec![0.0; cols];
        for r in 0..rows {
            for c in 0..cols {
                next[c] += w[r * cols + c] * u[r];
            }
        }
        let converged = (next_sigma - sigma).abs() <= POWER_TOL * next_sigma.max(1.0);
        sigma = next_sigma;
        v = next;
        if converged {
            break;
        }
    }
    sigma
}

/// Certified spectral norm of one layer.
///
/// Power iteration approaches the top singular value from below, so the
/// estimate is raised to the dense SVD value whenever it falls short.
pub fn layer_spectral_norm(w: &[f64], rows: usize, cols: usize, layer: usize) -> f64 {
    let estimate = power_iteration(w, rows, cols, layer);
    let exact = DMatrix::from_row_slice(rows, cols, w)
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    estimate.max(exact)
}

/// Per-layer spectral norms of a parameter vector.
pub fn layer_norms(params: &ParamVector) -> Vec<f64> {
    let arch = params.arch();
    (0..arch.num_layers())
        .map(|l| {
            let (fan_in, fan_out) = arch.layer_shape(l);
            layer_spectral_norm(params.layer_weights(l), fan_out, fan_in, l)
        })
        .collect()
}

pub fn lipschitz_bound(model: &Mlp) -> LipschitzCertificate {
    LipschitzCertificate::from_layers(layer_norms(model.params()))
}

/// Certificate for a linear score `w·x + b`.
pub fn linear_bound(weights: &[f64]) -> LipschitzCertificate {
    LipschitzCertificate::from_layers(vec![weights.iter().map(|w| w * w).sum::<f64>().sqrt()])
}

/// Rescales layers in place so the certified constant is at most `k_target`.
///
/// Parameters already within the target are left untouched; otherwise every
/// layer whose norm exceeds `k_target^(1/L)` is scaled down to it.
pub fn project_params(params: &mut ParamVector, k_target: f64) {
    let norms = layer_norms(params);
    if norms.iter().product::<f64>() <= k_target {
        return;
    }
    let per_layer = k_target.powf(1.0 / norms.len() as f64);
    for (l, &sigma) in norms.iter().enumerate() {
        if sigma > per_layer {
            let scale = per_layer / sigma;
            params
                .layer_weights_mut(l)
                .iter_mut()
                .for_each(|w| *w *= scale);
        }
    }
}

pub fn project_lipschitz(model: &Mlp, k_target: f64) -> Mlp {
    let mut out = model.clone();
    project_params(out.params_mut(), k_target);
    out
}
