//! Hypotheses, exact risks and the MLP machinery behind parametric families.

pub mod lipschitz;
pub mod mlp;
pub mod train;

use serde::{Deserialize, Serialize};

pub use lipschitz::{lipschitz_bound, project_lipschitz, LipschitzCertificate};
pub use mlp::{Arch, Mlp, OutputMode, ParamVector};
pub use train::{grad, train_from, train_supervised, Loss, OptConfig, Schedule};

use crate::datasets::{LabeledDataset, UnlabeledView};
use crate::error::{Error, Result};

/// Anything that is a weighted finite support over R^d.
pub trait WeightedSupport {
    fn support_points(&self) -> &[Vec<f64>];
    fn support_weights(&self) -> &[f64];
    fn support_dim(&self) -> usize;
}

impl WeightedSupport for LabeledDataset {
    fn support_points(&self) -> &[Vec<f64>] {
        self.points()
    }
    fn support_weights(&self) -> &[f64] {
        self.weights()
    }
    fn support_dim(&self) -> usize {
        self.dim()
    }
}

impl WeightedSupport for UnlabeledView {
    fn support_points(&self) -> &[Vec<f64>] {
        self.points()
    }
    fn support_weights(&self) -> &[f64] {
        self.weights()
    }
    fn support_dim(&self) -> usize {
        self.dim()
    }
}

/// A deterministic classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hypothesis {
    Constant {
        label: usize,
    },
    /// `above` when `x[feature] >= threshold`, else `below`.
    Stump {
        feature: usize,
        threshold: f64,
        below: usize,
        above: usize,
    },
    /// Exact lookup on a finite domain; unseen inputs get `default`.
    Table {
        points: Vec<Vec<f64>>,
        labels: Vec<usize>,
        default: usize,
    },
    /// Label 1 when `w·x + b >= 0`, else 0.
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    /// `(h(x) + 1) mod num_classes`; the label flip for binary problems.
    Complement {
        inner: Box<Hypothesis>,
        num_classes: usize,
    },
    Mlp {
        model: Mlp,
    },
}

impl Hypothesis {
    pub fn threshold(threshold: f64) -> Self {
        Hypothesis::Stump {
            feature: 0,
            threshold,
            below: 0,
            above: 1,
        }
    }

    pub fn complement(inner: Hypothesis, num_classes: usize) -> Self {
        Hypothesis::Complement {
            inner: Box::new(inner),
            num_classes,
        }
    }

    /// Input dimension when the hypothesis fixes one.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Hypothesis::Constant { .. } => None,
            Hypothesis::Stump { .. } => None,
            Hypothesis::Table { points, .. } => points.first().map(Vec::len),
            Hypothesis::Linear { weights, .. } => Some(weights.len()),
            Hypothesis::Complement { inner, .. } => inner.input_dim(),
            Hypothesis::Mlp { model } => Some(model.input_dim()),
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        match self {
            Hypothesis::Constant { label } => *label,
            Hypothesis::Stump {
                feature,
                threshold,
                below,
                above,
            } => {
                if x[*feature] >= *threshold {
                    *above
                } else {
                    *below
                }
            }
            Hypothesis::Table {
                points,
                labels,
                default,
            } => points
                .iter()
                .position(|p| p.as_slice() == x)
                .map_or(*default, |i| labels[i]),
            Hypothesis::Linear { weights, bias } => {
                let s: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
                usize::from(s >= 0.0)
            }
            Hypothesis::Complement { inner, num_classes } => (inner.predict(x) + 1) % num_classes,
            Hypothesis::Mlp { model } => model.predict(x),
        }
    }

    /// Real-valued output: the clamped score of an L1-mode network, the
    /// predicted label otherwise.
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            Hypothesis::Mlp { model } => model.score(x),
            other => other.predict(x) as f64,
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self.input_dim() {
            Some(d) if d != dim => Err(Error::DimensionMismatch {
                expected: d,
                found: dim,
            }),
            _ => match self {
                Hypothesis::Stump { feature, .. } if *feature >= dim => {
                    Err(Error::DimensionMismatch {
                        expected: feature + 1,
                        found: dim,
                    })
                }
                _ => Ok(()),
            },
        }
    }
}

impl From<Mlp> for Hypothesis {
    fn from(model: Mlp) -> Self {
        Hypothesis::Mlp { model }
    }
}

/// Exact weighted 0-1 risk `E[1[h(x) ≠ y]]`.
pub fn risk01(h: &Hypothesis, data: &LabeledDataset) -> Result<f64> {
    h.check_dim(data.dim())?;
    Ok(data
        .iter()
        .filter(|(x, y, _)| h.predict(x) != *y)
        .map(|(_, _, w)| w)
        .fold(0.0, |a, b| a + b))
}

/// Exact weighted disagreement `E[1[h(x) ≠ h'(x)]]`.
pub fn disagreement<D: WeightedSupport + ?Sized>(
    h: &Hypothesis,
    other: &Hypothesis,
    data: &D,
) -> Result<f64> {
    h.check_dim(data.support_dim())?;
    other.check_dim(data.support_dim())?;
    Ok(data
        .support_points()
        .iter()
        .zip(data.support_weights())
        .filter(|(x, _)| h.predict(x) != other.predict(x))
        .map(|(_, w)| w)
        .fold(0.0, |a, b| a + b))
}

/// Exact weighted L1 cost `E[|h(x) - y|]` on binary data.
pub fn risk_l1(h: &Hypothesis, data: &LabeledDataset) -> Result<f64> {
    if data.num_classes() != 2 {
        return Err(Error::arg(
            "data",
            "L1 risk is defined for binary labels only",
        ));
    }
    h.check_dim(data.dim())?;
    Ok(data
        .iter()
        .map(|(x, y, w)| w * (h.score(x) - y as f64).abs())
        .sum())
}

/// A finite, enumerable hypothesis class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteClass {
    name: String,
    members: Vec<Hypothesis>,
}

impl FiniteClass {
    pub fn new(name: impl Into<String>, members: Vec<Hypothesis>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::arg(
                "class",
                "a finite class needs at least one member",
            ));
        }
        let dims: Vec<usize> = members.iter().filter_map(Hypothesis::input_dim).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::arg("class", "members disagree on input dimension"));
        }
        Ok(Self {
            name: name.into(),
            members,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn members(&self) -> &[Hypothesis] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn index_of(&self, h: &Hypothesis) -> Result<usize> {
        self.members
            .iter()
            .position(|m| m == h)
            .ok_or_else(|| Error::NotInClass(self.name.clone()))
    }

    /// `preds[h][i]`: label of member `h` at support point `i`.
    pub fn predictions<D: WeightedSupport + ?Sized>(&self, data: &D) -> Result<Vec<Vec<usize>>> {
        self.members
            .iter()
            .map(|h| {
                h.check_dim(data.support_dim())?;
                Ok(data.support_points().iter().map(|x| h.predict(x)).collect())
            })
            .collect()
    }

    /// Every labeling of a finite domain into `num_classes` labels.
    pub fn all_labelings(name: &str, domain: &[Vec<f64>], num_classes: usize) -> Result<Self> {
        let n = domain.len() as u32;
        let count = (num_classes as u64)
            .checked_pow(n)
            .filter(|&c| c <= 1 << 16)
            .ok_or_else(|| Error::arg("class", "too many labelings to enumerate"))?;
        let members = (0..count)
            .map(|mut code| {
                let labels = (0..domain.len())
                    .map(|_| {
                        let l = (code % num_classes as u64) as usize;
                        code /= num_classes as u64;
                        l
                    })
                    .collect();
                Hypothesis::Table {
                    points: domain.to_vec(),
                    labels,
                    default: 0,
                }
            })
            .collect();
        Self::new(name, members)
    }
}
