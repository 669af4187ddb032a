//! The joint-optimal error `λ = inf_{h'} ε_S(h') + ε_T(h')`.
//!
//! This needs target labels, so it only ever sees an evaluation view of the
//! target. The infimum ranges over the supplied class, never over all
//! measurable functions.

use serde::{Deserialize, Serialize};

use super::Status;
use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::models::train::{train_supervised, Loss, OptConfig};
use crate::models::{risk01, risk_l1, Arch, FiniteClass, Hypothesis, OutputMode};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Witness {
    /// Index into the finite class.
    Index(usize),
    Model(Hypothesis),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub value: f64,
    pub status: Status,
    pub witness: Witness,
}

/// Exact minimum of `ε_S + ε_T` (0-1 risks) over a finite class.
pub fn lambda_exact(
    class: &FiniteClass,
    source: &LabeledDataset,
    target_eval: &LabeledDataset,
) -> Result<LambdaEstimate> {
    let mut best: Option<(usize, f64)> = None;
    for (i, h) in class.members().iter().enumerate() {
        let v = risk01(h, source)? + risk01(h, target_eval)?;
        if best.map_or(true, |(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    let (i, value) = best.expect("finite classes are non-empty");
    Ok(LambdaEstimate {
        value,
        status: Status::Optimal,
        witness: Witness::Index(i),
    })
}

/// Joint source+target sample with each side carrying half the mass.
fn pooled(source: &LabeledDataset, target: &LabeledDataset) -> Result<LabeledDataset> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            found: target.dim(),
        });
    }
    let mut points = source.points().to_vec();
    points.extend(target.points().iter().cloned());
    let mut labels = source.labels().to_vec();
    labels.extend(target.labels());
    let weights = source
        .weights()
        .iter()
        .chain(target.weights())
        .map(|w| 0.5 * w)
        .collect();
    LabeledDataset::new(
        points,
        labels,
        weights,
        source.num_classes().max(target.num_classes()),
    )
}

/// Upper bound on λ over networks of `arch`: the best of `restarts` networks
/// trained on the pooled sample, evaluated exactly. L1 mode measures both
/// risks in L1, hard mode in 0-1. Set `opt.lipschitz` to keep the witness
/// inside a Lipschitz-constrained family.
pub fn lambda_trained(
    arch: &Arch,
    mode: OutputMode,
    source: &LabeledDataset,
    target_eval: &LabeledDataset,
    opt: &OptConfig,
    seed: u64,
    restarts: usize,
) -> Result<LambdaEstimate> {
    if restarts == 0 {
        return Err(Error::arg("restarts", "need at least one restart"));
    }
    if mode == OutputMode::L1 && opt.loss != Loss::L1 {
        return Err(Error::arg(
            "opt.loss",
            "an L1-mode witness is trained with the L1 loss",
        ));
    }
    let joint = pooled(source, target_eval)?;
    let mut best: Option<(Hypothesis, f64)> = None;
    for r in 0..restarts {
        let model = train_supervised(arch, mode, &joint, opt, rng::derive(seed, r as u64))?;
        let h = Hypothesis::from(model);
        let v = match mode {
            OutputMode::L1 => risk_l1(&h, source)? + risk_l1(&h, target_eval)?,
            OutputMode::Hard => risk01(&h, source)? + risk01(&h, target_eval)?,
        };
        if best.as_ref().map_or(true, |(_, b)| v < *b) {
            best = Some((h, v));
        }
    }
    let (h, value) = best.unwrap();
    Ok(LambdaEstimate {
        value,
        status: Status::UpperBound,
        witness: Witness::Model(h),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn threshold_class() -> FiniteClass {
        FiniteClass::new(
            "thresholds",
            vec![
                Hypothesis::threshold(-2.0),
                Hypothesis::threshold(0.0),
                Hypothesis::threshold(2.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn threshold_example_is_realizable() {
        let s = LabeledDataset::uniform(vec![vec![-1.0], vec![1.0]], vec![0, 1], 2).unwrap();
        let t = LabeledDataset::uniform(vec![vec![1.0]], vec![1], 2).unwrap();
        let est = lambda_exact(&threshold_class(), &s, &t).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.witness, Witness::Index(1));
        assert_eq!(est.status, Status::Optimal);
    }

    #[test]
    fn constants_pay_one() {
        let class = FiniteClass::new(
            "constants",
            vec![
                Hypothesis::Constant { label: 0 },
                Hypothesis::Constant { label: 1 },
            ],
        )
        .unwrap();
        let s = LabeledDataset::uniform(vec![vec![0.0]], vec![0], 2).unwrap();
        let t = LabeledDataset::uniform(vec![vec![1.0]], vec![1], 2).unwrap();
        let est = lambda_exact(&class, &s, &t).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.witness, Witness::Index(0));
    }

    #[test]
    fn trained_witness_reaches_zero_on_separable_union() {
        let s = LabeledDataset::uniform(vec![vec![0.0], vec![1.0]], vec![0, 1], 2).unwrap();
        let t = LabeledDataset::uniform(vec![vec![0.1], vec![1.1]], vec![0, 1], 2).unwrap();
        let arch = Arch::new(vec![1, 1]).unwrap();
        let opt = OptConfig::new(2000, 0.5, Loss::L1);
        let est = lambda_trained(&arch, OutputMode::L1, &s, &t, &opt, 3, 2).unwrap();
        assert_eq!(est.status, Status::UpperBound);
        assert!(est.value < 0.05, "{}", est.value);
    }
}
