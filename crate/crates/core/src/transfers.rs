//! Seeded generators for small transfer instances with known pathologies.
//!
//! Every generator is a pure function of its [`GeneratorSpec`]; equal specs
//! give bit-identical instances.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datasets::{resample_prior, LabeledDataset, ShiftKind, TransferInstance};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    GaussianPair,
    MixupSwap,
    PriorShift,
    Confounder,
    InvarianceFlip,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::GaussianPair => "gaussian_pair",
            GeneratorKind::MixupSwap => "mixup_swap",
            GeneratorKind::PriorShift => "prior_shift",
            GeneratorKind::Confounder => "confounder",
            GeneratorKind::InvarianceFlip => "invariance_flip",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace('-', "_").as_str() {
            "gaussian_pair" => GeneratorKind::GaussianPair,
            "mixup_swap" => GeneratorKind::MixupSwap,
            "prior_shift" => GeneratorKind::PriorShift,
            "confounder" => GeneratorKind::Confounder,
            "invariance_flip" => GeneratorKind::InvarianceFlip,
            other => return Err(Error::arg("kind", format!("unknown generator `{other}`"))),
        })
    }
}

/// Placement of the class centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `c · separation` along the first axis, starting at the origin.
    Line,
    /// As `Line`, translated so the centers are symmetric about the origin.
    Centered,
    /// Evenly spaced on a circle in the first two coordinates, neighbours
    /// `separation` apart.
    Ring,
    /// Independent Gaussian directions scaled to norm `separation`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub dim: usize,
    pub num_classes: usize,
    pub n_per_class: usize,
    /// Isotropic noise standard deviation around each center.
    pub sigma: f64,
    pub separation: f64,
    pub layout: Layout,
    /// Translation length for `gaussian_pair`.
    pub shift: f64,
    /// Translation direction; the first axis when absent.
    #[serde(default)]
    pub shift_direction: Option<Vec<f64>>,
    /// Target class proportions for `prior_shift`; a linear ramp when absent.
    #[serde(default)]
    pub ratios: Option<Vec<f64>>,
    /// Spacing between class bands on the signal coordinate (`confounder`).
    pub signal_gap: f64,
    /// Spacing between class codes on the distractor coordinates (`confounder`).
    pub distractor_gap: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Kind-specific defaults.
    pub fn preset(kind: GeneratorKind) -> Self {
        let base = Self {
            kind,
            dim: 2,
            num_classes: 2,
            n_per_class: 50,
            sigma: 0.5,
            separation: 5.0,
            layout: Layout::Line,
            shift: 0.0,
            shift_direction: None,
            ratios: None,
            signal_gap: 1.0,
            distractor_gap: 0.2,
            seed: 0,
        };
        match kind {
            GeneratorKind::GaussianPair => Self { shift: 1.0, ..base },
            GeneratorKind::MixupSwap => Self {
                dim: 1,
                sigma: 0.0,
                separation: 1.0,
                n_per_class: 1,
                ..base
            },
            GeneratorKind::PriorShift => Self {
                num_classes: 10,
                layout: Layout::Ring,
                separation: 2.0,
                ..base
            },
            GeneratorKind::Confounder => base,
            GeneratorKind::InvarianceFlip => Self {
                layout: Layout::Centered,
                ..base
            },
        }
    }

    /// The easy covariate-shift case: classes at 0 and 1 on the line, target
    /// translated by `shift`.
    pub fn easy_case(shift: f64) -> Self {
        Self {
            dim: 1,
            n_per_class: 1,
            sigma: 0.0,
            separation: 1.0,
            shift,
            ..Self::preset(GeneratorKind::GaussianPair)
        }
    }

    /// Checks ranges; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::arg("dim", "must be at least 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::arg("num_classes", "must be at least 2"));
        }
        if self.n_per_class == 0 {
            return Err(Error::arg("n_per_class", "must be at least 1"));
        }
        for (field, v) in [
            ("sigma", self.sigma),
            ("separation", self.separation),
            ("shift", self.shift),
            ("signal_gap", self.signal_gap),
            ("distractor_gap", self.distractor_gap),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::arg(
                    field,
                    format!("{v} is not a finite nonnegative number"),
                ));
            }
        }
        if let Some(d) = &self.shift_direction {
            if d.len() != self.dim {
                return Err(Error::arg(
                    "shift_direction",
                    format!("expected {} entries, found {}", self.dim, d.len()),
                ));
            }
            let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::arg(
                    "shift_direction",
                    "must be a finite nonzero vector",
                ));
            }
        }
        if let Some(r) = &self.ratios {
            if r.len() != self.num_classes {
                return Err(Error::arg(
                    "ratios",
                    format!("expected {} entries, found {}", self.num_classes, r.len()),
                ));
            }
            if let Some(i) = r.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::arg(
                    format!("ratios[{i}]"),
                    format!("{} is not a valid proportion", r[i]),
                ));
            }
            let total: f64 = r.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::arg(
                    "ratios",
                    format!("entries sum to {total}, expected 1"),
                ));
            }
        }
        match self.kind {
            GeneratorKind::MixupSwap if self.num_classes != 2 => Err(Error::arg(
                "num_classes",
                "mixup_swap needs exactly 2 classes",
            )),
            GeneratorKind::Confounder if self.dim < 2 => Err(Error::arg(
                "dim",
                "confounder needs a signal and at least one distractor coordinate",
            )),
            GeneratorKind::PriorShift if self.ratios.is_none() && self.num_classes < 2 => {
                Err(Error::arg("num_classes", "need at least 2 classes"))
            }
            _ => Ok(()),
        }
    }
}

/// Linear ramp of class proportions from `lo` to `hi`, normalized.
pub fn ramp_ratios(num_classes: usize, lo: f64, hi: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..num_classes)
        .map(|c| lo + (hi - lo) * c as f64 / (num_classes.max(2) - 1) as f64)
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// Class centers for `spec.layout`.
pub fn centers(spec: &GeneratorSpec) -> Vec<Vec<f64>> {
    let (c, d, s) = (spec.num_classes, spec.dim, spec.separation);
    match spec.layout {
        Layout::Line | Layout::Centered => {
            let offset = if spec.layout == Layout::Centered {
                0.5 * s * (c - 1) as f64
            } else {
                0.0
            };
            (0..c)
                .map(|k| {
                    let mut v = vec![0.0; d];
                    v[0] = k as f64 * s - offset;
                    v
                })
                .collect()
        }
        Layout::Ring if d >= 2 => {
            let radius = s / (2.0 * (std::f64::consts::PI / c as f64).sin());
            (0..c)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / c as f64;
                    let mut v = vec![0.0; d];
                    v[0] = radius * a.cos();
                    v[1] = radius * a.sin();
                    v
                })
                .collect()
        }
        Layout::Ring => centers(&GeneratorSpec {
            layout: Layout::Line,
            ..spec.clone()
        }),
        Layout::Random => {
            let mut r = rng::stream(spec.seed, 0xCE17);
            (0..c)
                .map(|_| {
                    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                    v.into_iter().map(|x| s * x / n).collect()
                })
                .collect()
        }
    }
}

/// `n_per_class` noisy copies of each center, labels by cluster, class-major order.
fn clusters(spec: &GeneratorSpec, centers: &[Vec<f64>], r: &mut Rng) -> Result<LabeledDataset> {
    let mut points = Vec::with_capacity(centers.len() * spec.n_per_class);
    let mut labels = Vec::with_capacity(points.capacity());
    for (k, c) in centers.iter().enumerate() {
        for _ in 0..spec.n_per_class {
            points.push(
                c.iter()
                    .map(|v| {
                        let z: f64 = StandardNormal.sample(r);
                        v + spec.sigma * z
                    })
                    .collect(),
            );
            labels.push(k);
        }
    }
    LabeledDataset::uniform(points, labels, spec.num_classes)
}

fn check_kind(spec: &GeneratorSpec, kind: GeneratorKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::arg(
            "kind",
            format!("expected {}, found {}", kind.as_str(), spec.kind.as_str()),
        ));
    }
    spec.validate()
}

/// Gaussian clusters and the same sample translated by `shift` along
/// `shift_direction`.
pub fn gen_gaussian_pair(spec: &GeneratorSpec) -> Result<TransferInstance> {
    check_kind(spec, GeneratorKind::GaussianPair)?;
    let source = clusters(spec, &centers(spec), &mut rng::stream(spec.seed, 1))?;
    let mut dir = spec.shift_direction.clone().unwrap_or_else(|| {
        let mut e = vec![0.0; spec.dim];
        e[0] = 1.0;
        e
    });
    let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter_mut().for_each(|v| *v *= spec.shift / n);
    let target = source.map_points(|x| x.iter().zip(&dir).map(|(a, b)| a + b).collect())?;
    TransferInstance::new(source, target, ShiftKind::Covariate, spec.seed)
}

/// Two clusters whose labels are exchanged in the target: equal marginals,
/// swapped conditionals.
pub fn gen_mixup_swap(spec: &GeneratorSpec) -> Result<TransferInstance> {
    check_kind(spec, GeneratorKind::MixupSwap)?;
    let c = centers(spec);
    let source = clusters(spec, &c, &mut rng::stream(spec.seed, 1))?;
    let swapped: Vec<Vec<f64>> = c.iter().rev().cloned().collect();
    let target = clusters(spec, &swapped, &mut rng::stream(spec.seed, 2))?;
    TransferInstance::new(source, target, ShiftKind::Mixup, spec.seed)
}

/// Balanced source; target is the same sample reweighted to `ratios`, so the
/// class conditionals agree exactly.
pub fn gen_prior_shift(spec: &GeneratorSpec) -> Result<TransferInstance> {
    check_kind(spec, GeneratorKind::PriorShift)?;
    let source = clusters(spec, &centers(spec), &mut rng::stream(spec.seed, 1))?;
    let ratios = spec
        .ratios
        .clone()
        .unwrap_or_else(|| ramp_ratios(spec.num_classes, 0.05, 0.20));
    let target = resample_prior(&source, &ratios).map_err(|e| match e {
        Error::InvalidArgument { message, .. } => Error::arg("ratios", message),
        e => e,
    })?;
    TransferInstance::new(source, target, ShiftKind::PriorShift, spec.seed)
}

/// Points `[signal, distractor..]` where the signal band determines the label
/// in both domains, and the distractor encodes the label in the source but
/// an independent uniform label in the target.
pub fn gen_confounder(spec: &GeneratorSpec) -> Result<TransferInstance> {
    check_kind(spec, GeneratorKind::Confounder)?;
    let source = confounded(spec, true, false, 1)?;
    let target = confounded(spec, false, false, 2)?;
    TransferInstance::new(source, target, ShiftKind::Confounder, spec.seed)
}

/// Pre-training data for the confounder family: the distractor carries the
/// label and the signal coordinate does not. Training on it and then on the
/// source is the analogue of starting from a pre-trained network.
pub fn gen_confounder_pretext(spec: &GeneratorSpec) -> Result<LabeledDataset> {
    check_kind(spec, GeneratorKind::Confounder)?;
    confounded(spec, true, true, 3)
}

fn confounded(
    spec: &GeneratorSpec,
    distractor_tracks: bool,
    signal_random: bool,
    tag: u64,
) -> Result<LabeledDataset> {
    let mut r = rng::stream(spec.seed, tag);
    let c = spec.num_classes;
    let mut points = Vec::with_capacity(c * spec.n_per_class);
    let mut labels = Vec::with_capacity(points.capacity());
    for k in 0..c {
        for _ in 0..spec.n_per_class {
            let band = if signal_random {
                r.random_range(0..c)
            } else {
                k
            };
            let code = if distractor_tracks {
                k
            } else {
                r.random_range(0..c)
            };
            let mut x = Vec::with_capacity(spec.dim);
            x.push((band as f64 + r.random_range(-0.3..0.3)) * spec.signal_gap);
            for _ in 1..spec.dim {
                x.push(code as f64 * spec.distractor_gap);
            }
            points.push(x);
            labels.push(k);
        }
    }
    LabeledDataset::uniform(points, labels, c)
}

/// Gaussian clusters; the target is the same sample with every coordinate
/// negated.
pub fn gen_invariance_flip(spec: &GeneratorSpec) -> Result<TransferInstance> {
    check_kind(spec, GeneratorKind::InvarianceFlip)?;
    let source = clusters(spec, &centers(spec), &mut rng::stream(spec.seed, 1))?;
    let target = flip(&source)?;
    TransferInstance::new(source, target, ShiftKind::Invariance, spec.seed)
}

/// `x ↦ −x`, labels and weights kept.
pub fn flip(data: &LabeledDataset) -> Result<LabeledDataset> {
    data.map_points(|x| x.iter().map(|v| -v).collect())
}

/// Dispatch on `spec.kind`.
pub fn generate(spec: &GeneratorSpec) -> Result<TransferInstance> {
    match spec.kind {
        GeneratorKind::GaussianPair => gen_gaussian_pair(spec),
        GeneratorKind::MixupSwap => gen_mixup_swap(spec),
        GeneratorKind::PriorShift => gen_prior_shift(spec),
        GeneratorKind::Confounder => gen_confounder(spec),
        GeneratorKind::InvarianceFlip => gen_invariance_flip(spec),
    }
}

/// Random relabeling of the target, for chance-level probes.
pub fn shuffle_target_labels(inst: &TransferInstance, seed: u64) -> Result<TransferInstance> {
    let t = inst.evaluation_target();
    let mut r = rng::stream(seed, 0x5A1E);
    let labels: Vec<usize> = (0..t.len())
        .map(|_| r.random_range(0..t.num_classes()))
        .collect();
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.shuffle(&mut r);
    let labels = order.iter().map(|&i| labels[i]).collect();
    TransferInstance::new(
        inst.source().clone(),
        t.with_labels(labels)?,
        inst.shift_kind(),
        inst.seed(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::wasserstein1_exact;
    use crate::models::{risk01, Hypothesis};

    #[test]
    fn easy_case_layout() {
        let inst = gen_gaussian_pair(&GeneratorSpec::easy_case(0.1)).unwrap();
        assert_eq!(inst.source().points(), &[vec![0.0], vec![1.0]]);
        assert_eq!(inst.evaluation_target().points(), &[vec![0.1], vec![1.1]]);
        let w = wasserstein1_exact(&inst.source().unlabeled(), &inst.target_view()).unwrap();
        assert!((w.value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_shift_is_identical() {
        let spec = GeneratorSpec {
            shift: 0.0,
            ..GeneratorSpec::preset(GeneratorKind::GaussianPair)
        };
        let inst = gen_gaussian_pair(&spec).unwrap();
        assert_eq!(inst.source(), inst.evaluation_target());
    }

    #[test]
    fn mixup_has_zero_transport_and_forces_joint_error() {
        let inst = gen_mixup_swap(&GeneratorSpec::preset(GeneratorKind::MixupSwap)).unwrap();
        let w = wasserstein1_exact(&inst.source().unlabeled(), &inst.target_view()).unwrap();
        assert_eq!(w.value, 0.0);
        for t in [-0.5, 0.5, 1.5] {
            for h in [
                Hypothesis::threshold(t),
                Hypothesis::complement(Hypothesis::threshold(t), 2),
            ] {
                let joint = risk01(&h, inst.source()).unwrap()
                    + risk01(&h, inst.evaluation_target()).unwrap();
                assert!(joint >= 1.0);
            }
        }
    }

    #[test]
    fn prior_shift_masses_and_conditionals() {
        let spec = GeneratorSpec::preset(GeneratorKind::PriorShift);
        let inst = gen_prior_shift(&spec).unwrap();
        let want = ramp_ratios(10, 0.05, 0.20);
        for (m, r) in inst.evaluation_target().class_masses().iter().zip(&want) {
            assert!((m - r).abs() < 1e-9);
        }
        assert_eq!(inst.source().points(), inst.evaluation_target().points());
        assert_eq!(inst.source().labels(), inst.evaluation_target().labels());
    }

    #[test]
    fn ratio_errors_name_the_entry() {
        let mut spec = GeneratorSpec::preset(GeneratorKind::PriorShift);
        let mut r = vec![0.1; 10];
        r[3] = -0.1;
        spec.ratios = Some(r);
        match gen_prior_shift(&spec).unwrap_err() {
            Error::InvalidArgument { field, .. } => assert_eq!(field, "ratios[3]"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn confounder_signal_and_distractor() {
        let spec = GeneratorSpec {
            n_per_class: 200,
            ..GeneratorSpec::preset(GeneratorKind::Confounder)
        };
        let inst = gen_confounder(&spec).unwrap();
        let signal = Hypothesis::Stump {
            feature: 0,
            threshold: 0.5,
            below: 0,
            above: 1,
        };
        let distractor = Hypothesis::Stump {
            feature: 1,
            threshold: 0.1,
            below: 0,
            above: 1,
        };
        assert_eq!(risk01(&signal, inst.evaluation_target()).unwrap(), 0.0);
        assert_eq!(risk01(&distractor, inst.source()).unwrap(), 0.0);
        let t = risk01(&distractor, inst.evaluation_target()).unwrap();
        assert!((t - 0.5).abs() < 0.1, "{t}");
    }

    #[test]
    fn flip_is_an_involution() {
        let inst =
            gen_invariance_flip(&GeneratorSpec::preset(GeneratorKind::InvarianceFlip)).unwrap();
        assert_eq!(&flip(inst.evaluation_target()).unwrap(), inst.source());
    }

    #[test]
    fn generators_are_deterministic() {
        for kind in [
            GeneratorKind::GaussianPair,
            GeneratorKind::MixupSwap,
            GeneratorKind::PriorShift,
            GeneratorKind::Confounder,
            GeneratorKind::InvarianceFlip,
        ] {
            let spec = GeneratorSpec {
                seed: 9,
                ..GeneratorSpec::preset(kind)
            };
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        }
    }
}
