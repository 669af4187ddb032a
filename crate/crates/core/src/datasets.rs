//! Weighted finite-support labeled distributions and transfer instances.
//!
//! A [`LabeledDataset`] is simultaneously a sample set and an exact
//! distribution: expectations are weighted sums over its support. Target labels
//! of a [`TransferInstance`] are reachable only through
//! [`TransferInstance::evaluation_target`]; training code receives an
//! [`UnlabeledView`].

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Finite weighted sample set in R^d with labels in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    weights: Vec<f64>,
    dim: usize,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(
        points: Vec<Vec<f64>>,
        labels: Vec<usize>,
        weights: Vec<f64>,
        num_classes: usize,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDataset(
                "dataset must contain at least one point".into(),
            ));
        }
        if points.len() != labels.len() || points.len() != weights.len() {
            return Err(Error::InvalidDataset(format!(
                "length mismatch: {} points, {} labels, {} weights",
                points.len(),
                labels.len(),
                weights.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidDataset(
                "points must have dimension ≥ 1".into(),
            ));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidDataset(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
        }
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::InvalidDataset(format!(
                "label {l} at index {i} is not below num_classes {num_classes}"
            )));
        }
        check_weights(&weights)?;
        Ok(Self {
            points,
            labels,
            weights,
            dim,
            num_classes,
        })
    }

    /// Dataset with uniform weights `1/n`.
    pub fn uniform(points: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let n = points.len().max(1);
        let weights = vec![1.0 / n as f64; points.len()];
        Self::new(points, labels, weights, num_classes)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// Iterates `(point, label, weight)`.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize, f64)> + '_ {
        self.points
            .iter()
            .zip(&self.labels)
            .zip(&self.weights)
            .map(|((p, &l), &w)| (p.as_slice(), l, w))
    }

    /// Probability mass carried by each class.
    pub fn class_masses(&self) -> Vec<f64> {
        let mut masses = vec![0.0; self.num_classes];
        for (&l, &w) in self.labels.iter().zip(&self.weights) {
            masses[l] += w;
        }
        masses
    }

    /// Marginal over X with labels stripped.
    pub fn unlabeled(&self) -> UnlabeledView {
        UnlabeledView {
            points: self.points.clone(),
            weights: self.weights.clone(),
            dim: self.dim,
        }
    }

    /// Same support and weights with a replacement label vector.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        Self::new(
            self.points.clone(),
            labels,
            self.weights.clone(),
            self.num_classes,
        )
    }

    /// Same support and labels with a replacement weight vector.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(
            self.points.clone(),
            self.labels.clone(),
            weights,
            self.num_classes,
        )
    }

    /// Applies `f` to every point.
    pub fn map_points(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let points = self.points.iter().map(|p| f(p)).collect();
        Self::new(
            points,
            self.labels.clone(),
            self.weights.clone(),
            self.num_classes,
        )
    }

    /// Keeps the points whose label passes `keep`, relabels them with `relabel`
    /// and renormalizes the mass.
    pub fn select_classes(
        &self,
        keep: impl Fn(usize) -> bool,
        relabel: impl Fn(usize) -> usize,
        num_classes: usize,
    ) -> Result<Self> {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        let mut weights = Vec::new();
        for (p, l, w) in self.iter() {
            if keep(l) {
                points.push(p.to_vec());
                labels.push(relabel(l));
                weights.push(w);
            }
        }
        let weights = normalized(&weights)
            .ok_or_else(|| Error::InvalidDataset("selected classes carry no mass".into()))?;
        Self::new(points, labels, weights, num_classes)
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if let Some((i, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(**w >= 0.0) || !w.is_finite())
    {
        return Err(Error::InvalidDataset(format!(
            "weight {w} at index {i} is negative or non-finite"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidDataset(format!(
            "weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Divides by the total; `None` if the total is not positive.
pub fn normalized(weights: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    Some(weights.iter().map(|w| w / total).collect())
}

/// The X-marginal of a dataset: points and weights, no labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlabeledView {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    dim: usize,
}

impl UnlabeledView {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidDataset(format!(
                "view needs matching nonempty points/weights, got {}/{}",
                points.len(),
                weights.len()
            )));
        }
        let dim = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        check_weights(&weights)?;
        Ok(Self {
            points,
            weights,
            dim,
        })
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len().max(1);
        let weights = vec![1.0 / n as f64; points.len()];
        Self::new(points, weights)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| (p.as_slice(), w))
    }
}

/// The family of relationship between source and target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    Covariate,
    PriorShift,
    Mixup,
    Confounder,
    Invariance,
}

impl ShiftKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ShiftKind::Covariate => "covariate",
            ShiftKind::PriorShift => "prior_shift",
            ShiftKind::Mixup => "mixup",
            ShiftKind::Confounder => "confounder",
            ShiftKind::Invariance => "invariance",
        }
    }
}

impl std::str::FromStr for ShiftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "covariate" => ShiftKind::Covariate,
            "prior_shift" => ShiftKind::PriorShift,
            "mixup" => ShiftKind::Mixup,
            "confounder" => ShiftKind::Confounder,
            "invariance" => ShiftKind::Invariance,
            other => {
                return Err(Error::arg(
                    "shift_kind",
                    format!("unknown shift kind `{other}`"),
                ))
            }
        })
    }
}

/// A labeled source and a target whose labels are for evaluation only.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferInstance {
    source: LabeledDataset,
    target: LabeledDataset,
    shift_kind: ShiftKind,
    seed: u64,
}

impl TransferInstance {
    pub fn new(
        source: LabeledDataset,
        target: LabeledDataset,
        shift_kind: ShiftKind,
        seed: u64,
    ) -> Result<Self> {
        if source.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: source.dim(),
                found: target.dim(),
            });
        }
        if source.num_classes() != target.num_classes() {
            return Err(Error::InvalidDataset(format!(
                "source has {} classes, target has {}",
                source.num_classes(),
                target.num_classes()
            )));
        }
        Ok(Self {
            source,
            target,
            shift_kind,
            seed,
        })
    }

    pub fn source(&self) -> &LabeledDataset {
        &self.source
    }

    /// Target marginal: the only target access available to training code.
    pub fn target_view(&self) -> UnlabeledView {
        self.target.unlabeled()
    }

    /// Labeled target, for risk evaluation and oracle diagnostics only.
    pub fn evaluation_target(&self) -> &LabeledDataset {
        &self.target
    }

    pub fn shift_kind(&self) -> ShiftKind {
        self.shift_kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.source.num_classes()
    }
}

/// On-disk description of a transfer instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceManifest {
    pub source: PathBuf,
    pub target: PathBuf,
    pub shift_kind: ShiftKind,
    pub seed: u64,
}

/// Writes `source.csv`, `target.csv` and `instance.json` into `dir`.
pub fn save_instance(instance: &TransferInstance, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    save_dataset(instance.source(), &dir.join("source.csv"))?;
    save_dataset(instance.evaluation_target(), &dir.join("target.csv"))?;
    let manifest = InstanceManifest {
        source: "source.csv".into(),
        target: "target.csv".into(),
        shift_kind: instance.shift_kind(),
        seed: instance.seed(),
    };
    let path = dir.join("instance.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}

/// Loads an instance manifest; relative CSV paths resolve against the
/// manifest's directory.
pub fn load_instance(manifest_path: &Path) -> Result<TransferInstance> {
    let text = fs::read_to_string(manifest_path)?;
    let manifest: InstanceManifest = serde_json::from_str(&text)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let source = load_dataset(&base.join(&manifest.source))?;
    let target = load_dataset(&base.join(&manifest.target))?;
    // Align class counts when one side happens not to contain the top class.
    let c = source.num_classes().max(target.num_classes());
    let source = LabeledDataset::new(source.points, source.labels, source.weights, c)?;
    let target = LabeledDataset::new(target.points, target.labels, target.weights, c)?;
    TransferInstance::new(source, target, manifest.shift_kind, manifest.seed)
}

/// Reads a dataset CSV; the class count is `max label + 1`.
pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    load_dataset_with_classes(path, None)
}

/// Reads a dataset CSV with header `x0,...,x{d-1},label[,weight]`.
///
/// With `num_classes = Some(c)` every label must be below `c`. A missing weight
/// column means uniform weights. Row numbers in errors are 1-based file lines.
pub fn load_dataset_with_classes(
    path: &Path,
    num_classes: Option<usize>,
) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_to_io)?;
    let header = reader.headers().map_err(csv_to_io)?.clone();
    let (dim, has_weight) = parse_header(&header)?;
    let width = dim + 1 + usize::from(has_weight);

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Row {
            row,
            message: e.to_string(),
        })?;
        if record.len() != width {
            let found = record.len().saturating_sub(1 + usize::from(has_weight));
            return Err(Error::Row {
                row,
                message: format!("expected {dim} features, found {found}"),
            });
        }
        let mut point = Vec::with_capacity(dim);
        for (k, field) in record.iter().take(dim).enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Row {
                row,
                message: format!("feature x{k} `{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Row {
                    row,
                    message: format!("feature x{k} is not finite"),
                });
            }
            point.push(v);
        }
        let label_field = &record[dim];
        let label: usize = label_field.parse().map_err(|_| Error::Row {
            row,
            message: format!("label `{label_field}` is not a nonnegative integer"),
        })?;
        if let Some(c) = num_classes {
            if label >= c {
                return Err(Error::Row {
                    row,
                    message: format!("label {label} is not below the class count {c}"),
                });
            }
        }
        if has_weight {
            let field = &record[dim + 1];
            let w: f64 = field.parse().map_err(|_| Error::Row {
                row,
                message: format!("weight `{field}` is not a number"),
            })?;
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Row {
                    row,
                    message: format!("weight {w} is negative or non-finite"),
                });
            }
            weights.push(w);
        }
        points.push(point);
        labels.push(label);
    }
    if points.is_empty() {
        return Err(Error::InvalidDataset(format!(
            "{} has no data rows",
            path.display()
        )));
    }
    let c = num_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    if has_weight {
        LabeledDataset::new(points, labels, weights, c)
    } else {
        LabeledDataset::uniform(points, labels, c)
    }
}

fn parse_header(header: &csv::StringRecord) -> Result<(usize, bool)> {
    let names: Vec<&str> = header.iter().collect();
    let bad = |message: String| Error::Row { row: 1, message };
    let has_weight = names.last() == Some(&"weight");
    let label_pos = names.len().checked_sub(1 + usize::from(has_weight));
    let dim = match label_pos {
        Some(pos) if names[pos] == "label" => pos,
        _ => return Err(bad("header must end with `label` or `label,weight`".into())),
    };
    if dim == 0 {
        return Err(bad("header declares no feature columns".into()));
    }
    for (k, name) in names.iter().take(dim).enumerate() {
        if *name != format!("x{k}") {
            return Err(bad(format!(
                "feature column {k} must be named `x{k}`, found `{name}`"
            )));
        }
    }
    Ok((dim, has_weight))
}

fn csv_to_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Row {
            row: 1,
            message: format!("{other:?}"),
        },
    }
}

/// Writes a dataset CSV, always including the weight column.
///
/// Floats use Rust's shortest round-trip formatting, so loading the file back
/// reproduces every value bit for bit.
pub fn save_dataset(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for k in 0..dataset.dim() {
        out.push_str(&format!("x{k},"));
    }
    out.push_str("label,weight\n");
    for (p, l, w) in dataset.iter() {
        for v in p {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{l},{w}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reweights class mass to `class_ratios`, leaving every point and the
/// within-class weight profile untouched.
///
/// Ratios are renormalized to sum to one before use.
pub fn resample_prior(dataset: &LabeledDataset, class_ratios: &[f64]) -> Result<LabeledDataset> {
    let c = dataset.num_classes();
    if class_ratios.len() != c {
        return Err(Error::arg(
            "class_ratios",
            format!("expected {c} ratios, found {}", class_ratios.len()),
        ));
    }
    if class_ratios.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(Error::arg(
            "class_ratios",
            "ratios must be finite and nonnegative",
        ));
    }
    let total: f64 = class_ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::arg(
            "class_ratios",
            format!("ratios sum to {total}, expected 1"),
        ));
    }
    let ratios: Vec<f64> = class_ratios.iter().map(|r| r / total).collect();
    let masses = dataset.class_masses();
    for (k, (&r, &m)) in ratios.iter().zip(&masses).enumerate() {
        if r > 0.0 && m <= 0.0 {
            return Err(Error::arg(
                "class_ratios",
                format!("requested mass {r} on class {k}, which has no support"),
            ));
        }
    }
    let weights: Vec<f64> = dataset
        .iter()
        .map(|(_, l, w)| {
            if ratios[l] == 0.0 {
                0.0
            } else {
                w * ratios[l] / masses[l]
            }
        })
        .collect();
    dataset.with_weights(weights)
}

/// Seeded partition into two disjoint, renormalized halves.
///
/// The first side receives `round(fraction · n)` points; each side keeps the
/// original point order.
pub fn split(
    dataset: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::arg(
            "fraction",
            format!("{fraction} is not in (0, 1)"),
        ));
    }
    let n = dataset.len();
    let first = (fraction * n as f64).round() as usize;
    if first == 0 || first == n {
        return Err(Error::arg(
            "fraction",
            format!("fraction {fraction} of {n} points leaves one side empty"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, 0x5917));
    let mut left: Vec<usize> = order[..first].to_vec();
    let mut right: Vec<usize> = order[first..].to_vec();
    left.sort_unstable();
    right.sort_unstable();
    Ok((subset(dataset, &left)?, subset(dataset, &right)?))
}

/// Renormalized restriction to the given indices.
pub fn subset(dataset: &LabeledDataset, indices: &[usize]) -> Result<LabeledDataset> {
    let points = indices.iter().map(|&i| dataset.points[i].clone()).collect();
    let labels = indices.iter().map(|&i| dataset.labels[i]).collect();
    let raw: Vec<f64> = indices.iter().map(|&i| dataset.weights[i]).collect();
    let weights =
        normalized(&raw).ok_or_else(|| Error::arg("fraction", "a split side carries no mass"))?;
    LabeledDataset::new(points, labels, weights, dataset.num_classes())
}
