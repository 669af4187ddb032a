//! Meta-learned initialization for a fixed domain shift, and the baselines
//! it is compared against.
//!
//! A task is a W-way problem on a subset of classes: train on its source
//! side, evaluate on its target side. The meta-learner looks for an
//! initialization `Φ` such that a few source SGD steps from `Φ` already
//! predict well on the target. Meta-gradients are first order: the target
//! loss gradient is taken at the adapted `Φ_t` and applied to `Φ`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::alignlab::{
    accuracy as rep_accuracy, train_aligned_from, AlignConfig, AlignMethod, RepClassifier,
};
use crate::datasets::{LabeledDataset, TransferInstance};
use crate::error::{Error, Result};
use crate::models::train::{weighted_loss_and_grad, Loss, Sgd};
use crate::models::{Arch, Mlp, OutputMode, ParamVector};
use crate::rng;
use crate::transfers::{GeneratorKind, GeneratorSpec, Layout};

#[derive(Debug, Clone, PartialEq)]
pub struct MetaTask {
    /// Original class ids, sorted; position is the task label.
    pub class_subset: Vec<usize>,
    pub train: LabeledDataset,
    /// Target side; labels are for evaluation and the meta-objective only.
    pub test: LabeledDataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaConfig {
    pub ways: usize,
    pub hidden: Vec<usize>,
    /// Source SGD steps in the inner loop.
    pub inner_steps: usize,
    pub inner_lr: f64,
    pub outer_lr: f64,
    /// Heavy-ball momentum on the meta-updates.
    pub outer_momentum: f64,
    pub meta_iterations: usize,
    /// Tasks averaged per meta-update.
    pub meta_batch: usize,
    pub meta_train_classes: Vec<usize>,
    pub meta_test_classes: Vec<usize>,
    pub eval_tasks: usize,
    /// Source fine-tuning steps for the non-meta baselines.
    pub finetune_steps: usize,
    pub pretrain_steps: usize,
    pub pretrain_lr: f64,
    pub dann_weight: f64,
    pub dann_steps: usize,
    pub seed: u64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            ways: 3,
            hidden: vec![32, 32],
            inner_steps: 10,
            inner_lr: 0.1,
            outer_lr: 0.1,
            outer_momentum: 0.9,
            meta_iterations: 3000,
            meta_batch: 4,
            meta_train_classes: (0..8).collect(),
            meta_test_classes: (8..12).collect(),
            eval_tasks: 10,
            finetune_steps: 10,
            pretrain_steps: 300,
            pretrain_lr: 0.1,
            dann_weight: 1.0,
            dann_steps: 300,
            seed: 0,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.ways < 2 {
            return Err(Error::arg("ways", "need at least 2 ways"));
        }
        for (field, pool) in [
            ("meta_train_classes", &self.meta_train_classes),
            ("meta_test_classes", &self.meta_test_classes),
        ] {
            if pool.len() < self.ways {
                return Err(Error::arg(
                    field,
                    format!(
                        "{} classes cannot make a {}-way task",
                        pool.len(),
                        self.ways
                    ),
                ));
            }
            if let Some(c) = pool.iter().find(|&&c| c >= num_classes) {
                return Err(Error::arg(field, format!("class {c} does not exist")));
            }
        }
        if let Some(c) = self
            .meta_train_classes
            .iter()
            .find(|c| self.meta_test_classes.contains(c))
        {
            return Err(Error::arg(
                "meta_test_classes",
                format!("class {c} is also a meta-train class"),
            ));
        }
        if self.eval_tasks < 2 {
            return Err(Error::arg("eval_tasks", "need at least 2 evaluation tasks"));
        }
        if !(0.0..1.0).contains(&self.outer_momentum) {
            return Err(Error::arg("outer_momentum", "must lie in [0, 1)"));
        }
        if self.meta_batch == 0 {
            return Err(Error::arg("meta_batch", "must be at least 1"));
        }
        for (field, v) in [
            ("inner_lr", self.inner_lr),
            ("outer_lr", self.outer_lr),
            ("pretrain_lr", self.pretrain_lr),
            ("dann_weight", self.dann_weight),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::arg(field, "must be finite and nonnegative"));
            }
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::arg(
                "hidden",
                "need at least one positive hidden width",
            ));
        }
        Ok(())
    }

    pub fn arch(&self, dim: usize, outputs: usize) -> Arch {
        let mut w = vec![dim];
        w.extend_from_slice(&self.hidden);
        w.push(outputs);
        Arch::new(w).expect("validated widths")
    }
}

/// The default task family: 12 Gaussian classes in 8 dimensions, target
/// sign-flipped.
pub fn default_family_spec(seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        dim: 8,
        num_classes: 12,
        n_per_class: 20,
        sigma: 0.5,
        separation: 3.0,
        layout: Layout::Random,
        seed,
        ..GeneratorSpec::preset(GeneratorKind::InvarianceFlip)
    }
}

/// Uniform `ways`-subset of `pool`, relabeled by sorted class id.
pub fn sample_task(
    family: &TransferInstance,
    pool: &[usize],
    ways: usize,
    seed: u64,
) -> Result<MetaTask> {
    if pool.len() < ways {
        return Err(Error::arg(
            "pool",
            format!("{} classes cannot make a {ways}-way task", pool.len()),
        ));
    }
    let mut ids = pool.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < ways {
        return Err(Error::arg("pool", "pool has repeated classes"));
    }
    ids.shuffle(&mut rng::stream(seed, 0x7A5C));
    let mut subset: Vec<usize> = ids[..ways].to_vec();
    subset.sort_unstable();
    let take = |data: &LabeledDataset| {
        data.select_classes(
            |l| subset.contains(&l),
            |l| subset.iter().position(|&c| c == l).unwrap(),
            ways,
        )
    };
    Ok(MetaTask {
        train: take(family.source())?,
        test: take(family.evaluation_target())?,
        class_subset: subset,
    })
}

fn ce_grad(params: &ParamVector, data: &LabeledDataset, step: usize) -> Result<(f64, ParamVector)> {
    weighted_loss_and_grad(
        params,
        data.points(),
        data.labels(),
        data.weights(),
        Loss::CrossEntropy,
    )
    .map_err(|_| Error::NonFinite {
        context: "meta inner loop".into(),
        step,
    })
}

/// `t` full-batch SGD steps of source cross-entropy from `phi`.
pub fn inner_loop(
    phi: &ParamVector,
    task: &MetaTask,
    t: usize,
    step_size: f64,
) -> Result<ParamVector> {
    let mut p = phi.clone();
    for step in 0..t {
        let (_, g) = ce_grad(&p, &task.train, step)?;
        p.axpy(-step_size, &g);
    }
    Ok(p)
}

/// First-order meta-gradient: target-side loss gradient at the adapted
/// parameters.
pub fn meta_gradient(
    phi: &ParamVector,
    task: &MetaTask,
    t: usize,
    step_size: f64,
) -> Result<ParamVector> {
    let adapted = inner_loop(phi, task, t, step_size)?;
    Ok(ce_grad(&adapted, &task.test, t)?.1)
}

/// Weighted accuracy of a hard-mode parameter vector.
pub fn accuracy(params: &ParamVector, data: &LabeledDataset) -> f64 {
    let m = Mlp::new(params.clone(), OutputMode::Hard).expect("hard mode accepts any arch");
    data.iter()
        .filter(|(x, y, _)| m.predict(x) == *y)
        .map(|(_, _, w)| w)
        .fold(0.0, |a, b| a + b)
}

fn init_phi(family: &TransferInstance, cfg: &MetaConfig) -> ParamVector {
    ParamVector::init(
        cfg.arch(family.dim(), cfg.ways),
        OutputMode::Hard,
        rng::derive(cfg.seed, 0x3E7A),
    )
}

/// First-order MAML over tasks drawn from the meta-train classes.
pub fn meta_train(family: &TransferInstance, cfg: &MetaConfig) -> Result<ParamVector> {
    cfg.validate(family.num_classes())?;
    let mut phi = init_phi(family, cfg);
    let mut opt = Sgd::new(phi.len(), cfg.outer_momentum);
    for it in 0..cfg.meta_iterations {
        let mut total = ParamVector::zeros(phi.arch().clone());
        for b in 0..cfg.meta_batch {
            let seed = rng::derive(cfg.seed, (it * cfg.meta_batch + b) as u64);
            let task = sample_task(family, &cfg.meta_train_classes, cfg.ways, seed)?;
            let g = meta_gradient(&phi, &task, cfg.inner_steps, cfg.inner_lr).map_err(|_| {
                Error::NonFinite {
                    context: "meta-training".into(),
                    step: it,
                }
            })?;
            total.axpy(1.0 / cfg.meta_batch as f64, &g);
        }
        opt.step(&mut phi, &total, cfg.outer_lr);
        if !phi.is_finite() {
            return Err(Error::NonFinite {
                context: "meta-training".into(),
                step: it,
            });
        }
    }
    Ok(phi)
}

/// The shared evaluation tasks, drawn from `pool` with seeds independent of
/// the meta-training stream.
pub fn evaluation_tasks(
    family: &TransferInstance,
    pool: &[usize],
    cfg: &MetaConfig,
) -> Result<Vec<MetaTask>> {
    (0..cfg.eval_tasks)
        .map(|i| {
            sample_task(
                family,
                pool,
                cfg.ways,
                rng::derive(cfg.seed ^ 0xE7A1_5EED, i as u64),
            )
        })
        .collect()
}

/// Target accuracy after adapting `phi` on each task's source side.
pub fn adapted_accuracies(
    phi: &ParamVector,
    tasks: &[MetaTask],
    t: usize,
    step_size: f64,
) -> Result<Vec<f64>> {
    tasks
        .iter()
        .map(|task| Ok(accuracy(&inner_loop(phi, task, t, step_size)?, &task.test)))
        .collect()
}

/// Multi-class pre-training on the meta-train classes of both domains.
pub fn pretrain(family: &TransferInstance, cfg: &MetaConfig) -> Result<ParamVector> {
    let pool = &cfg.meta_train_classes;
    let relabel = |l: usize| pool.iter().position(|&c| c == l).unwrap();
    let s = family
        .source()
        .select_classes(|l| pool.contains(&l), relabel, pool.len())?;
    let t =
        family
            .evaluation_target()
            .select_classes(|l| pool.contains(&l), relabel, pool.len())?;
    let mut points = s.points().to_vec();
    points.extend(t.points().iter().cloned());
    let mut labels = s.labels().to_vec();
    labels.extend(t.labels());
    let weights = s
        .weights()
        .iter()
        .chain(t.weights())
        .map(|w| 0.5 * w)
        .collect();
    let joint = LabeledDataset::new(points, labels, weights, pool.len())?;
    let mut p = ParamVector::init(
        cfg.arch(family.dim(), pool.len()),
        OutputMode::Hard,
        rng::derive(cfg.seed, 0x9E7),
    );
    for step in 0..cfg.pretrain_steps {
        let (_, g) = ce_grad(&p, &joint, step)?;
        p.axpy(-cfg.pretrain_lr, &g);
    }
    Ok(p)
}

/// Pre-trained body with a fresh `ways`-output last layer.
pub fn swap_head(body: &ParamVector, ways: usize, seed: u64) -> ParamVector {
    let src = body.arch();
    let mut widths = src.0.clone();
    *widths.last_mut().unwrap() = ways;
    let arch = Arch::new(widths).expect("valid widths");
    let fresh = ParamVector::init(arch.clone(), OutputMode::Hard, seed);
    let last = arch.num_layers() - 1;
    let cut = arch.layer_offset(last);
    let mut values = body.values()[..cut].to_vec();
    values.extend_from_slice(&fresh.values()[cut..]);
    ParamVector::new(arch, values).expect("length matches")
}

/// Splits `[d, h.., z, W]` into an encoder `[d, h.., z]` and a linear head `[z, W]`.
fn as_rep(params: &ParamVector) -> Result<RepClassifier> {
    let arch = params.arch();
    let last = arch.num_layers() - 1;
    let cut = arch.layer_offset(last);
    let widths = &arch.0;
    let latent = widths[widths.len() - 2];
    let psi = ParamVector::new(
        Arch::new(widths[..widths.len() - 1].to_vec())?,
        params.values()[..cut].to_vec(),
    )?;
    let head = ParamVector::new(
        Arch::new(vec![latent, *widths.last().unwrap()])?,
        params.values()[cut..].to_vec(),
    )?;
    Ok(RepClassifier {
        psi: Mlp::new(psi, OutputMode::Hard)?,
        head: Mlp::new(head, OutputMode::Hard)?,
        latent_dim: latent,
    })
}

fn dann_accuracy(init: &ParamVector, task: &MetaTask, cfg: &MetaConfig, seed: u64) -> Result<f64> {
    let align = AlignConfig {
        method: AlignMethod::Dann,
        weight: cfg.dann_weight,
        steps: cfg.dann_steps,
        seed,
        ..AlignConfig::default()
    };
    let (m, _) = train_aligned_from(
        Some(as_rep(init)?),
        &task.train,
        &task.test.unlabeled(),
        &align,
    )?;
    Ok(rep_accuracy(&m, &task.test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// Per-task target accuracies, in task order.
    pub accuracies: Vec<f64>,
}

impl BaselineResult {
    fn new(name: &str, accuracies: Vec<f64>) -> Self {
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            name: name.into(),
            mean,
            sd: var.sqrt(),
            accuracies,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTable {
    pub family: String,
    /// Class subsets of the evaluation tasks.
    pub tasks: Vec<Vec<usize>>,
    /// random_so, pretrain_so, dann, pretrain_dann, maml2dom.
    pub results: Vec<BaselineResult>,
    pub meta_gradient_order: String,
}

impl BaselineTable {
    pub fn get(&self, name: &str) -> Option<&BaselineResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

pub const BASELINES: [&str; 5] = [
    "random_so",
    "pretrain_so",
    "dann",
    "pretrain_dann",
    "maml2dom",
];

/// Evaluates every baseline on the same held-out tasks.
pub fn run_baselines(family: &TransferInstance, cfg: &MetaConfig) -> Result<BaselineTable> {
    cfg.validate(family.num_classes())?;
    let tasks = evaluation_tasks(family, &cfg.meta_test_classes, cfg)?;
    for task in &tasks {
        if task
            .class_subset
            .iter()
            .any(|c| cfg.meta_train_classes.contains(c))
        {
            return Err(Error::arg(
                "meta_test_classes",
                "evaluation task uses a meta-train class",
            ));
        }
    }
    let body = pretrain(family, cfg)?;
    let phi = meta_train(family, cfg)?;
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); BASELINES.len()];
    for (i, task) in tasks.iter().enumerate() {
        let seed = rng::derive(cfg.seed, 0xBA5E + i as u64);
        let random = ParamVector::init(cfg.arch(family.dim(), cfg.ways), OutputMode::Hard, seed);
        let swapped = swap_head(&body, cfg.ways, seed);
        let ft = |p: &ParamVector| -> Result<f64> {
            Ok(accuracy(
                &inner_loop(p, task, cfg.finetune_steps, cfg.inner_lr)?,
                &task.test,
            ))
        };
        cols[0].push(ft(&random)?);
        cols[1].push(ft(&swapped)?);
        cols[2].push(dann_accuracy(&random, task, cfg, seed)?);
        cols[3].push(dann_accuracy(&swapped, task, cfg, seed)?);
        cols[4].push(accuracy(
            &inner_loop(&phi, task, cfg.inner_steps, cfg.inner_lr)?,
            &task.test,
        ));
    }
    Ok(BaselineTable {
        family: format!("invariance_flip-{}", family.seed()),
        tasks: tasks.iter().map(|t| t.class_subset.clone()).collect(),
        results: BASELINES
            .iter()
            .zip(cols)
            .map(|(n, a)| BaselineResult::new(n, a))
            .collect(),
        meta_gradient_order: "first".into(),
    })
}
