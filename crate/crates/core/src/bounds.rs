//! Right-hand sides of the transfer bounds, compared against the true target
//! risk, and the Lipschitz-constant trade-off sweep.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::TransferInstance;
use crate::divergence::{
    hdh_divergence_adversarial, hdh_divergence_exact, lambda_exact, lambda_trained,
    mansour_discrepancy, single_hyp_discrepancy_adversarial, single_hyp_discrepancy_exact,
    wasserstein1_exact, AdversaryConfig, DivergenceEstimate, LambdaEstimate, Status, Witness,
};
use crate::error::{Error, Result};
use crate::models::train::{train_supervised, Loss, OptConfig};
use crate::models::{
    disagreement, lipschitz_bound, risk01, risk_l1, Arch, FiniteClass, Hypothesis, Mlp, OutputMode,
};

/// Tolerance on certified slack and on Lipschitz certificates.
pub const CERT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    BenDavid,
    Zhang,
    Mansour,
    Wasserstein,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::BenDavid => "ben_david",
            BoundKind::Zhang => "zhang",
            BoundKind::Mansour => "mansour",
            BoundKind::Wasserstein => "wasserstein",
        }
    }
}

impl std::str::FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "ben_david" => Ok(BoundKind::BenDavid),
            "zhang" => Ok(BoundKind::Zhang),
            "mansour" => Ok(BoundKind::Mansour),
            "wasserstein" => Ok(BoundKind::Wasserstein),
            other => Err(Error::arg("bound", format!("unknown bound kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Soundness {
    /// Every term is exact or errs on the safe side; slack must be ≥ 0.
    Certified,
    /// Some term is an estimate that may undershoot; slack is informative only.
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaTerm {
    pub value: f64,
    pub status: Status,
}

/// One evaluated bound.
///
/// For [`BoundKind::Mansour`] the fields are read in regret form:
/// `source_risk = ε_S(h, h*_S)`, `lambda = ε_S(h*_T, h*_S)` and
/// `target_risk = ε_T(h) − ε_T(h*_T)`, with `regret` set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_kind: BoundKind,
    pub hypothesis_id: String,
    pub source_risk: f64,
    pub lambda: LambdaTerm,
    pub divergence: DivergenceEstimate,
    pub lipschitz_k: Option<f64>,
    pub rhs: f64,
    pub target_risk: f64,
    pub slack: f64,
    pub soundness: Soundness,
    #[serde(default)]
    pub regret: bool,
}

impl BoundReport {
    /// The bound's formula applied to the stored terms.
    pub fn recompute_rhs(&self) -> f64 {
        let d = self.divergence.value;
        match self.bound_kind {
            BoundKind::Wasserstein => {
                self.source_risk
                    + self.lambda.value
                    + 2.0 * self.lipschitz_k.unwrap_or(f64::NAN) * d
            }
            _ => self.source_risk + self.lambda.value + d,
        }
    }

    /// False only for a certified report whose slack is negative beyond
    /// [`CERT_TOL`], i.e. a violated theorem.
    pub fn holds(&self) -> bool {
        self.soundness == Soundness::Heuristic || self.slack >= -CERT_TOL
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        kind: BoundKind,
        id: String,
        source_risk: f64,
        lambda: LambdaTerm,
        divergence: DivergenceEstimate,
        k: Option<f64>,
        target_risk: f64,
        soundness: Soundness,
    ) -> Self {
        let mut r = Self {
            bound_kind: kind,
            hypothesis_id: id,
            source_risk,
            lambda,
            divergence,
            lipschitz_k: k,
            rhs: 0.0,
            target_risk,
            slack: 0.0,
            soundness,
            regret: kind == BoundKind::Mansour,
        };
        r.rhs = r.recompute_rhs();
        r.slack = r.rhs - r.target_risk;
        r
    }
}

fn member_id(class: &FiniteClass, h: &Hypothesis) -> Result<String> {
    Ok(format!("{}[{}]", class.name(), class.index_of(h)?))
}

fn exact_lambda(class: &FiniteClass, inst: &TransferInstance) -> Result<LambdaTerm> {
    let l = lambda_exact(class, inst.source(), inst.evaluation_target())?;
    Ok(LambdaTerm {
        value: l.value,
        status: l.status,
    })
}

/// `ε_T(h) ≤ ε_S(h) + λ + δ_HΔH(S_X, T_X)` with every term exact.
pub fn assemble_ben_david(
    h: &Hypothesis,
    class: &FiniteClass,
    inst: &TransferInstance,
) -> Result<BoundReport> {
    let id = member_id(class, h)?;
    let div = hdh_divergence_exact(class, &inst.source().unlabeled(), &inst.target_view())?;
    Ok(BoundReport::build(
        BoundKind::BenDavid,
        id,
        risk01(h, inst.source())?,
        exact_lambda(class, inst)?,
        div,
        None,
        risk01(h, inst.evaluation_target())?,
        Soundness::Certified,
    ))
}

/// As [`assemble_ben_david`] with the single-hypothesis divergence `δ_{h,H}`.
pub fn assemble_zhang(
    h: &Hypothesis,
    class: &FiniteClass,
    inst: &TransferInstance,
) -> Result<BoundReport> {
    let id = member_id(class, h)?;
    let div =
        single_hyp_discrepancy_exact(h, class, &inst.source().unlabeled(), &inst.target_view())?;
    Ok(BoundReport::build(
        BoundKind::Zhang,
        id,
        risk01(h, inst.source())?,
        exact_lambda(class, inst)?,
        div,
        None,
        risk01(h, inst.evaluation_target())?,
        Soundness::Certified,
    ))
}

/// First index attaining the minimum 0-1 risk.
fn risk_minimizer(class: &FiniteClass, data: &crate::datasets::LabeledDataset) -> Result<usize> {
    let mut best = (0, f64::INFINITY);
    for (i, h) in class.members().iter().enumerate() {
        let r = risk01(h, data)?;
        if r < best.1 {
            best = (i, r);
        }
    }
    Ok(best.0)
}

/// Regret form `ε_T(h) − ε_T(h*_T) ≤ ε_S(h, h*_S) + disc + ε_S(h*_T, h*_S)`,
/// with `h*_S`, `h*_T` the exact per-domain risk minimizers in the class.
pub fn assemble_mansour(
    h: &Hypothesis,
    class: &FiniteClass,
    inst: &TransferInstance,
) -> Result<BoundReport> {
    let id = member_id(class, h)?;
    let sx = inst.source().unlabeled();
    let hs = &class.members()[risk_minimizer(class, inst.source())?];
    let ht = &class.members()[risk_minimizer(class, inst.evaluation_target())?];
    let regret = risk01(h, inst.evaluation_target())? - risk01(ht, inst.evaluation_target())?;
    let gap = LambdaTerm {
        value: disagreement(ht, hs, &sx)?,
        status: Status::Optimal,
    };
    Ok(BoundReport::build(
        BoundKind::Mansour,
        id,
        disagreement(h, hs, &sx)?,
        gap,
        mansour_discrepancy(class, &sx, &inst.target_view())?,
        None,
        regret,
        Soundness::Certified,
    ))
}

fn l1_model(h: &Hypothesis, field: &str) -> Result<Mlp> {
    match h {
        Hypothesis::Mlp { model } if model.mode() == OutputMode::L1 => Ok(model.clone()),
        _ => Err(Error::arg(field, "expected an L1-mode network")),
    }
}

/// `ε^L1_T(h) ≤ ε^L1_S(h) + λ + 2K·W1(S_X, T_X)`.
///
/// `lambda` must carry a network witness; its joint L1 risk is re-evaluated
/// exactly here. `k` defaults to the larger of the two certificates; a given
/// `k` must dominate both (within [`CERT_TOL`]).
pub fn assemble_wasserstein(
    h: &Hypothesis,
    inst: &TransferInstance,
    lambda: &LambdaEstimate,
    k: Option<f64>,
) -> Result<BoundReport> {
    if inst.num_classes() != 2 {
        return Err(Error::arg(
            "instance",
            "the Wasserstein bound needs a binary instance",
        ));
    }
    let model = l1_model(h, "h")?;
    let witness = match &lambda.witness {
        Witness::Model(w) => l1_model(w, "lambda.witness")?,
        Witness::Index(_) => {
            return Err(Error::arg("lambda.witness", "expected a network witness"))
        }
    };
    let kh = lipschitz_bound(&model).k;
    let kw = lipschitz_bound(&witness).k;
    let k = match k {
        Some(k) if kh > k + CERT_TOL || kw > k + CERT_TOL => {
            return Err(Error::arg(
                "k",
                format!("certificates {kh} (h) and {kw} (witness) exceed the claimed constant {k}"),
            ))
        }
        Some(k) => k,
        None => kh.max(kw),
    };
    let (s, t) = (inst.source(), inst.evaluation_target());
    let w = Hypothesis::from(witness);
    let lam = LambdaTerm {
        value: risk_l1(&w, s)? + risk_l1(&w, t)?,
        status: Status::UpperBound,
    };
    Ok(BoundReport::build(
        BoundKind::Wasserstein,
        "mlp".into(),
        risk_l1(h, s)?,
        lam,
        wasserstein1_exact(&s.unlabeled(), &inst.target_view())?,
        Some(k),
        risk_l1(h, t)?,
        Soundness::Certified,
    ))
}

/// Ben-David or Zhang with estimated terms: adversarial divergence (a lower
/// bound) and trained λ over hard-mode networks of `arch`. Heuristic.
pub fn assemble_estimated(
    kind: BoundKind,
    h: &Hypothesis,
    arch: &Arch,
    inst: &TransferInstance,
    adversary: &AdversaryConfig,
    lambda_opt: &OptConfig,
    seed: u64,
) -> Result<BoundReport> {
    let (sx, tx) = (inst.source().unlabeled(), inst.target_view());
    let div = match kind {
        BoundKind::BenDavid => hdh_divergence_adversarial(arch, &sx, &tx, adversary, seed)?,
        BoundKind::Zhang => single_hyp_discrepancy_adversarial(h, arch, &sx, &tx, adversary, seed)?,
        _ => {
            return Err(Error::arg(
                "bound",
                "only ben_david and zhang have an estimated form",
            ))
        }
    };
    let lam = lambda_trained(
        arch,
        OutputMode::Hard,
        inst.source(),
        inst.evaluation_target(),
        lambda_opt,
        seed,
        1,
    )?;
    Ok(BoundReport::build(
        kind,
        "estimated".into(),
        risk01(h, inst.source())?,
        LambdaTerm {
            value: lam.value,
            status: lam.status,
        },
        div,
        None,
        risk01(h, inst.evaluation_target())?,
        Soundness::Heuristic,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k_grid: Vec<f64>,
    pub arch: Arch,
    pub opt: OptConfig,
    pub seed: u64,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub k: f64,
    pub source_l1_risk: f64,
    pub lambda_upper: f64,
    pub w1: f64,
    pub rhs: f64,
    pub target_l1_risk: f64,
}

impl TradeoffRow {
    pub fn recompute_rhs(&self) -> f64 {
        self.source_l1_risk + self.lambda_upper + 2.0 * self.k * self.w1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub k: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub instance_id: String,
    pub config: SweepConfig,
    pub rows: Vec<TradeoffRow>,
    /// Grid points whose training failed; the sweep carries on without them.
    #[serde(default)]
    pub failures: Vec<RowFailure>,
}

impl TradeoffCurve {
    pub fn min_rhs(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.rhs).reduce(f64::min)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "k",
            "source_l1_risk",
            "lambda_upper",
            "w1",
            "rhs",
            "target_l1_risk",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(
                [
                    r.k,
                    r.source_l1_risk,
                    r.lambda_upper,
                    r.w1,
                    r.rhs,
                    r.target_l1_risk,
                ]
                .map(|v| v.to_string()),
            )
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Default sweep settings: L1 loss, linearly decaying step size.
pub fn default_sweep_opt() -> OptConfig {
    OptConfig::new(3000, 0.05, Loss::L1)
        .with_momentum(0.9)
        .with_schedule(crate::models::train::Schedule::Linear)
}

fn sweep_row(
    inst: &TransferInstance,
    cfg: &SweepConfig,
    w1: f64,
    index: usize,
) -> Result<TradeoffRow> {
    let k = cfg.k_grid[index];
    let seed = cfg.seed.wrapping_add(index as u64);
    let opt = cfg.opt.clone().with_lipschitz(Some(k));
    let h = Hypothesis::from(train_supervised(
        &cfg.arch,
        OutputMode::L1,
        inst.source(),
        &opt,
        seed,
    )?);
    let lam = lambda_trained(
        &cfg.arch,
        OutputMode::L1,
        inst.source(),
        inst.evaluation_target(),
        &opt,
        seed,
        cfg.restarts,
    )?;
    let report = assemble_wasserstein(&h, inst, &lam, Some(k))?;
    debug_assert_eq!(report.divergence.value, w1);
    Ok(TradeoffRow {
        k,
        source_l1_risk: report.source_risk,
        lambda_upper: report.lambda.value,
        w1,
        rhs: report.rhs,
        target_l1_risk: report.target_risk,
    })
}

/// For each `K`, trains a K-projected L1 hypothesis on the source and a
/// K-projected joint witness for λ, and evaluates the Wasserstein bound.
/// Row `i` is seeded with `seed + i`, so results do not depend on `jobs`.
pub fn tradeoff_sweep(
    inst: &TransferInstance,
    cfg: &SweepConfig,
    jobs: usize,
) -> Result<TradeoffCurve> {
    if inst.num_classes() != 2 {
        return Err(Error::arg("instance", "the sweep needs a binary instance"));
    }
    if cfg.k_grid.is_empty() {
        return Err(Error::arg("k_grid", "grid is empty"));
    }
    if let Some(i) = cfg
        .k_grid
        .iter()
        .position(|k| !(*k > 0.0) || !k.is_finite())
    {
        return Err(Error::arg(
            format!("k_grid[{i}]"),
            "K must be positive and finite",
        ));
    }
    if let Some(i) = cfg.k_grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::arg(
            format!("k_grid[{}]", i + 1),
            "grid must be strictly increasing",
        ));
    }
    if cfg.arch.output_dim() != 1 {
        return Err(Error::arg("arch", "an L1 hypothesis has a single output"));
    }
    cfg.opt.validate()?;
    let w1 = wasserstein1_exact(&inst.source().unlabeled(), &inst.target_view())?.value;
    let run = |i: usize| sweep_row(inst, cfg, w1, i);
    let results: Vec<Result<TradeoffRow>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::arg("jobs", e.to_string()))?;
        pool.install(|| (0..cfg.k_grid.len()).into_par_iter().map(run).collect())
    } else {
        (0..cfg.k_grid.len()).map(run).collect()
    };
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(row) => rows.push(row),
            Err(e @ Error::NonFinite { .. }) => failures.push(RowFailure {
                k: cfg.k_grid[i],
                error: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(TradeoffCurve {
        instance_id: format!("{}-{}", inst.shift_kind().as_str(), inst.seed()),
        config: cfg.clone(),
        rows,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{LabeledDataset, ShiftKind};

    fn threshold_setup() -> (FiniteClass, TransferInstance) {
        let class = FiniteClass::new(
            "thresholds",
            vec![
                Hypothesis::threshold(-2.0),
                Hypothesis::threshold(0.0),
                Hypothesis::threshold(2.0),
            ],
        )
        .unwrap();
        let s = LabeledDataset::uniform(vec![vec![-1.0], vec![1.0]], vec![0, 1], 2).unwrap();
        let t = LabeledDataset::uniform(vec![vec![1.0]], vec![1], 2).unwrap();
        (
            class,
            TransferInstance::new(s, t, ShiftKind::Covariate, 0).unwrap(),
        )
    }

    #[test]
    fn ben_david_equality_case() {
        let (class, inst) = threshold_setup();
        let r = assemble_ben_david(&Hypothesis::threshold(2.0), &class, &inst).unwrap();
        assert_eq!(r.source_risk, 0.5);
        assert_eq!(r.lambda.value, 0.0);
        assert_eq!(r.divergence.value, 0.5);
        assert_eq!(r.rhs, 1.0);
        assert_eq!(r.target_risk, 1.0);
        assert_eq!(r.slack, 0.0);
        assert_eq!(r.soundness, Soundness::Certified);
        assert_eq!(r.hypothesis_id, "thresholds[2]");
    }

    #[test]
    fn zhang_on_threshold_instance() {
        let (class, inst) = threshold_setup();
        let r = assemble_zhang(&Hypothesis::threshold(0.0), &class, &inst).unwrap();
        assert_eq!(r.divergence.value, 0.5);
        assert_eq!(r.rhs, 0.5);
        assert_eq!(r.target_risk, 0.0);
    }

    #[test]
    fn non_member_is_rejected() {
        let (class, inst) = threshold_setup();
        let err = assemble_ben_david(&Hypothesis::threshold(1.0), &class, &inst).unwrap_err();
        assert!(matches!(err, Error::NotInClass(_)));
    }

    #[test]
    fn mansour_two_point_boolean() {
        let domain = vec![vec![0.0], vec![1.0]];
        let class = FiniteClass::all_labelings("bool", &domain, 2).unwrap();
        let s = LabeledDataset::uniform(vec![vec![0.0]], vec![0], 2).unwrap();
        let t = LabeledDataset::uniform(vec![vec![1.0]], vec![1], 2).unwrap();
        let inst = TransferInstance::new(s, t, ShiftKind::Covariate, 0).unwrap();
        for h in class.members() {
            let r = assemble_mansour(h, &class, &inst).unwrap();
            assert!(r.regret);
            assert_eq!(r.divergence.value, 1.0);
            assert!(r.slack >= 0.0, "{r:?}");
            assert_eq!(r.rhs, r.recompute_rhs());
        }
    }

    fn easy_instance() -> TransferInstance {
        let s = LabeledDataset::uniform(vec![vec![0.0], vec![1.0]], vec![0, 1], 2).unwrap();
        let t = LabeledDataset::uniform(vec![vec![0.1], vec![1.1]], vec![0, 1], 2).unwrap();
        TransferInstance::new(s, t, ShiftKind::Covariate, 0).unwrap()
    }

    #[test]
    fn wasserstein_term_on_easy_case() {
        let inst = easy_instance();
        let arch = Arch::new(vec![1, 1]).unwrap();
        let opt = default_sweep_opt().with_lipschitz(Some(2.0));
        let h = Hypothesis::from(
            train_supervised(&arch, OutputMode::L1, inst.source(), &opt, 1).unwrap(),
        );
        let lam = lambda_trained(
            &arch,
            OutputMode::L1,
            inst.source(),
            inst.evaluation_target(),
            &opt,
            1,
            1,
        )
        .unwrap();
        let r = assemble_wasserstein(&h, &inst, &lam, Some(2.0)).unwrap();
        assert!((2.0 * r.lipschitz_k.unwrap() * r.divergence.value - 0.4).abs() < 1e-12);
        assert!(r.slack >= -CERT_TOL);
        assert!((r.rhs - r.recompute_rhs()).abs() <= 1e-12);
        let err = assemble_wasserstein(&h, &inst, &lam, Some(0.5)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument { .. }));
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let inst = easy_instance();
        let cfg = SweepConfig {
            k_grid: vec![1.0, 1.0],
            arch: Arch::new(vec![1, 1]).unwrap(),
            opt: default_sweep_opt(),
            seed: 0,
            restarts: 1,
        };
        match tradeoff_sweep(&inst, &cfg, 1).unwrap_err() {
            Error::InvalidArgument { field, .. } => assert_eq!(field, "k_grid[1]"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn single_point_grid() {
        let inst = easy_instance();
        let cfg = SweepConfig {
            k_grid: vec![1.0],
            arch: Arch::new(vec![1, 1]).unwrap(),
            opt: default_sweep_opt(),
            seed: 4,
            restarts: 3,
        };
        let curve = tradeoff_sweep(&inst, &cfg, 1).unwrap();
        assert_eq!(curve.rows.len(), 1);
        let row = &curve.rows[0];
        assert!((row.rhs - row.recompute_rhs()).abs() <= 1e-12);
        assert!(row.rhs <= 0.3, "{row:?}");
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }
}
