use dabound::bounds::{
    assemble_ben_david, assemble_mansour, assemble_wasserstein, assemble_zhang, default_sweep_opt,
    BoundKind, BoundReport,
};
use dabound::datasets::TransferInstance;
use dabound::divergence::lambda_trained;
use dabound::models::{
    risk01, train_supervised, Arch, FiniteClass, Hypothesis, OptConfig, OutputMode,
};
use dabound::transfers::{GeneratorKind, GeneratorSpec};
use serde::{Deserialize, Serialize};

use super::{instance, Provenance};
use crate::classes;
use crate::config::{finish, patched, take_or, take_table, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{result, Artifacts};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Pick {
    /// `erm` (first source-risk minimizer) or `all`.
    Named(String),
    Indices(Vec<usize>),
}

#[derive(Serialize)]
struct BoundResult {
    class: Option<String>,
    class_size: Option<usize>,
    reports: Vec<BoundReport>,
    all_hold: bool,
    inputs: Provenance,
}

fn picks(class: &FiniteClass, pick: &Pick, inst: &TransferInstance) -> Result<Vec<usize>> {
    let err = CliError::in_block("bound");
    match pick {
        Pick::Named(n) if n == "all" => Ok((0..class.len()).collect()),
        Pick::Named(n) if n == "erm" => {
            let mut best = (0, f64::INFINITY);
            for (i, h) in class.members().iter().enumerate() {
                let r = risk01(h, inst.source()).map_err(&err)?;
                if r < best.1 {
                    best = (i, r);
                }
            }
            Ok(vec![best.0])
        }
        Pick::Named(n) => Err(CliError::config(
            "bound.hypotheses",
            format!("expected erm, all or a list, found `{n}`"),
        )),
        Pick::Indices(ix) => match ix.iter().position(|&i| i >= class.len()) {
            Some(p) => Err(CliError::config(
                format!("bound.hypotheses[{p}]"),
                format!("index {} outside a class of {}", ix[p], class.len()),
            )),
            None => Ok(ix.clone()),
        },
    }
}

fn wasserstein(
    inst: &TransferInstance,
    hidden: &[usize],
    opt: &OptConfig,
    k: Option<f64>,
    restarts: usize,
    seed: u64,
) -> Result<BoundReport> {
    let err = CliError::in_block("bound");
    let mut widths = vec![inst.dim()];
    widths.extend_from_slice(hidden);
    widths.push(1);
    let arch = Arch::new(widths).map_err(CliError::in_block("bound.hidden"))?;
    let h = Hypothesis::from(
        train_supervised(&arch, OutputMode::L1, inst.source(), opt, seed).map_err(&err)?,
    );
    let lam = lambda_trained(
        &arch,
        OutputMode::L1,
        inst.source(),
        inst.evaluation_target(),
        opt,
        seed,
        restarts,
    )
    .map_err(&err)?;
    assemble_wasserstein(&h, inst, &lam, k).map_err(&err)
}

pub fn run(cfg: &RunConfig) -> Result<Vec<String>> {
    let mut block = cfg.block.clone();
    let kind: String = take_or(&mut block, "kind", "bound", "all".to_string())?;
    let kinds: Vec<BoundKind> = if kind == "all" {
        vec![
            BoundKind::BenDavid,
            BoundKind::Zhang,
            BoundKind::Mansour,
            BoundKind::Wasserstein,
        ]
    } else {
        vec![kind.parse().map_err(CliError::in_block("bound"))?]
    };
    let mut preset = GeneratorSpec::preset(GeneratorKind::GaussianPair);
    preset.n_per_class = 10;
    let (inst, prov) = instance(&mut block, "bound", cfg.seed, preset)?;
    let class_name: String = take_or(&mut block, "class", "bound", "stumps".to_string())?;
    let pick: Pick = take_or(&mut block, "hypotheses", "bound", Pick::Named("erm".into()))?;
    let hidden: Vec<usize> = take_or(&mut block, "hidden", "bound", Vec::new())?;
    let opt: OptConfig = patched(
        &default_sweep_opt(),
        take_table(&mut block, "opt", "bound")?,
        "bound.opt",
    )?;
    let k: Option<f64> = take_or(&mut block, "k", "bound", None)?;
    let restarts: usize = take_or(&mut block, "restarts", "bound", 1)?;
    finish(&block, "bound")?;

    let err = CliError::in_block("bound");
    let finite: Vec<BoundKind> = kinds
        .iter()
        .copied()
        .filter(|k| *k != BoundKind::Wasserstein)
        .collect();
    let mut reports = Vec::new();
    let mut class_size = None;
    if !finite.is_empty() {
        let pooled: Vec<&[f64]> = inst
            .source()
            .points()
            .iter()
            .chain(inst.evaluation_target().points())
            .map(|p| p.as_slice())
            .collect();
        let class = classes::build(&class_name, &pooled, inst.num_classes()).map_err(&err)?;
        class_size = Some(class.len());
        for i in picks(&class, &pick, &inst)? {
            let h = &class.members()[i];
            for kind in &finite {
                let r = match kind {
                    BoundKind::BenDavid => assemble_ben_david(h, &class, &inst),
                    BoundKind::Zhang => assemble_zhang(h, &class, &inst),
                    BoundKind::Mansour => assemble_mansour(h, &class, &inst),
                    BoundKind::Wasserstein => unreachable!(),
                };
                reports.push(r.map_err(&err)?);
            }
        }
    }
    if kinds.contains(&BoundKind::Wasserstein) {
        if inst.num_classes() == 2 {
            reports.push(wasserstein(&inst, &hidden, &opt, k, restarts, cfg.seed)?);
        } else if kinds.len() == 1 {
            return Err(CliError::config(
                "bound.kind",
                "the Wasserstein bound needs a binary instance",
            ));
        }
    }
    for r in &reports {
        println!(
            "{:<12} {:<16} rhs {:.6} target {:.6} slack {:.6} {}",
            r.bound_kind.as_str(),
            r.hypothesis_id,
            r.rhs,
            r.target_risk,
            r.slack,
            if r.holds() { "holds" } else { "VIOLATED" }
        );
    }
    let body = BoundResult {
        class: class_size.map(|_| class_name),
        class_size,
        all_hold: reports.iter().all(BoundReport::holds),
        reports,
        inputs: prov,
    };
    let mut art = Artifacts::create(&cfg.out)?;
    art.json("result.json", &result("bound", &body)?)?;
    art.finish(cfg)
}
