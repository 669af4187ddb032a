use dabound::bounds::{default_sweep_opt, tradeoff_sweep, SweepConfig, TradeoffCurve};
use dabound::models::{Arch, OptConfig};
use dabound::transfers::{GeneratorKind, GeneratorSpec};
use serde::Serialize;

use super::{instance, plots, Provenance};
use crate::config::{finish, patched, take_or, take_table, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{result, Artifacts};

/// Nine points spanning [0.01, 100], evenly spaced in log10.
pub fn default_grid() -> Vec<f64> {
    vec![0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0]
}

#[derive(Serialize)]
struct SweepResult {
    curve: TradeoffCurve,
    min_rhs: Option<f64>,
    inputs: Provenance,
}

pub fn run(cfg: &RunConfig) -> Result<Vec<String>> {
    let mut block = cfg.block.clone();
    let (inst, prov) = instance(
        &mut block,
        "sweep",
        cfg.seed,
        GeneratorSpec::preset(GeneratorKind::MixupSwap),
    )?;
    let k_grid: Vec<f64> = take_or(&mut block, "k_grid", "sweep", default_grid())?;
    let hidden: Vec<usize> = take_or(&mut block, "hidden", "sweep", vec![8])?;
    let opt: OptConfig = patched(
        &default_sweep_opt(),
        take_table(&mut block, "opt", "sweep")?,
        "sweep.opt",
    )?;
    let restarts: usize = take_or(&mut block, "restarts", "sweep", 3)?;
    finish(&block, "sweep")?;

    let mut widths = vec![inst.dim()];
    widths.extend(hidden);
    widths.push(1);
    let arch = Arch::new(widths).map_err(CliError::in_block("sweep.hidden"))?;
    let sweep = SweepConfig {
        k_grid,
        arch,
        opt,
        seed: cfg.seed,
        restarts,
    };
    let curve = tradeoff_sweep(&inst, &sweep, cfg.jobs).map_err(CliError::in_block("sweep"))?;
    for r in &curve.rows {
        println!(
            "K {:<8} source {:.6} lambda {:.6} w1 {:.6} rhs {:.6} target {:.6}",
            r.k, r.source_l1_risk, r.lambda_upper, r.w1, r.rhs, r.target_l1_risk
        );
    }
    for f in &curve.failures {
        eprintln!("K {}: {}", f.k, f.error);
    }

    let mut art = Artifacts::create(&cfg.out)?;
    let mut csv = Vec::new();
    curve
        .write_csv(&mut csv)
        .map_err(CliError::in_block("sweep"))?;
    art.text(
        "sweep.csv",
        &String::from_utf8(csv).expect("csv output is utf-8"),
    )?;
    if cfg.emit_plots {
        art.text("sweep.svg", &plots::sweep(&curve))?;
    }
    let body = SweepResult {
        min_rhs: curve.min_rhs(),
        curve,
        inputs: prov,
    };
    art.json("result.json", &result("sweep", &body)?)?;
    art.finish(cfg)
}
