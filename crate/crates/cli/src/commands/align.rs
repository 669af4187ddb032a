use dabound::alignlab::{
    evaluate, label_mixing_score, train_on_instance, AlignConfig, RepClassifier,
};
use dabound::datasets::TransferInstance;
use dabound::transfers::{GeneratorKind, GeneratorSpec};
use serde::Serialize;
use toml::{Table, Value};

use super::{instance, plots, Provenance};
use crate::config::{typed, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{result, Artifacts};

#[derive(Serialize)]
struct AlignResult {
    method: &'static str,
    source_acc: f64,
    target_acc: f64,
    mixing_score: f64,
    config: AlignConfig,
    inputs: Provenance,
}

/// An [`AlignConfig`] from the remaining block keys, seeded with `seed`.
pub fn align_config(mut table: Table, prefix: &str, seed: u64) -> Result<AlignConfig> {
    if table.contains_key("seed") {
        return Err(CliError::config(
            format!("{prefix}.seed"),
            "set the run seed at top level",
        ));
    }
    table.insert("seed".into(), Value::Integer(seed as i64));
    let cfg: AlignConfig = typed(Value::Table(table), prefix)?;
    cfg.validate().map_err(CliError::in_block(prefix))?;
    Ok(cfg)
}

/// `(latent, label, domain)` for every source then target point.
pub fn latent_rows(
    model: &RepClassifier,
    inst: &TransferInstance,
) -> Vec<(Vec<f64>, usize, usize)> {
    let src = inst
        .source()
        .iter()
        .map(|(x, y, _)| (model.encode(x), y, 0));
    let tgt = inst
        .evaluation_target()
        .iter()
        .map(|(x, y, _)| (model.encode(x), y, 1));
    src.chain(tgt).collect()
}

pub fn latent_csv(rows: &[(Vec<f64>, usize, usize)]) -> String {
    let k = rows.first().map_or(0, |r| r.0.len());
    let mut out: String = (0..k).map(|i| format!("z{i},")).collect();
    out.push_str("label,domain\n");
    for (z, l, d) in rows {
        for v in z {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{l},{d}\n"));
    }
    out
}

pub fn run(cfg: &RunConfig) -> Result<Vec<String>> {
    let mut block = cfg.block.clone();
    let (inst, prov) = instance(
        &mut block,
        "align",
        cfg.seed,
        GeneratorSpec::preset(GeneratorKind::PriorShift),
    )?;
    let acfg = align_config(block, "align", cfg.seed)?;
    let (model, trace) = train_on_instance(&inst, &acfg).map_err(CliError::in_block("align"))?;
    let ev = evaluate(&model, &inst);
    let mixing = label_mixing_score(&model, &inst);
    println!(
        "{}: source acc {:.4} target acc {:.4} mixing {:.4}",
        acfg.method.as_str(),
        ev.source_acc,
        ev.target_acc,
        mixing
    );

    let mut art = Artifacts::create(&cfg.out)?;
    let mut csv = Vec::new();
    trace
        .write_csv(&mut csv)
        .map_err(CliError::in_block("align"))?;
    art.text(
        "trace.csv",
        &String::from_utf8(csv).expect("csv output is utf-8"),
    )?;
    let rows = latent_rows(&model, &inst);
    art.text("latent.csv", &latent_csv(&rows))?;
    if cfg.emit_plots {
        art.text("latent.svg", &plots::latent(acfg.method.as_str(), &rows))?;
    }
    let body = AlignResult {
        method: acfg.method.as_str(),
        source_acc: ev.source_acc,
        target_acc: ev.target_acc,
        mixing_score: mixing,
        config: acfg,
        inputs: prov,
    };
    art.json("result.json", &result("align", &body)?)?;
    art.finish(cfg)
}
