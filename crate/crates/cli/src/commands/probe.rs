use dabound::alignlab::{knn_probe, train_on_instance, DEFAULT_PROBE_K};
use dabound::transfers::{shuffle_target_labels, GeneratorKind, GeneratorSpec};
use serde::Serialize;

use super::align::align_config;
use super::{instance, Provenance};
use crate::config::{finish, take_or, take_table, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{result, Artifacts};

#[derive(Serialize)]
struct ProbeResult {
    k: usize,
    features: String,
    shuffled_target_labels: bool,
    score: f64,
    inputs: Provenance,
}

pub fn run(cfg: &RunConfig) -> Result<Vec<String>> {
    let mut block = cfg.block.clone();
    let mut preset = GeneratorSpec::preset(GeneratorKind::GaussianPair);
    preset.shift = 0.0;
    let (inst, prov) = instance(&mut block, "probe", cfg.seed, preset)?;
    let k: usize = take_or(&mut block, "k", "probe", DEFAULT_PROBE_K)?;
    let features: String = take_or(&mut block, "features", "probe", "identity".to_string())?;
    let shuffle: bool = take_or(&mut block, "shuffle_target_labels", "probe", false)?;
    let align = take_table(&mut block, "align", "probe")?;
    finish(&block, "probe")?;

    let err = CliError::in_block("probe");
    let inst = if shuffle {
        shuffle_target_labels(&inst, cfg.seed).map_err(&err)?
    } else {
        inst
    };
    let score = match features.as_str() {
        "identity" => knn_probe(&inst, |x| x.to_vec(), k).map_err(&err)?,
        "aligned" => {
            let acfg = align_config(align, "probe.align", cfg.seed)?;
            let (model, _) =
                train_on_instance(&inst, &acfg).map_err(CliError::in_block("probe.align"))?;
            knn_probe(&inst, |x| model.encode(x), k).map_err(&err)?
        }
        other => {
            return Err(CliError::config(
                "probe.features",
                format!("unknown feature map `{other}`; expected identity or aligned"),
            ))
        }
    };
    println!("knn probe (K={k}, {features}): {score}");
    let body = ProbeResult {
        k,
        features,
        shuffled_target_labels: shuffle,
        score,
        inputs: prov,
    };
    let mut art = Artifacts::create(&cfg.out)?;
    art.json("result.json", &result("probe", &body)?)?;
    art.finish(cfg)
}
