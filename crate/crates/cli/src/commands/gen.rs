use dabound::datasets::save_instance;
use dabound::transfers::{generate, GeneratorSpec};
use serde::Serialize;

use super::{generator_spec, plots};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{result, Artifacts};

#[derive(Serialize)]
struct GenResult {
    spec: GeneratorSpec,
    instance: String,
    shift_kind: &'static str,
    dim: usize,
    num_classes: usize,
    source_size: usize,
    target_size: usize,
    source_class_masses: Vec<f64>,
    target_class_masses: Vec<f64>,
}

pub fn run(cfg: &RunConfig) -> Result<Vec<String>> {
    let spec = generator_spec(cfg.block.clone(), "gen", cfg.seed, None)?;
    let inst = generate(&spec).map_err(CliError::in_block("gen"))?;
    let mut art = Artifacts::create(&cfg.out)?;
    save_instance(&inst, &art.path("instance")).map_err(CliError::in_block("gen"))?;
    for name in [
        "instance/instance.json",
        "instance/source.csv",
        "instance/target.csv",
    ] {
        art.record(name);
    }
    if cfg.emit_plots && inst.dim() <= 2 {
        art.text("scatter.svg", &plots::instance(&inst))?;
    }
    let body = GenResult {
        instance: "instance/instance.json".into(),
        shift_kind: inst.shift_kind().as_str(),
        dim: inst.dim(),
        num_classes: inst.num_classes(),
        source_size: inst.source().len(),
        target_size: inst.evaluation_target().len(),
        source_class_masses: inst.source().class_masses(),
        target_class_masses: inst.evaluation_target().class_masses(),
        spec,
    };
    println!(
        "generated {} instance: {} source / {} target points, d={}, C={}",
        body.shift_kind, body.source_size, body.target_size, body.dim, body.num_classes
    );
    art.json("result.json", &result("gen", &body)?)?;
    art.finish(cfg)
}
