use dabound::metalearn::{default_family_spec, run_baselines, BaselineTable, MetaConfig};
use dabound::transfers::{generate, GeneratorSpec};
use serde::Serialize;
use toml::Value;

use super::generator_spec;
use crate::config::{take_table, typed, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{result, Artifacts};

#[derive(Serialize)]
struct MetaResult {
    table: BaselineTable,
    config: MetaConfig,
    family: GeneratorSpec,
}

pub fn run(cfg: &RunConfig) -> Result<Vec<String>> {
    let mut block = cfg.block.clone();
    let gen = take_table(&mut block, "generator", "meta")?;
    let spec = generator_spec(
        gen,
        "meta.generator",
        cfg.seed,
        Some(default_family_spec(cfg.seed)),
    )?;
    let family = generate(&spec).map_err(CliError::in_block("meta.generator"))?;
    block.insert("seed".into(), Value::Integer(cfg.seed as i64));
    let mcfg: MetaConfig = typed(Value::Table(block), "meta")?;
    let table = run_baselines(&family, &mcfg).map_err(CliError::in_block("meta"))?;

    let mut summary = String::from("baseline,mean,sd\n");
    let mut tasks = String::from("baseline,task,classes,accuracy\n");
    for r in &table.results {
        println!("{:<14} {:.3} ± {:.3}", r.name, r.mean, r.sd);
        summary.push_str(&format!("{},{},{}\n", r.name, r.mean, r.sd));
        for (i, (a, classes)) in r.accuracies.iter().zip(&table.tasks).enumerate() {
            let ids: Vec<String> = classes.iter().map(usize::to_string).collect();
            tasks.push_str(&format!("{},{i},{},{a}\n", r.name, ids.join(" ")));
        }
    }
    let mut art = Artifacts::create(&cfg.out)?;
    art.text("table.csv", &summary)?;
    art.text("tasks.csv", &tasks)?;
    let body = MetaResult {
        table,
        config: mcfg,
        family: spec,
    };
    art.json("result.json", &result("meta", &body)?)?;
    art.finish(cfg)
}
