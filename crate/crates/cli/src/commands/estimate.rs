use std::path::PathBuf;

use dabound::datasets::{load_dataset, UnlabeledView};
use dabound::divergence::{
    hdh_divergence_adversarial, hdh_divergence_exact, mansour_discrepancy,
    single_hyp_discrepancy_exact, wasserstein1_exact, wasserstein1_sinkhorn, AdversaryConfig,
    DivergenceEstimate, SinkhornConfig,
};
use dabound::models::Arch;
use dabound::transfers::{GeneratorKind, GeneratorSpec};
use serde::Serialize;

use super::{instance, Provenance};
use crate::classes;
use crate::config::{finish, patched, take_or, take_table, typed, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{result, Artifacts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum EstMethod {
    ExactOt,
    Sinkhorn,
    ExactEnum,
    Adversarial,
}

impl EstMethod {
    fn parse(s: &str) -> Option<Self> {
        Some(match s.replace('-', "_").as_str() {
            "exact_ot" => EstMethod::ExactOt,
            "sinkhorn" => EstMethod::Sinkhorn,
            "exact_enum" => EstMethod::ExactEnum,
            "adversarial" => EstMethod::Adversarial,
            _ => return None,
        })
    }
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum Inputs {
    Csv {
        source: PathBuf,
        target: PathBuf,
    },
    #[serde(untagged)]
    Transfer(Provenance),
}

#[derive(Serialize)]
struct EstimateResult {
    method: EstMethod,
    /// `hdh`, `single` or `discrepancy` for finite classes, else the
    /// divergence itself.
    quantity: String,
    class: Option<String>,
    value: f64,
    status: &'static str,
    estimate: DivergenceEstimate,
    inputs: Inputs,
}

fn views(
    block: &mut toml::Table,
    seed: u64,
) -> Result<(UnlabeledView, UnlabeledView, Inputs, usize)> {
    match (block.remove("source"), block.remove("target")) {
        (Some(s), Some(t)) => {
            let source: PathBuf = typed(s, "estimate.source")?;
            let target: PathBuf = typed(t, "estimate.target")?;
            let a = load_dataset(&source).map_err(CliError::in_block("estimate.source"))?;
            let b = load_dataset(&target).map_err(CliError::in_block("estimate.target"))?;
            let c = a.num_classes().max(b.num_classes());
            Ok((
                a.unlabeled(),
                b.unlabeled(),
                Inputs::Csv { source, target },
                c,
            ))
        }
        (None, None) => {
            let (inst, prov) = instance(
                block,
                "estimate",
                seed,
                GeneratorSpec::preset(GeneratorKind::GaussianPair),
            )?;
            let c = inst.num_classes();
            Ok((
                inst.source().unlabeled(),
                inst.target_view(),
                Inputs::Transfer(prov),
                c,
            ))
        }
        _ => Err(CliError::config(
            "estimate",
            "`source` and `target` must be given together",
        )),
    }
}

pub fn run(cfg: &RunConfig) -> Result<Vec<String>> {
    let mut block = cfg.block.clone();
    let raw: String = match block.remove("method") {
        Some(v) => typed(v, "estimate.method")?,
        None => {
            return Err(CliError::config(
                "estimate.method",
                "missing; one of exact_ot, sinkhorn, exact_enum, adversarial",
            ))
        }
    };
    let method = EstMethod::parse(&raw)
        .ok_or_else(|| CliError::config("estimate.method", format!("unknown method `{raw}`")))?;
    let (sx, tx, inputs, num_classes) = views(&mut block, cfg.seed)?;
    let err = CliError::in_block("estimate");
    let mut quantity = method_quantity(method).to_string();
    let mut class_name = None;
    let estimate = match method {
        EstMethod::ExactOt => wasserstein1_exact(&sx, &tx).map_err(&err)?,
        EstMethod::Sinkhorn => {
            let sink: SinkhornConfig = patched(
                &SinkhornConfig::default(),
                take_table(&mut block, "sinkhorn", "estimate")?,
                "estimate.sinkhorn",
            )?;
            wasserstein1_sinkhorn(&sx, &tx, &sink).map_err(&err)?
        }
        EstMethod::ExactEnum => {
            let name: String = take_or(&mut block, "class", "estimate", "stumps".to_string())?;
            quantity = take_or(&mut block, "quantity", "estimate", "hdh".to_string())?;
            let pooled: Vec<&[f64]> = sx
                .points()
                .iter()
                .chain(tx.points())
                .map(|p| p.as_slice())
                .collect();
            let class = classes::build(&name, &pooled, num_classes.max(2)).map_err(&err)?;
            class_name = Some(name);
            match quantity.as_str() {
                "hdh" => hdh_divergence_exact(&class, &sx, &tx).map_err(&err)?,
                "discrepancy" => mansour_discrepancy(&class, &sx, &tx).map_err(&err)?,
                "single" => {
                    let idx: usize = take_or(&mut block, "hypothesis", "estimate", 0)?;
                    let h = class.members().get(idx).ok_or_else(|| {
                        CliError::config(
                            "estimate.hypothesis",
                            format!("index {idx} outside a class of {}", class.len()),
                        )
                    })?;
                    single_hyp_discrepancy_exact(h, &class, &sx, &tx).map_err(&err)?
                }
                other => {
                    return Err(CliError::config(
                        "estimate.quantity",
                        format!("unknown quantity `{other}`; expected hdh, single or discrepancy"),
                    ))
                }
            }
        }
        EstMethod::Adversarial => {
            let hidden: Vec<usize> = take_or(&mut block, "hidden", "estimate", vec![8])?;
            let outputs: usize = take_or(&mut block, "outputs", "estimate", 2)?;
            let adv: AdversaryConfig = patched(
                &AdversaryConfig::default(),
                take_table(&mut block, "adversary", "estimate")?,
                "estimate.adversary",
            )?;
            let mut widths = vec![sx.dim()];
            widths.extend(hidden);
            widths.push(outputs);
            let arch = Arch::new(widths).map_err(CliError::in_block("estimate.hidden"))?;
            quantity = "hdh".into();
            hdh_divergence_adversarial(&arch, &sx, &tx, &adv, cfg.seed).map_err(&err)?
        }
    };
    finish(&block, "estimate")?;

    println!(
        "{} {} {}",
        estimate.value,
        estimate.method.as_str(),
        estimate.status.as_str()
    );
    let body = EstimateResult {
        method,
        quantity,
        class: class_name,
        value: estimate.value,
        status: estimate.status.as_str(),
        estimate,
        inputs,
    };
    let mut art = Artifacts::create(&cfg.out)?;
    art.json("result.json", &result("estimate", &body)?)?;
    art.finish(cfg)
}

fn method_quantity(m: EstMethod) -> &'static str {
    match m {
        EstMethod::ExactOt | EstMethod::Sinkhorn => "w1",
        EstMethod::ExactEnum | EstMethod::Adversarial => "hdh",
    }
}
