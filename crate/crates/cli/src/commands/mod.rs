pub mod align;
pub mod bound;
pub mod estimate;
pub mod gen;
pub mod meta;
pub mod probe;
pub mod render;
pub mod sweep;

use std::path::PathBuf;

use dabound::datasets::{load_instance, TransferInstance};
use dabound::transfers::{generate, GeneratorKind, GeneratorSpec};
use serde::Serialize;
use toml::{Table, Value};

use crate::config::{typed, RunConfig};
use crate::error::{CliError, Result};

pub fn run(cfg: &RunConfig) -> Result<Vec<String>> {
    match cfg.subcommand {
        "gen" => gen::run(cfg),
        "estimate" => estimate::run(cfg),
        "bound" => bound::run(cfg),
        "sweep" => sweep::run(cfg),
        "align" => align::run(cfg),
        "probe" => probe::run(cfg),
        "meta" => meta::run(cfg),
        other => unreachable!("unknown subcommand {other}"),
    }
}

/// Where a run's transfer instance came from.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Instance(PathBuf),
    Generator(GeneratorSpec),
}

/// A generator spec from `table` laid over `base` (or over the preset of the
/// table's `kind`). The run seed always wins.
pub fn generator_spec(
    mut table: Table,
    prefix: &str,
    seed: u64,
    base: Option<GeneratorSpec>,
) -> Result<GeneratorSpec> {
    if table.contains_key("seed") {
        return Err(CliError::config(
            format!("{prefix}.seed"),
            "set the run seed at top level or through DABOUND_SEED",
        ));
    }
    let kind = match table.remove("kind") {
        Some(Value::String(s)) => Some(
            s.parse::<GeneratorKind>()
                .map_err(|e| CliError::in_block(prefix)(e))?,
        ),
        Some(_) => {
            return Err(CliError::config(
                format!("{prefix}.kind"),
                "expected a string",
            ))
        }
        None => None,
    };
    let base = match (kind, base) {
        (Some(k), Some(b)) if b.kind == k => b,
        (Some(k), _) => GeneratorSpec::preset(k),
        (None, Some(b)) => b,
        (None, None) => {
            return Err(CliError::config(
                format!("{prefix}.kind"),
                "missing generator kind",
            ))
        }
    };
    let mut spec: GeneratorSpec = crate::config::patched(&base, table, prefix)?;
    spec.seed = seed;
    spec.validate().map_err(CliError::in_block(prefix))?;
    Ok(spec)
}

/// Consumes `instance` or `generator` from the block.
pub fn instance(
    block: &mut Table,
    sub: &str,
    seed: u64,
    default: GeneratorSpec,
) -> Result<(TransferInstance, Provenance)> {
    match (block.remove("instance"), block.remove("generator")) {
        (Some(_), Some(_)) => Err(CliError::config(
            sub,
            "give either `instance` or `generator`, not both",
        )),
        (Some(path), None) => {
            let path: PathBuf = typed(path, &format!("{sub}.instance"))?;
            let inst = load_instance(&path).map_err(CliError::in_block(sub))?;
            Ok((inst, Provenance::Instance(path)))
        }
        (None, gen) => {
            let table = match gen {
                Some(Value::Table(t)) => t,
                Some(_) => {
                    return Err(CliError::config(
                        format!("{sub}.generator"),
                        "expected a table",
                    ))
                }
                None => Table::new(),
            };
            let prefix = format!("{sub}.generator");
            let spec = generator_spec(table, &prefix, seed, Some(default))?;
            let inst = generate(&spec).map_err(CliError::in_block(&prefix))?;
            Ok((inst, Provenance::Generator(spec)))
        }
    }
}

pub mod plots {
    use dabound::bounds::TradeoffCurve;
    use dabound::datasets::TransferInstance;

    use crate::svg::{line_chart, scatter, ScatterPoint, Series};

    pub fn sweep(curve: &TradeoffCurve) -> String {
        let series = |name: &str, f: fn(&dabound::bounds::TradeoffRow) -> f64| Series {
            name: name.into(),
            points: curve.rows.iter().map(|r| (r.k, f(r))).collect(),
        };
        line_chart(
            &format!("Wasserstein bound trade-off ({})", curve.instance_id),
            "K (log scale)",
            "value",
            &[
                series("rhs", |r| r.rhs),
                series("source L1 risk", |r| r.source_l1_risk),
                series("lambda (upper)", |r| r.lambda_upper),
            ],
            true,
        )
    }

    fn point(x: &[f64], label: usize, domain: usize) -> ScatterPoint {
        ScatterPoint {
            x: x.first().copied().unwrap_or(0.0),
            y: x.get(1).copied().unwrap_or(0.0),
            label,
            domain,
        }
    }

    pub fn instance(inst: &TransferInstance) -> String {
        let mut pts: Vec<ScatterPoint> = inst
            .source()
            .iter()
            .map(|(x, y, _)| point(x, y, 0))
            .collect();
        pts.extend(
            inst.evaluation_target()
                .iter()
                .map(|(x, y, _)| point(x, y, 1)),
        );
        scatter(&format!("{} instance", inst.shift_kind().as_str()), &pts)
    }

    /// `rows` are `(latent, label, domain)`.
    pub fn latent(method: &str, rows: &[(Vec<f64>, usize, usize)]) -> String {
        let pts: Vec<ScatterPoint> = rows.iter().map(|(z, l, d)| point(z, *l, *d)).collect();
        scatter(&format!("{method} latent space"), &pts)
    }
}
