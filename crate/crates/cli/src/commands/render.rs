//! Re-emits the SVGs of a finished run from its artifacts.

use std::fs;
use std::path::Path;

use dabound::bounds::TradeoffCurve;
use dabound::datasets::load_instance;

use super::plots;
use crate::error::{CliError, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| CliError::io(path, e))
}

fn parse_latent(text: &str) -> Result<Vec<(Vec<f64>, usize, usize)>> {
    let bad = |row: usize| CliError::config(format!("latent.csv:{row}"), "malformed row");
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() < 2 {
                return Err(bad(i + 1));
            }
            let (z, tail) = cells.split_at(cells.len() - 2);
            let z = z
                .iter()
                .map(|c| c.parse::<f64>().map_err(|_| bad(i + 1)))
                .collect::<Result<_>>()?;
            let label = tail[0].parse().map_err(|_| bad(i + 1))?;
            let domain = tail[1].parse().map_err(|_| bad(i + 1))?;
            Ok((z, label, domain))
        })
        .collect()
}

/// Rewrites the plots of the run in `dir`; returns the files written.
pub fn run(dir: &Path) -> Result<Vec<String>> {
    let text = read(&dir.join("result.json"))?;
    let result: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::config("result.json", e.to_string()))?;
    let kind = result["subcommand"].as_str().unwrap_or("");
    let written = match kind {
        "sweep" => {
            let curve: TradeoffCurve = serde_json::from_value(result["curve"].clone())
                .map_err(|e| CliError::config("result.json.curve", e.to_string()))?;
            write(&dir.join("sweep.svg"), &plots::sweep(&curve))?;
            "sweep.svg"
        }
        "align" => {
            let rows = parse_latent(&read(&dir.join("latent.csv"))?)?;
            let method = result["method"].as_str().unwrap_or("align");
            write(&dir.join("latent.svg"), &plots::latent(method, &rows))?;
            "latent.svg"
        }
        "gen" => {
            let inst =
                load_instance(&dir.join("instance/instance.json")).map_err(CliError::Core)?;
            if inst.dim() > 2 {
                return Err(CliError::config("render", "scatter plots need d <= 2"));
            }
            write(&dir.join("scatter.svg"), &plots::instance(&inst))?;
            "scatter.svg"
        }
        other => {
            return Err(CliError::config(
                "result.json.subcommand",
                format!("`{other}` results have no plots"),
            ))
        }
    };
    Ok(vec![written.to_string()])
}
