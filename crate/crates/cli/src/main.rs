mod classes;
mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::Value;

use config::{Overrides, RunConfig, SEED_ENV};
use error::Result;

#[derive(Parser)]
#[command(
    name = "dabound",
    version,
    about = "Domain-adaptation bounds, divergences and alignment experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set generator.sigma=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory [default: runs/<subcommand>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent trials.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a transfer instance.
    Gen {
        /// gaussian_pair, mixup_swap, prior_shift, confounder or invariance_flip.
        kind: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate a divergence between two marginals.
    Estimate {
        /// exact-ot, sinkhorn, exact-enum or adversarial.
        #[arg(long)]
        method: Option<String>,
        /// Source CSV.
        #[arg(long, requires = "target")]
        source: Option<PathBuf>,
        /// Target CSV.
        #[arg(long, requires = "source")]
        target: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate bounds against the true target risk.
    Bound {
        /// ben_david, zhang, mansour, wasserstein or all.
        #[arg(long)]
        kind: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep the Lipschitz constant of the Wasserstein bound.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Train a representation aligner.
    Align {
        /// so, dann, mdd or wdgrl.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        weight: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// K-nearest-neighbour transferability probe.
    Probe {
        #[command(flatten)]
        common: Common,
    },
    /// Meta-learned initialization against the baseline suite.
    Meta {
        #[command(flatten)]
        common: Common,
    },
    /// Re-emit the SVG plots of a finished run.
    Render {
        /// Run directory containing result.json.
        dir: PathBuf,
    },
}

fn string(v: String) -> Value {
    Value::String(v)
}

fn dispatch(command: Command) -> Result<()> {
    let (name, common, flags): (&'static str, Common, Vec<(String, Value)>) = match command {
        Command::Render { dir } => {
            for f in commands::render::run(&dir)? {
                println!("wrote {}", dir.join(f).display());
            }
            return Ok(());
        }
        Command::Gen { kind, common } => (
            "gen",
            common,
            kind.map(|k| ("kind".into(), string(k)))
                .into_iter()
                .collect(),
        ),
        Command::Estimate {
            method,
            source,
            target,
            common,
        } => {
            let mut f = Vec::new();
            if let Some(m) = method {
                f.push(("method".into(), string(m)));
            }
            if let (Some(s), Some(t)) = (source, target) {
                f.push(("source".into(), string(s.display().to_string())));
                f.push(("target".into(), string(t.display().to_string())));
            }
            ("estimate", common, f)
        }
        Command::Bound { kind, common } => (
            "bound",
            common,
            kind.map(|k| ("kind".into(), string(k)))
                .into_iter()
                .collect(),
        ),
        Command::Sweep { common } => ("sweep", common, Vec::new()),
        Command::Align {
            method,
            weight,
            steps,
            common,
        } => {
            let mut f = Vec::new();
            if let Some(m) = method {
                f.push(("method".into(), string(m)));
            }
            if let Some(w) = weight {
                f.push(("weight".into(), Value::Float(w)));
            }
            if let Some(s) = steps {
                f.push(("steps".into(), Value::Integer(s as i64)));
            }
            ("align", common, f)
        }
        Command::Probe { common } => ("probe", common, Vec::new()),
        Command::Meta { common } => ("meta", common, Vec::new()),
    };
    let ov = Overrides {
        sets: common.sets,
        flags,
        out: common.out,
        jobs: common.jobs,
        seed: common.seed,
        env_seed: std::env::var(SEED_ENV).ok(),
    };
    let cfg = RunConfig::load(name, common.config.as_deref(), &ov)?;
    let artifacts = commands::run(&cfg)?;
    println!(
        "wrote {} artifacts and manifest.json to {}",
        artifacts.len(),
        cfg.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
