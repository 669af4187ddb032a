//! Run configuration: a TOML file with at most one subcommand block, plus
//! `--set key=value` overrides and the `DABOUND_SEED` environment variable.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{CliError, Result};

pub const SUBCOMMANDS: [&str; 7] = [
    "gen", "estimate", "bound", "sweep", "align", "probe", "meta",
];
const TOP_LEVEL: [&str; 4] = ["seed", "emit_plots", "out", "jobs"];
pub const SEED_ENV: &str = "DABOUND_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: &'static str,
    pub seed: u64,
    pub out: PathBuf,
    pub emit_plots: bool,
    pub jobs: usize,
    /// The subcommand's parameter block.
    pub block: Table,
}

/// Everything that feeds into a run besides the file itself.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub sets: Vec<String>,
    /// Typed flag values, keyed relative to the block.
    pub flags: Vec<(String, Value)>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    /// Value of `DABOUND_SEED`, if set.
    pub env_seed: Option<String>,
}

impl RunConfig {
    pub fn load(subcommand: &'static str, path: Option<&Path>, ov: &Overrides) -> Result<Self> {
        let root = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                text.parse::<Table>()
                    .map_err(|e| CliError::config("config", e.message().to_string()))?
            }
            None => Table::new(),
        };
        Self::from_table(subcommand, root, ov)
    }

    pub fn from_table(subcommand: &'static str, mut root: Table, ov: &Overrides) -> Result<Self> {
        let blocks: Vec<&String> = root
            .keys()
            .filter(|k| SUBCOMMANDS.contains(&k.as_str()))
            .collect();
        if blocks.len() > 1 {
            let names: Vec<&str> = blocks.iter().map(|s| s.as_str()).collect();
            return Err(CliError::config(
                "config",
                format!(
                    "exactly one subcommand block expected, found {}",
                    names.join(", ")
                ),
            ));
        }
        if let Some(other) = blocks.first().filter(|b| b.as_str() != subcommand) {
            return Err(CliError::config(
                other.as_str(),
                format!("block does not match subcommand `{subcommand}`"),
            ));
        }
        if let Some(k) = root
            .keys()
            .find(|k| !SUBCOMMANDS.contains(&k.as_str()) && !TOP_LEVEL.contains(&k.as_str()))
        {
            return Err(CliError::config(k.as_str(), "unknown top-level key"));
        }
        let mut block = match root.remove(subcommand) {
            Some(Value::Table(t)) => t,
            Some(_) => return Err(CliError::config(subcommand, "expected a table")),
            None => Table::new(),
        };

        for (key, value) in &ov.flags {
            block.insert(key.clone(), value.clone());
        }
        for raw in &ov.sets {
            let (key, text) = raw
                .split_once('=')
                .ok_or_else(|| CliError::config(raw.as_str(), "expected key=value"))?;
            let value = parse_value(text.trim());
            let mut path: Vec<&str> = key.trim().split('.').collect();
            if path.iter().any(|p| p.is_empty()) {
                return Err(CliError::config(key, "empty path segment"));
            }
            if path[0] == subcommand {
                path.remove(0);
            } else if path.len() == 1 && TOP_LEVEL.contains(&path[0]) {
                root.insert(path[0].into(), value);
                continue;
            } else if SUBCOMMANDS.contains(&path[0]) {
                return Err(CliError::config(
                    key,
                    format!("override targets a block other than `{subcommand}`"),
                ));
            }
            if path.is_empty() {
                return Err(CliError::config(key, "cannot replace the whole block"));
            }
            insert_path(&mut block, &path, value).map_err(|m| CliError::config(key, m))?;
        }
        if block.contains_key("seed") {
            return Err(CliError::config(
                format!("{subcommand}.seed"),
                "set the run seed at top level or through DABOUND_SEED",
            ));
        }

        let mut seed = match root.get("seed") {
            None => 0,
            Some(Value::Integer(s)) if *s >= 0 => *s as u64,
            Some(_) => return Err(CliError::config("seed", "expected a nonnegative integer")),
        };
        if let Some(env) = &ov.env_seed {
            seed = env.trim().parse().map_err(|_| {
                CliError::config(SEED_ENV, format!("`{env}` is not a nonnegative integer"))
            })?;
        }
        if let Some(s) = ov.seed {
            seed = s;
        }
        let emit_plots = match root.get("emit_plots") {
            None => true,
            Some(Value::Boolean(b)) => *b,
            Some(_) => return Err(CliError::config("emit_plots", "expected a boolean")),
        };
        let jobs = match (ov.jobs, root.get("jobs")) {
            (Some(j), _) => j,
            (None, None) => 1,
            (None, Some(Value::Integer(j))) if *j >= 1 => *j as usize,
            (None, Some(_)) => return Err(CliError::config("jobs", "expected a positive integer")),
        };
        if jobs == 0 {
            return Err(CliError::config("jobs", "expected a positive integer"));
        }
        let out = match (&ov.out, root.get("out")) {
            (Some(o), _) => o.clone(),
            (None, Some(Value::String(s))) => PathBuf::from(s),
            (None, None) => PathBuf::from("runs").join(subcommand),
            (None, Some(_)) => return Err(CliError::config("out", "expected a path string")),
        };
        Ok(Self {
            subcommand,
            seed,
            out,
            emit_plots,
            jobs,
            block,
        })
    }

    /// The resolved configuration as JSON; the output directory is left out
    /// so moving a run does not change its identity.
    pub fn resolved(&self) -> serde_json::Value {
        let block = serde_json::to_value(&self.block).unwrap_or(serde_json::Value::Null);
        serde_json::json!({
            "subcommand": self.subcommand,
            "seed": self.seed,
            "emit_plots": self.emit_plots,
            "jobs": self.jobs,
            self.subcommand: block,
        })
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.resolved()).expect("json values always serialize");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// TOML literal when it parses as one, otherwise a bare string.
fn parse_value(text: &str) -> Value {
    format!("v = {text}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

fn insert_path(table: &mut Table, path: &[&str], value: Value) -> std::result::Result<(), String> {
    let (last, parents) = path.split_last().expect("path is non-empty");
    let mut cur = table;
    for seg in parents {
        let entry = cur
            .entry(seg.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(format!("`{seg}` is not a table")),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Sub-table `key`, empty when absent.
pub fn take_table(block: &mut Table, key: &str, prefix: &str) -> Result<Table> {
    match block.remove(key) {
        Some(Value::Table(t)) => Ok(t),
        Some(_) => Err(CliError::config(
            format!("{prefix}.{key}"),
            "expected a table",
        )),
        None => Ok(Table::new()),
    }
}

/// Deserializes `value`, reporting failures with their full field path.
pub fn typed<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let field = if inner == "." || inner.is_empty() {
            prefix.to_string()
        } else {
            format!("{prefix}.{inner}")
        };
        CliError::config(field, e.into_inner().to_string())
    })
}

/// Typed value of an optional key, or `default`.
pub fn take_or<T: DeserializeOwned>(
    block: &mut Table,
    key: &str,
    prefix: &str,
    default: T,
) -> Result<T> {
    match block.remove(key) {
        Some(v) => typed(v, &format!("{prefix}.{key}")),
        None => Ok(default),
    }
}

/// `base` serialized, with `patch` merged over it key by key (recursively
/// for tables), then deserialized back.
pub fn patched<T: Serialize + DeserializeOwned>(base: &T, patch: Table, prefix: &str) -> Result<T> {
    let mut value = Value::try_from(base).map_err(|e| CliError::config(prefix, e.to_string()))?;
    if let Value::Table(t) = &mut value {
        merge(t, patch);
    }
    typed(value, prefix)
}

fn merge(base: &mut Table, patch: Table) {
    for (k, v) in patch {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(p)) => merge(b, p),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Fails when keys remain in a block after every known one was consumed.
pub fn finish(block: &Table, prefix: &str) -> Result<()> {
    match block.keys().next() {
        Some(k) => Err(CliError::config(format!("{prefix}.{k}"), "unknown key")),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(sub: &'static str, text: &str, sets: &[&str]) -> Result<RunConfig> {
        let ov = Overrides {
            sets: sets.iter().map(|s| s.to_string()).collect(),
            ..Overrides::default()
        };
        RunConfig::from_table(sub, text.parse().unwrap(), &ov)
    }

    #[test]
    fn defaults() {
        let c = load("gen", "", &[]).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.jobs, 1);
        assert!(c.emit_plots);
        assert_eq!(c.out, PathBuf::from("runs/gen"));
        assert!(c.block.is_empty());
    }

    #[test]
    fn overrides_land_in_the_block() {
        let c = load(
            "gen",
            "seed = 3\n[gen]\nkind = \"prior_shift\"\n",
            &["gen.ratios=[0.1, 0.9]", "sigma=0.2", "seed=9"],
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.block["kind"].as_str(), Some("prior_shift"));
        assert_eq!(c.block["sigma"].as_float(), Some(0.2));
        assert_eq!(c.block["ratios"].as_array().unwrap().len(), 2);
        let nested = load("align", "", &["generator.kind=mixup_swap"]).unwrap();
        assert_eq!(
            nested.block["generator"]["kind"].as_str(),
            Some("mixup_swap")
        );
    }

    #[test]
    fn seed_precedence() {
        let root: Table = "seed = 2".parse().unwrap();
        let env = Overrides {
            env_seed: Some("11".into()),
            ..Overrides::default()
        };
        assert_eq!(
            RunConfig::from_table("meta", root.clone(), &env)
                .unwrap()
                .seed,
            11
        );
        let flag = Overrides {
            seed: Some(4),
            ..env
        };
        assert_eq!(RunConfig::from_table("meta", root, &flag).unwrap().seed, 4);
        let bad = Overrides {
            env_seed: Some("x".into()),
            ..Overrides::default()
        };
        assert!(RunConfig::from_table("meta", Table::new(), &bad).is_err());
    }

    #[test]
    fn block_rules() {
        assert!(load("gen", "[gen]\n[sweep]\n", &[]).is_err());
        assert!(load("gen", "[sweep]\n", &[]).is_err());
        assert!(load("gen", "colour = 1\n", &[]).is_err());
        assert!(load("gen", "", &["sweep.k_grid=[1]"]).is_err());
        assert!(load("gen", "[gen]\nseed = 1\n", &[]).is_err());
    }

    #[test]
    fn hash_ignores_out_and_tracks_values() {
        let a = load("gen", "out = \"a\"", &[]).unwrap();
        let b = load("gen", "out = \"b\"", &[]).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = load("gen", "", &["sigma=1"]).unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn typed_errors_carry_paths() {
        #[derive(serde::Deserialize, Debug)]
        #[allow(dead_code)]
        struct S {
            xs: Vec<f64>,
        }
        let v: Value = "xs = [1.0, \"a\"]".parse::<Table>().unwrap().into();
        match typed::<S>(v, "gen") {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "gen.xs[1]"),
            other => panic!("{other:?}"),
        }
    }
}
