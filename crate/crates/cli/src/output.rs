use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const SCHEMA: u32 = 1;

/// Writes artifacts under the run directory and remembers their names.
pub struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            names: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Records a file some other writer already produced.
    pub fn record(&mut self, name: impl Into<String>) {
        self.names.push(name.into());
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        self.record(name);
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.text(name, &to_json(value)?)
    }

    /// Writes `manifest.json`; the manifest is not listed in itself.
    pub fn finish(mut self, cfg: &RunConfig) -> Result<Vec<String>> {
        self.names.sort();
        self.names.dedup();
        let manifest = serde_json::json!({
            "schema": SCHEMA,
            "subcommand": cfg.subcommand,
            "seed": cfg.seed,
            "config_hash": cfg.hash(),
            "config": cfg.resolved(),
            "artifacts": self.names,
        });
        let path = self.path("manifest.json");
        fs::write(&path, to_json(&manifest)?).map_err(|e| CliError::io(&path, e))?;
        Ok(self.names)
    }
}

/// Pretty JSON with a trailing newline. Floats use the shortest decimal that
/// round-trips.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Core(e.into()))
}

/// A `result.json` body: `body`'s fields plus the schema tag and subcommand.
pub fn result<T: Serialize>(subcommand: &str, body: &T) -> Result<serde_json::Value> {
    let mut map = serde_json::Map::new();
    map.insert("schema".into(), SCHEMA.into());
    map.insert("subcommand".into(), subcommand.into());
    match serde_json::to_value(body).map_err(|e| CliError::Core(e.into()))? {
        serde_json::Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("value".into(), other);
        }
    }
    Ok(serde_json::Value::Object(map))
}
