//! Effective run configuration: command-line flags over config file over
//! defaults, plus the provenance block derived from it.
//!
//! A config file is a JSON object. Shared settings sit at the top level and
//! command settings in a section named after the command:
//!
//! ```json
//! { "seed": 7, "gen": { "n": 2, "traj": 10 } }
//! ```

use std::path::{Path, PathBuf};

use foctl::error::{FoctlError, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::args::{Format, GlobalArgs, MethodArg, SolverArg};

pub const COMMANDS: [&str; 6] = ["gen", "simulate", "control", "identify", "complexity", "baseline"];

/// Settings shared by every command that affect results.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Common {
    pub seed: u64,
    pub format: Format,
    pub method: MethodArg,
    pub solver: SolverArg,
    pub tol: f64,
}

impl Default for Common {
    fn default() -> Self {
        Common {
            seed: 0,
            format: Format::Json,
            method: MethodArg::Ls,
            solver: SolverArg::Dense,
            tol: 1e-10,
        }
    }
}

/// Settings that do not change results and stay out of the hash.
#[derive(Debug, Clone)]
pub struct Runtime {
    pub out: PathBuf,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Resolved<T> {
    pub command: &'static str,
    pub common: Common,
    pub args: T,
    pub runtime: Runtime,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub config: Value,
}

fn to_object<T: Serialize>(value: &T) -> Map<String, Value> {
    match serde_json::to_value(value) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

fn read_config(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(FoctlError::config("<config>", "top level must be a JSON object")),
        Err(e) => Err(FoctlError::config("<config>", e.to_string())),
    }
}

fn deserialize_at<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let field = match (prefix, path.as_str()) {
            (p, ".") => p.to_string(),
            ("", q) => q.to_string(),
            (p, q) => format!("{p}.{}", q.trim_start_matches('.')),
        };
        FoctlError::config(field, e.into_inner().to_string())
    })
}

fn take_u64(map: &mut Map<String, Value>, key: &str) -> Result<Option<u64>> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(Some)
            .ok_or_else(|| FoctlError::config(key, "expected a non-negative integer")),
    }
}

/// Merges flags, config file and defaults for `command`.
pub fn resolve<A: Serialize, T: DeserializeOwned>(command: &'static str, global: &GlobalArgs, cli_args: &A) -> Result<Resolved<T>> {
    let mut file = match &global.config {
        Some(p) => read_config(p)?,
        None => Map::new(),
    };
    let section = match file.remove(command) {
        None => Map::new(),
        Some(Value::Object(m)) => m,
        Some(_) => return Err(FoctlError::config(command, "command section must be a JSON object")),
    };
    for name in COMMANDS {
        file.remove(name);
    }
    let file_out = match file.remove("out") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => return Err(FoctlError::config("out", "expected a path string")),
    };
    let file_workers = take_u64(&mut file, "workers")?;

    let mut common = file;
    common.extend(to_object(global));
    let common: Common = deserialize_at(Value::Object(common), "")?;
    if !(common.tol > 0.0 && common.tol.is_finite()) {
        return Err(FoctlError::config("tol", "must be positive"));
    }

    let mut args = section;
    args.extend(to_object(cli_args));
    let args: T = deserialize_at(Value::Object(args), command)?;

    let workers = global.workers.or(file_workers.map(|w| w as usize));
    if workers == Some(0) {
        return Err(FoctlError::config("workers", "must be positive"));
    }
    Ok(Resolved {
        command,
        common,
        args,
        runtime: Runtime {
            out: global.out.clone().or(file_out).unwrap_or_else(|| PathBuf::from("foctl-out")),
            workers,
        },
    })
}

impl<T: Serialize> Resolved<T> {
    pub fn provenance(&self) -> Provenance {
        let mut config = Map::new();
        config.insert("common".into(), serde_json::to_value(&self.common).unwrap_or(Value::Null));
        config.insert("args".into(), serde_json::to_value(&self.args).unwrap_or(Value::Null));
        let config = Value::Object(config);
        // serde_json maps are ordered by key, so this text is canonical
        let canonical = format!("{}\n{}", self.command, config);
        Provenance {
            command: self.command.to_string(),
            config_hash: hex::encode(Sha256::digest(canonical.as_bytes())),
            seed: self.common.seed,
            version: foctl::VERSION.to_string(),
            config,
        }
    }
}
