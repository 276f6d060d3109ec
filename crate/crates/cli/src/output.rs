//! Report assembly: run manifests, fixed-precision JSON and file output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Significant digits kept for every float in a JSON report.
pub const JSON_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved configuration, defaults filled in.
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub threads: usize,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

/// Collects what a manifest needs while a command runs.
pub struct Run {
    command: String,
    seed: u64,
    started: Instant,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(command: &str, seed: u64) -> Self {
        Self { command: command.into(), seed, started: Instant::now(), inputs: Vec::new(), outputs: Vec::new() }
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{}: not UTF-8", path.display())))
    }

    /// Writes an output file and a `<file>.manifest.json` next to it.
    pub fn write(&mut self, path: &Path, contents: &str) -> Result<(), CliError> {
        std::fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn manifest(&self, config: Value) -> RunManifest {
        RunManifest {
            command: self.command.clone(),
            config,
            inputs: self.inputs.clone(),
            seed: self.seed,
            threads: rayon::current_num_threads(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs.clone(),
        }
    }

    /// Emits `{manifest, result}` to `report` (or stdout) and writes a
    /// manifest sidecar for every output file.
    pub fn finish(mut self, config: Value, result: Value, report: Option<&Path>) -> Result<(), CliError> {
        if let Some(path) = report {
            self.outputs.push(path.display().to_string());
        }
        let manifest = self.manifest(config);
        let manifest_json = serde_json::to_value(&manifest).expect("manifest serializes");
        for out in &manifest.outputs {
            if report.is_some_and(|r| Path::new(out) == r) {
                continue;
            }
            let sidecar = sidecar_path(Path::new(out));
            let text = serde_json::to_string_pretty(&manifest_json).expect("json");
            std::fs::write(&sidecar, text + "\n").map_err(|e| CliError::Input(format!("{}: {e}", sidecar.display())))?;
        }
        let doc = serde_json::json!({ "manifest": manifest_json, "result": round_floats(result) });
        let text = serde_json::to_string_pretty(&doc).expect("json") + "\n";
        match report {
            Some(path) => std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `v` rounded to [`JSON_DIGITS`] significant digits.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", JSON_DIGITS - 1, v).parse().expect("formatted float parses")
}

/// Rounds every non-integer number in a JSON tree.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64"));
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}
