use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
struct InputRecord {
    role: String,
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Versions {
    #[serde(rename = "sideband-cli")]
    cli: &'static str,
    #[serde(rename = "sideband-core")]
    core: &'static str,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    scenario: &'a str,
    seed: u64,
    inputs: &'a [InputRecord],
    parameters: &'a serde_json::Value,
    outputs: &'a [String],
    versions: Versions,
}

/// `<root>/<scenario>/<command>/`, plus the manifest describing its contents.
pub struct OutputDir {
    dir: PathBuf,
    command: String,
    scenario: String,
    seed: u64,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
    parameters: serde_json::Value,
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl OutputDir {
    pub fn create(root: &Path, scenario: &str, command: &str, seed: u64) -> CliResult<Self> {
        let dir = root.join(scenario).join(command);
        fs::create_dir_all(&dir).map_err(|e| CliError::unwritable(dir.clone(), e))?;
        Ok(OutputDir {
            dir,
            command: command.to_string(),
            scenario: scenario.to_string(),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            parameters: serde_json::Value::Null,
        })
    }

    pub fn record_input(&mut self, role: &str, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputRecord { role: role.to_string(), path: path.display().to_string(), sha256: digest(bytes) });
    }

    /// Resolved run parameters, stored in the manifest.
    pub fn set_parameters(&mut self, value: impl Serialize) -> CliResult<()> {
        self.parameters = serde_json::to_value(value).map_err(|e| CliError::Numeric(e.to_string()))?;
        Ok(())
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let p = self.dir.join(name);
        fs::write(&p, bytes).map_err(|e| CliError::unwritable(p.clone(), e))?;
        self.outputs.push(name.to_string());
        Ok(p)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes `manifest.json`; call once after every artifact is written.
    pub fn finish(self) -> CliResult<PathBuf> {
        let manifest = Manifest {
            command: &self.command,
            scenario: &self.scenario,
            seed: self.seed,
            inputs: &self.inputs,
            parameters: &self.parameters,
            outputs: &self.outputs,
            versions: Versions { cli: env!("CARGO_PKG_VERSION"), core: sideband_core::VERSION },
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Numeric(e.to_string()))?;
        text.push('\n');
        let p = self.dir.join("manifest.json");
        fs::write(&p, text).map_err(|e| CliError::unwritable(p.clone(), e))?;
        Ok(self.dir)
    }
}
