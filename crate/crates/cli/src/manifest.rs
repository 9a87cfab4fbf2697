//! Run manifests: enough to re-run a command bit-identically given the same
//! inputs (command, flags, seed, input and output digests).

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub args: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            tool: "linnaeus",
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            args: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn arg(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.args.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self, CliError> {
        self.inputs.insert(path.display().to_string(), digest_file(path)?);
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> Result<&mut Self, CliError> {
        self.outputs.insert(path.display().to_string(), digest_file(path)?);
        Ok(self)
    }

    /// Writes `manifest.json` into the output directory.
    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        let path = out_dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

pub fn digest_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}
