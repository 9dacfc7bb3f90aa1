use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{CliError, Command};

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a Command,
    config_hash: String,
    inputs: BTreeMap<String, String>,
    files: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn checksum(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Writes `manifest.json` into `out`. It records the configuration with
/// its hash (output directory excluded) and SHA-256 checksums of every file.
pub fn write(out: &Path, command: &Command, inputs: &[&Path], files: &[&str]) -> Result<(), CliError> {
    let config = serde_json::to_string(command).expect("config serializes");
    let mut input_sums = BTreeMap::new();
    for p in inputs {
        input_sums.insert(p.display().to_string(), checksum(p)?);
    }
    let mut file_sums = BTreeMap::new();
    for f in files {
        file_sums.insert((*f).to_string(), checksum(&out.join(f))?);
    }
    let m = Manifest {
        command,
        config_hash: sha256_hex(config.as_bytes()),
        inputs: input_sums,
        files: file_sums,
    };
    let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    text.push('\n');
    let path = out.join("manifest.json");
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
