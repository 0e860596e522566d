//! Output directory handling: the per-directory lock, file writes with
//! digests, and the run manifest.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const LOCK_FILE: &str = ".kbqa.lock";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let mut file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    kbqa_core::dataset::read_jsonl(BufReader::new(file))
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct Manifest<'a> {
    command: &'static str,
    tool_version: &'static str,
    seed: u64,
    config_hash: String,
    config: &'a RunConfig,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

/// An output directory held for the duration of one command. Files written
/// through it are listed in the manifest.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<FileDigest>,
}

impl OutputDir {
    /// Creates the directory and takes its lock.
    pub fn open(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        let lock = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(CliError::Config(format!(
                    "{} is in use by another run (remove {} if that run is gone)",
                    root.display(),
                    lock.display()
                )));
            }
            Err(e) => return Err(CliError::io(&lock, e)),
        }
        Ok(OutputDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.retain(|d| d.path != name);
        self.written.push(FileDigest { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_jsonl<'a, T: Serialize + 'a>(
        &mut self,
        name: &str,
        records: impl IntoIterator<Item = &'a T>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        kbqa_core::dataset::write_jsonl(&mut buf, records).map_err(|e| CliError::io(&self.path(name), e))?;
        self.write(name, &buf)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut buf = serde_json::to_vec_pretty(value).map_err(|e| CliError::io(&self.path(name), e))?;
        buf.push(b'\n');
        self.write(name, &buf)
    }

    /// Writes `<command>.manifest.json` listing inputs and everything
    /// written so far.
    pub fn finish(mut self, config: &RunConfig, inputs: &[&Path]) -> Result<(), CliError> {
        let config_json = serde_json::to_vec(config).map_err(|e| CliError::Config(e.to_string()))?;
        let inputs = inputs
            .iter()
            .map(|p| Ok(FileDigest { path: p.display().to_string(), sha256: file_digest(p)? }))
            .collect::<Result<Vec<_>, CliError>>()?;
        let mut outputs = std::mem::take(&mut self.written);
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            command: config.command.name(),
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            config_hash: sha256_hex(&config_json),
            config,
            inputs,
            outputs,
        };
        let name = format!("{}.manifest.json", config.command.name());
        let mut buf = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
        buf.push(b'\n');
        let path = self.path(&name);
        fs::write(&path, buf).map_err(|e| CliError::io(&path, e))
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK_FILE));
    }
}
