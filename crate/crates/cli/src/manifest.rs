//! Per-command run manifests: config hash, seed and output digests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

/// Collects outputs written by one command.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| CliError::io(&p, e))?;
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(p)
    }

    /// Writes `<command>.manifest` and returns its path.
    pub fn finish(self, command: &str, cfg: &RunConfig, inputs: &[(String, String)]) -> Result<PathBuf, CliError> {
        let text = render(command, cfg, inputs, &self.files);
        let p = self.dir.join(format!("{command}.manifest"));
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn render(command: &str, cfg: &RunConfig, inputs: &[(String, String)], outputs: &[(String, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command = {command}");
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "config_sha256 = {}", cfg.sha256());
    let _ = writeln!(s, "\n[config]");
    s.push_str(&cfg.render());
    if !inputs.is_empty() {
        let _ = writeln!(s, "\n[inputs]");
        for (name, digest) in inputs {
            let _ = writeln!(s, "{digest}  {name}");
        }
    }
    let _ = writeln!(s, "\n[outputs]");
    for (name, digest) in outputs {
        let _ = writeln!(s, "{digest}  {name}");
    }
    s
}
