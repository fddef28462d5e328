//! Run manifests: everything needed to reproduce a command's outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nash_core::Result;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    /// Resolved configuration as `key=value` lines.
    pub config: String,
    pub inputs: Vec<(PathBuf, String)>,
    /// Output paths relative to the run directory.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: String) -> Self {
        RunManifest {
            command: command.to_string(),
            seed,
            config,
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.inputs.push((path.to_path_buf(), digest));
        Ok(())
    }

    /// Artifacts that do not exist yet are listed as `pending`.
    pub fn render(&self, dir: &Path) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tool=nash {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "command={}", self.command);
        let _ = writeln!(out, "seed={}", self.seed);
        for (p, d) in &self.inputs {
            let _ = writeln!(out, "input={}\tsha256:{d}", p.display());
        }
        for line in self.config.lines() {
            let _ = writeln!(out, "config.{line}");
        }
        for a in &self.artifacts {
            let digest = file_digest(&dir.join(a))
                .map_or_else(|_| "pending".to_string(), |d| format!("sha256:{d}"));
            let _ = writeln!(out, "artifact={a}\t{digest}");
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(MANIFEST_FILE), self.render(dir))?;
        Ok(())
    }
}
