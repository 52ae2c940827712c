//! Run manifests: what went in, with digests taken before the run, and
//! what came out.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Default, Serialize)]
pub struct Manifest {
    pub command: String,
    pub arguments: serde_json::Value,
    /// Resolved experiment config, when the command read one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub seeds: Vec<u64>,
}

fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read `{}`", path.display()))?;
    let hash = Sha256::digest(&bytes);
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

impl Manifest {
    pub fn begin<T: Serialize>(&mut self, command: &str, args: &T) -> Result<()> {
        self.command = command.to_owned();
        self.arguments = serde_json::to_value(args)?;
        Ok(())
    }

    pub fn config_echo<T: Serialize>(&mut self, cfg: &T) -> Result<()> {
        self.config = Some(serde_json::to_value(cfg)?);
        Ok(())
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(digest(path)?);
        Ok(())
    }

    pub fn inputs(&mut self, paths: &[&PathBuf]) -> Result<()> {
        paths.iter().try_for_each(|p| self.input(p))
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(digest(path)?);
        Ok(())
    }

    /// Writes the manifest to `path`, or next to the first output.
    pub fn finish(self, path: Option<&Path>) -> Result<()> {
        let target = match path {
            Some(p) => p.to_path_buf(),
            None => match self.outputs.first() {
                Some(o) => PathBuf::from(format!("{}.manifest.json", o.path)),
                None => return Ok(()),
            },
        };
        let text = serde_json::to_string_pretty(&self)? + "\n";
        std::fs::write(&target, text).with_context(|| format!("cannot write `{}`", target.display()))
    }
}
