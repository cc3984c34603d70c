use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command: the resolved arguments (inputs as
/// absolute paths, explicit seeds) plus digests of inputs and outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Layout version of the unconstrained parameter vector.
    pub packing_version: u32,
    pub command: Command,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// Collects output files written to one directory.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    written: Vec<FileDigest>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, command: &Command, inputs: Vec<FileDigest>) -> Result<Manifest> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            packing_version: evidenced::transforms::PACKING_VERSION,
            command: command.clone(),
            inputs,
            outputs: self.written,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let m: Manifest =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if m.packing_version != evidenced::transforms::PACKING_VERSION {
        bail!(
            "manifest uses packing version {}, this build uses {}",
            m.packing_version,
            evidenced::transforms::PACKING_VERSION
        );
    }
    Ok(m)
}

/// Fails if any recorded input changed since the manifest was written.
pub fn check_inputs(m: &Manifest) -> Result<()> {
    for input in &m.inputs {
        let now = digest_file(Path::new(&input.path))?;
        if now.sha256 != input.sha256 {
            bail!(
                "input {} changed since the manifest was written",
                input.path
            );
        }
    }
    Ok(())
}

/// Output files whose digests differ between two manifests.
pub fn compare_outputs(expected: &Manifest, actual: &Manifest) -> Vec<String> {
    let mut diffs = Vec::new();
    for e in &expected.outputs {
        match actual.outputs.iter().find(|a| a.path == e.path) {
            Some(a) if a.sha256 == e.sha256 => {}
            Some(_) => diffs.push(format!("{}: contents differ", e.path)),
            None => diffs.push(format!("{}: not produced", e.path)),
        }
    }
    for a in &actual.outputs {
        if !expected.outputs.iter().any(|e| e.path == a.path) {
            diffs.push(format!("{}: not in the original run", a.path));
        }
    }
    diffs
}
