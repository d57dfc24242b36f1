//! Output stamping, manifests and verification.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Provenance {
            tool: "biokg".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config.hash(),
            seed: config.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub provenance: Provenance,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex(&Sha256::digest(bytes)))
}

/// Collects the files one command writes into its output directory.
pub struct OutputDir {
    dir: PathBuf,
    provenance: Provenance,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path, provenance: Provenance) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            provenance,
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// CSV with `config_hash` and `seed` appended to every row. Fields never
    /// contain line breaks, so rows are extended line by line.
    pub fn write_csv<F>(&mut self, name: &str, fill: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> biokg::Result<()>,
    {
        let mut raw = Vec::new();
        fill(&mut raw)?;
        let text = String::from_utf8(raw).context("csv output is not utf-8")?;
        let mut out = String::with_capacity(text.len() * 2);
        for (i, line) in text.lines().enumerate() {
            out.push_str(line);
            if i == 0 {
                out.push_str(",config_hash,seed\n");
            } else {
                out.push_str(&format!(",{},{}\n", self.provenance.config_hash, self.provenance.seed));
            }
        }
        self.write(name, out.as_bytes())
    }

    /// JSON document with a `provenance` block next to `body`.
    pub fn write_json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Stamped<'a, T> {
            provenance: &'a Provenance,
            #[serde(flatten)]
            body: &'a T,
        }
        let doc = Stamped {
            provenance: &self.provenance,
            body,
        };
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Writes `manifest-<command>.json` listing every output with its digest.
    pub fn finish(self, config: &RunConfig, inputs: Vec<FileDigest>) -> Result<PathBuf> {
        let outputs = self
            .written
            .iter()
            .map(|name| {
                Ok(FileDigest {
                    name: name.clone(),
                    sha256: sha256_file(&self.dir.join(name))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            provenance: self.provenance.clone(),
            config: config.clone(),
            inputs,
            outputs,
        };
        let path = self.dir.join(manifest_name(&self.provenance.command));
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn manifest_name(command: &str) -> String {
    format!("manifest-{command}.json")
}

/// Checks every manifest in `dir`: the recorded hash must match the
/// recorded config, every output must match its digest, and every stamped
/// output must carry the same hash and seed. Returns the number of files
/// checked.
pub fn verify_dir(dir: &Path) -> Result<usize> {
    let mut manifests: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("manifest-") && n.ends_with(".json"))
        })
        .collect();
    manifests.sort();
    if manifests.is_empty() {
        bail!("no manifest found in {}", dir.display());
    }
    let mut checked = 0;
    for path in manifests {
        let text = std::fs::read_to_string(&path)?;
        let manifest: Manifest =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let p = &manifest.provenance;
        let rehash = manifest.config.hash();
        if rehash != p.config_hash {
            bail!("{}: config hash {} does not match recorded {}", path.display(), rehash, p.config_hash);
        }
        if manifest.config.seed != p.seed {
            bail!("{}: seed {} does not match config seed {}", path.display(), p.seed, manifest.config.seed);
        }
        for out in &manifest.outputs {
            let file = dir.join(&out.name);
            let digest = sha256_file(&file)?;
            if digest != out.sha256 {
                bail!("{}: digest changed", file.display());
            }
            check_stamp(&file, p)?;
            checked += 1;
        }
    }
    Ok(checked)
}

fn check_stamp(file: &Path, p: &Provenance) -> Result<()> {
    let text = std::fs::read_to_string(file)?;
    let name = file.display();
    match file.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            let v: serde_json::Value = serde_json::from_str(&text)?;
            let hash = v.pointer("/provenance/config_hash").and_then(|h| h.as_str());
            let seed = v.pointer("/provenance/seed").and_then(|s| s.as_u64());
            if hash != Some(p.config_hash.as_str()) || seed != Some(p.seed) {
                bail!("{name}: provenance block does not match the manifest");
            }
        }
        Some("csv") => {
            let mut lines = text.lines();
            if !lines.next().is_some_and(|h| h.ends_with(",config_hash,seed")) {
                bail!("{name}: missing provenance columns");
            }
            let suffix = format!(",{},{}", p.config_hash, p.seed);
            if let Some(bad) = lines.find(|l| !l.ends_with(&suffix)) {
                bail!("{name}: row `{bad}` carries a different hash or seed");
            }
        }
        _ => {}
    }
    Ok(())
}
