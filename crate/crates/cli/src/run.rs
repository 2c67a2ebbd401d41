//! Run manifests, hashed run directories and artifact envelopes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::exit::Invalid;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
const HASH_PREFIX: usize = 16;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRef {
    pub path: String,
    pub sha256: String,
}

/// Identity of one subcommand invocation. `hash` covers the subcommand,
/// effective configuration, seed, input hashes and tool version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub hash: String,
    pub subcommand: String,
    pub config_path: Option<String>,
    pub config: Value,
    pub seed: u64,
    pub inputs: BTreeMap<String, InputRef>,
    pub outputs: Vec<OutputRef>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, config_path: Option<&Path>, config: Value, seed: u64, inputs: BTreeMap<String, InputRef>) -> Self {
        let identity = json!({
            "subcommand": subcommand,
            "config": config,
            "seed": seed,
            "inputs": inputs.iter().map(|(k, v)| (k.clone(), v.sha256.clone())).collect::<BTreeMap<_, _>>(),
            "tool_version": TOOL_VERSION,
        });
        Self {
            hash: sha256_hex(identity.to_string().as_bytes()),
            subcommand: subcommand.into(),
            config_path: config_path.map(|p| p.display().to_string()),
            config,
            seed,
            inputs,
            outputs: Vec::new(),
            tool_version: TOOL_VERSION.into(),
        }
    }
}

/// Output directory `<root>/<hash prefix>` of one run.
pub struct Run {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl Run {
    pub fn start(root: &Path, manifest: RunManifest) -> Result<Self> {
        let dir = root.join(&manifest.hash[..HASH_PREFIX]);
        fs::create_dir_all(&dir).with_context(|| format!("creating run directory {}", dir.display()))?;
        Ok(Self { dir, manifest })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(OutputRef {
            path: name.into(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    /// Writes `{"manifest": <hash>, "payload": value}`.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let doc = json!({ "manifest": self.manifest.hash, "payload": value });
        let text = serde_json::to_string_pretty(&doc)?;
        self.write(name, text.as_bytes())
    }

    /// Writes CSV preceded by a `# manifest: <hash>` comment line.
    pub fn write_csv(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        let text = format!("# manifest: {}\n{body}", self.manifest.hash);
        self.write(name, text.as_bytes())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&self.manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("run: {}", self.dir.display());
        Ok(self.dir)
    }
}

/// Reads a JSON artifact, unwrapping a run envelope when present, and parses
/// it with `parse`. Failures are input-validation errors.
pub fn load<T>(path: &Path, parse: impl Fn(&str) -> nkscreen::Result<T>) -> Result<(T, InputRef)> {
    let bytes = fs::read(path).map_err(|e| Invalid(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Invalid(format!("{} is not UTF-8: {e}", path.display())))?;
    let payload = match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(mut m)) if m.contains_key("manifest") && m.contains_key("payload") => {
            m.remove("payload").map(|v| v.to_string())
        }
        Ok(_) => None,
        Err(e) => return Err(Invalid(format!("{} is not valid JSON: {e}", path.display())).into()),
    };
    let value = parse(payload.as_deref().unwrap_or(text)).map_err(|e| Invalid(format!("{}: {e}", path.display())))?;
    Ok((
        value,
        InputRef {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        },
    ))
}

/// Reads a configuration file into `T`, rejecting unknown fields.
pub fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => Ok(load(p, |s| Ok(serde_json::from_str(s)?))?.0),
    }
}
