//! Run manifests. Every report a run emits carries the hash of the manifest
//! that produced it: JSON reports as a `manifest_hash` field, CSV and JSONL
//! reports as a leading `# manifest_hash=<hex>` comment line.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::project::write_file;

pub const TOOL_NAME: &str = "tracecast";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    /// Fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64, config: serde_json::Value) -> Self {
        RunManifest {
            tool: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(mut self, role: &str, path: &Path) -> Self {
        self.inputs.insert(role.into(), path.display().to_string());
        self
    }

    pub fn output(mut self, role: &str, path: &Path) -> Self {
        self.outputs.insert(role.into(), path.display().to_string());
        self
    }

    /// SHA-256 of the manifest's compact JSON.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("serializable manifest");
        sha256_hex(text.as_bytes())
    }

    /// Writes `manifest.json`: the manifest, its hash and the SHA-256 of every
    /// output that exists.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut artifacts = BTreeMap::new();
        for (role, out) in &self.outputs {
            if let Ok(bytes) = std::fs::read(out) {
                artifacts.insert(role.clone(), sha256_hex(&bytes));
            }
        }
        let doc = serde_json::json!({
            "manifest": self,
            "manifest_hash": self.hash(),
            "artifacts": artifacts,
        });
        write_file(path, &(serde_json::to_string_pretty(&doc)? + "\n"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serializes `report` as pretty JSON with a `manifest_hash` field added.
pub fn json_with_hash<T: Serialize>(report: &T, manifest_hash: &str) -> Result<String> {
    let mut value = serde_json::to_value(report)?;
    match &mut value {
        serde_json::Value::Object(map) => {
            map.insert("manifest_hash".into(), manifest_hash.into());
        }
        _ => {
            value = serde_json::json!({ "report": value, "manifest_hash": manifest_hash });
        }
    }
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

/// Prefixes text output with the manifest comment line.
pub fn with_hash_comment(body: &[u8], manifest_hash: &str) -> Result<String> {
    let text = std::str::from_utf8(body).map_err(|e| Error::Validation(e.to_string()))?;
    Ok(format!("# manifest_hash={manifest_hash}\n{text}"))
}

/// Strips a leading manifest comment, returning the hash and the body.
pub fn split_hash_comment(text: &str) -> (Option<&str>, &str) {
    match text.strip_prefix("# manifest_hash=") {
        Some(rest) => match rest.split_once('\n') {
            Some((hash, body)) => (Some(hash), body),
            None => (Some(rest), ""),
        },
        None => (None, text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_config_sensitive() {
        let a = RunManifest::new("train", 7, serde_json::json!({"lr": 0.001}));
        let b = RunManifest::new("train", 7, serde_json::json!({"lr": 0.001}));
        assert_eq!(a.hash(), b.hash());
        let c = RunManifest::new("train", 8, serde_json::json!({"lr": 0.001}));
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn hash_comment_round_trip() {
        let text = with_hash_comment(b"a,b\n1,2\n", "abc").unwrap();
        assert_eq!(split_hash_comment(&text), (Some("abc"), "a,b\n1,2\n"));
        assert_eq!(split_hash_comment("x\n"), (None, "x\n"));
    }

    #[test]
    fn json_reports_embed_hash() {
        let s = json_with_hash(&serde_json::json!({"auc": 0.5}), "h").unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["manifest_hash"], "h");
        assert_eq!(v["auc"], 0.5);
    }
}
