//! Run provenance.
//!
//! Every output file references a sidecar `<file>.manifest.json` describing
//! the command line, resolved-configuration hash, and input digest. The
//! deterministic subset (everything except the wall-clock timestamp) is also
//! embedded in JSON results, so result files stay byte-identical across
//! repeated runs.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Deterministic provenance embedded in result files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddedManifest {
    pub command: String,
    pub config_hash: String,
    pub input_sha256: Option<String>,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rng_algorithm: Option<String>,
}

/// Full sidecar manifest (adds the creation timestamp).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub embedded: EmbeddedManifest,
    pub created_utc: String,
}

impl EmbeddedManifest {
    pub fn new(command: String, config_hash: String, input_sha256: Option<String>) -> Self {
        Self {
            command,
            config_hash,
            input_sha256,
            version: ARTIFACT_VERSION.to_string(),
            rng_algorithm: None,
        }
    }

    pub fn with_rng(mut self, algorithm: &str) -> Self {
        self.rng_algorithm = Some(algorithm.to_string());
        self
    }

    pub fn into_run_manifest(self) -> RunManifest {
        RunManifest {
            embedded: self,
            created_utc: chrono::Utc::now().to_rfc3339(),
        }
    }
}

impl RunManifest {
    /// Write `<target>.manifest.json` next to an output file.
    pub fn write_sidecar(&self, target: &Path) -> std::io::Result<()> {
        let mut path = target.as_os_str().to_owned();
        path.push(".manifest.json");
        let mut file = std::fs::File::create(Path::new(&path))?;
        let body = serde_json::to_string_pretty(self).expect("serializable manifest");
        file.write_all(body.as_bytes())?;
        file.write_all(b"\n")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Hash of a resolved configuration's canonical JSON.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    sha256_hex(
        serde_json::to_string(config)
            .expect("serializable config")
            .as_bytes(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn embedded_part_is_deterministic() {
        let a = EmbeddedManifest::new("x".into(), "h".into(), None).with_rng("chacha8");
        let b = EmbeddedManifest::new("x".into(), "h".into(), None).with_rng("chacha8");
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
