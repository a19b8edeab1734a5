use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of `bytes`.
pub fn fingerprint(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Run description written next to every report. Holds no timestamps or
/// host details so identical runs produce identical manifests.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    /// Fingerprint of the canonical `key=value` rendering of `config`.
    pub config_fingerprint: String,
    /// Output file name to content fingerprint.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: BTreeMap<String, String>) -> Self {
        let canon: String = config.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        Self {
            tool: "codefusion".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config_fingerprint: fingerprint(canon.as_bytes()),
            config,
            outputs: BTreeMap::new(),
        }
    }

    pub fn record_output(&mut self, name: &str, bytes: &[u8]) {
        self.outputs.insert(name.into(), fingerprint(bytes));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}
