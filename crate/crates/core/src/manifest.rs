//! Run manifests tying emitted artifacts to the inputs that produced them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experts::TrainConfig;
use crate::fusion::FusionConfig;
use crate::io::write_atomic;
use crate::synth::GenConfig;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen: Option<GenConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fusion: Vec<FusionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the canonical dataset CSV bytes.
    pub dataset_fingerprint: String,
    pub configs: ConfigSnapshot,
    #[serde(default)]
    pub inputs: Vec<String>,
    /// Artifact file names, relative to the manifest's directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, dataset_fingerprint: String) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_owned(),
            command: command.to_owned(),
            seed,
            dataset_fingerprint,
            configs: ConfigSnapshot::default(),
            inputs: vec![],
            outputs: vec![],
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_json()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
