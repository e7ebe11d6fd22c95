//! Run manifests: every subcommand writes a `manifest.json` next to its
//! outputs carrying the fully resolved configuration, the seed, the code
//! version and the produced files, so any run can be reproduced from the
//! manifest alone (`--config manifest.json` works).

use crate::CliError;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub strict: bool,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    /// "ok" or "diverged".
    pub status: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value) -> Self {
        Self {
            tool: "adlif-lab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            seed: None,
            strict: false,
            config,
            outputs: Vec::new(),
            status: "ok".into(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
