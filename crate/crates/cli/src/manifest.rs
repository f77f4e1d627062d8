use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Sidecar written next to every output file as `<out>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    pub seed: u64,
    pub version: &'static str,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, parameters: Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            parameters,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn path_for(out: &Path) -> PathBuf {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write_beside(&self, out: &Path) -> anyhow::Result<()> {
        fs::write(
            Self::path_for(out),
            serde_json::to_string_pretty(self)? + "\n",
        )?;
        Ok(())
    }
}
