//! Reproducibility manifest embedded in every output file.

use serde::Serialize;
use std::time::{SystemTime, UNIX_EPOCH};

/// Everything needed to reproduce an output file: the command line, the
/// resolved configuration snapshot, the seed and the software version.
/// The timestamp honours `SOURCE_DATE_EPOCH` so reruns can be byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub version: &'static str,
    pub timestamp_unix: u64,
    /// JSON snapshot of the fully resolved configuration.
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: String, seed: u64, config: serde_json::Value) -> Self {
        let timestamp_unix = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|v| v.parse::<u64>().ok())
            .unwrap_or_else(|| {
                SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
            });
        Self {
            command,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            timestamp_unix,
            config,
        }
    }

    /// Comment header prepended to CSV outputs.
    pub fn csv_header(&self) -> String {
        let config = serde_json::to_string(&self.config).expect("config snapshot serializes");
        format!(
            "# manifest: etrack v{}\n# command: {}\n# seed: {}\n# timestamp_unix: {}\n# config: {}\n",
            self.version, self.command, self.seed, self.timestamp_unix, config
        )
    }
}
