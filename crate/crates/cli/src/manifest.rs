use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use lewisrows::Result;

/// Parameters of one CLI invocation, written as JSON when `--manifest` is given.
#[derive(Debug, Default, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub input: Option<String>,
    pub p: Option<f64>,
    pub epsilon: Option<f64>,
    pub theta: Option<f64>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub version: &'static str,
    pub parallel: bool,
}

impl RunManifest {
    pub fn new(command: &str, input: Option<&Path>) -> Self {
        RunManifest {
            command: command.to_string(),
            input: input.map(|p| p.display().to_string()),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            version: env!("CARGO_PKG_VERSION"),
            parallel: cfg!(feature = "parallel"),
            ..Default::default()
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::from)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}
