use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::args::{Command, Global};

pub const FILE: &str = "manifest.json";

/// What a run did, sufficient to repeat it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub run: Command,
    /// Resolved settings the flags do not show, such as the full leak model.
    #[serde(default)]
    pub resolved: serde_json::Value,
    pub outputs: Vec<String>,
    /// Wall clock; ignored when comparing runs.
    pub created_unix: u64,
}

impl Manifest {
    pub fn new(g: &Global, run: &Command, resolved: serde_json::Value, outputs: Vec<String>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: g.seed,
            jobs: g.jobs,
            run: run.clone(),
            resolved,
            outputs,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(FILE);
        fs::write(&path, serde_json::to_vec_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
    }
}
