use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::jobs::Job;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Success,
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

/// Record of one command run. `job` is the fully resolved configuration
/// (flags, environment overrides and config files merged), enough to re-run
/// the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub job: Job,
    pub outputs: Vec<PathBuf>,
    pub stages: Vec<Stage>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl RunManifest {
    pub fn new(job: Job) -> Self {
        Self {
            command: job.name().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: job.seed(),
            job,
            outputs: Vec::new(),
            stages: Vec::new(),
            status: RunStatus::Running,
            message: None,
        }
    }

    pub fn path(&self) -> PathBuf {
        self.job.out_dir().join(self.job.manifest_name())
    }

    pub fn write(&self) -> Result<()> {
        let path = self.path();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    /// Runs `f` and records its wall-clock time under `name`.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.stages.push(Stage {
            name: name.to_string(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        out
    }
}
