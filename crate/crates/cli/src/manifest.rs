use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::files::{read_json, write_json};
use crate::{Command, Failure};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Everything needed to reproduce a run: the resolved command with every
/// default filled in, the files it read and the files it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub rng_seed: Option<u64>,
}

impl RunManifest {
    pub fn new(command: Command, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Self {
        let rng_seed = match &command {
            Command::Gen(_) => None,
            Command::Simulate(a) => Some(a.drive.seed),
            Command::Identify(a) => Some(a.drive.seed),
            Command::Oracle(a) => Some(a.seed),
            Command::Pipeline(a) => Some(a.seed),
            Command::Spectral(_) | Command::Check(_) | Command::Replay(_) => None,
        };
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            inputs,
            outputs,
            rng_seed,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, Failure> {
        write_json(dir, MANIFEST_NAME, self)
    }

    pub fn read(path: &Path) -> Result<Self, Failure> {
        read_json(path)
    }
}
