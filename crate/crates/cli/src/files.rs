use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use gs_core::dynamics::ExternalInput;
use gs_core::ensemble::random_drive;
use gs_core::{Error, Graph, GraphFile, Partition};

use crate::Failure;

/// Sorts a core error into an exit class.
pub fn classify(e: Error) -> Failure {
    match e {
        Error::FiedlerOutOfRange(_)
        | Error::SignIndefinite(_)
        | Error::NoConvergence(_)
        | Error::SingularScaling { .. }
        | Error::SingularSystem
        | Error::NonFiniteState(_)
        | Error::ZeroReferenceVelocity(_)
        | Error::AllVelocitiesZero
        | Error::DegenerateEstimate
        | Error::NonFiniteEstimate(_)
        | Error::IsolatedLeader(_) => Failure::Domain(e.to_string()),
        _ => Failure::Input(e.to_string()),
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

pub fn load_graph(path: &Path) -> Result<(Graph, Partition), Failure> {
    let file: GraphFile = read_json(path)?;
    file.to_parts()
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Creates the output directory and returns the path of `name` inside it.
pub fn out_path(dir: &Path, name: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_with(dir, name, |w| w.write_all(text.as_bytes()))
}

pub fn write_with(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<PathBuf, Failure> {
    let path = out_path(dir, name)?;
    let io_err = |e: std::io::Error| Failure::Input(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err)?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderInput {
    /// 1-based.
    pub leader: usize,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsFile {
    #[serde(default)]
    pub inputs: Vec<LeaderInput>,
    /// One row per node, `dim` columns.
    #[serde(default)]
    pub x0: Option<Vec<Vec<f64>>>,
}

/// Inputs and initial state from an optional file, filling gaps from the
/// seeded generator.
pub fn resolve_drive(
    p: &Partition,
    dim: usize,
    seed: u64,
    inputs: Option<&Path>,
) -> Result<(ExternalInput, DMatrix<f64>), Failure> {
    let (random_u, random_x0) = random_drive(p, dim, 1.0, seed).map_err(classify)?;
    let Some(path) = inputs else {
        return Ok((random_u, random_x0));
    };
    let file: InputsFile = read_json(path)?;
    let bad = |m: String| Failure::Input(format!("{}: {m}", path.display()));

    let u = if file.inputs.is_empty() {
        random_u
    } else {
        let mut per_leader = std::collections::BTreeMap::new();
        for li in &file.inputs {
            let node = gs_core::NodeId::from_label(li.leader)
                .ok_or_else(|| bad(format!("leader label {} must be >= 1", li.leader)))?;
            if per_leader.insert(node, li.u.clone()).is_some() {
                return Err(bad(format!("leader {} listed twice", li.leader)));
            }
        }
        let u = ExternalInput::new(p, &per_leader).map_err(|e| bad(e.to_string()))?;
        if u.dim() != dim {
            return Err(bad(format!(
                "inputs have dimension {}, expected {dim}",
                u.dim()
            )));
        }
        u
    };
    let x0 = match file.x0 {
        None => random_x0,
        Some(rows) => {
            if rows.len() != p.n() || rows.iter().any(|r| r.len() != dim) {
                return Err(bad(format!("x0 must be {} rows of {dim} values", p.n())));
            }
            DMatrix::from_fn(p.n(), dim, |i, c| rows[i][c])
        }
    };
    Ok((u, x0))
}
