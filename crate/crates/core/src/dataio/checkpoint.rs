//! Model checkpoints: a manifest plus the factor and classifier matrices as
//! decimal CSV, checksummed so a reload either reproduces the saved model
//! bit-for-bit or fails loudly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::FileEntry;
use super::text::{format_f64, parse_f64, sha256_file};
use super::DataError;
use crate::estimator::{normalized_estimate, LowRankFactor, Method, TrainConfig, TrainedModel};
use crate::gnn::GcnModel;
use crate::graph::{sym_normalize, DenseMatrix, SparseGraph, SparseMatrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointManifest {
    method: Method,
    config: TrainConfig,
    seed: u64,
    /// Epoch whose state was selected.
    epoch: usize,
    val_accuracy: f64,
    u: FileEntry,
    s: FileEntry,
    w1: FileEntry,
    w2: FileEntry,
}

/// A reloaded checkpoint.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub method: Method,
    pub config: TrainConfig,
    pub epoch: usize,
    pub val_accuracy: f64,
    pub factor: LowRankFactor,
    pub model: GcnModel,
}

impl Checkpoint {
    /// Rebuild the normalized adjacency this checkpoint classifies with.
    pub fn rebuild_adjacency(&self, graph: &SparseGraph) -> Result<SparseMatrix, DataError> {
        let a = match self.method {
            Method::Gcn => sym_normalize(&graph.adjacency, self.config.self_loops.unwrap_or(true)),
            Method::Elr => {
                normalized_estimate(
                    &self.factor,
                    self.config.epsilon,
                    self.config.self_loops.unwrap_or(false),
                )?
                .a_tilde
            }
            Method::GcnSvd => {
                normalized_estimate(&self.factor, 0.0, self.config.self_loops.unwrap_or(false))?
                    .a_tilde
            }
        };
        Ok(a)
    }
}

fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<(), DataError> {
    let mut out = String::new();
    out.push_str(&format!("{},{}\n", m.n_rows(), m.n_cols()));
    for i in 0..m.n_rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format_f64(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| DataError::io(path, e))
}

fn read_matrix(path: &Path) -> Result<DenseMatrix, DataError> {
    let content = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| DataError::file(path, "empty matrix file"))?;
    let dims: Vec<&str> = header.split(',').collect();
    if dims.len() != 2 {
        return Err(DataError::parse(path, 1, "expected 'rows,cols' header"));
    }
    let rows: usize = dims[0]
        .trim()
        .parse()
        .map_err(|e| DataError::parse(path, 1, format!("bad row count: {e}")))?;
    let cols: usize = dims[1]
        .trim()
        .parse()
        .map_err(|e| DataError::parse(path, 1, format!("bad col count: {e}")))?;
    let mut data = Vec::with_capacity(rows * cols);
    for (idx, line) in lines.take(rows) {
        if cols == 0 {
            continue;
        }
        for field in line.split(',') {
            data.push(parse_f64(field).map_err(|e| DataError::parse(path, idx + 1, e))?);
        }
    }
    if data.len() != rows * cols {
        return Err(DataError::file(
            path,
            format!("expected {} values, found {}", rows * cols, data.len()),
        ));
    }
    Ok(DenseMatrix::from_vec(rows, cols, data)?)
}

fn entry(dir: &Path, file: &str) -> Result<FileEntry, DataError> {
    Ok(FileEntry {
        path: PathBuf::from(file),
        sha256: sha256_file(&dir.join(file))?,
    })
}

/// Persist a trained model under `dir` (created if needed).
pub fn save_checkpoint(
    dir: &Path,
    method: Method,
    cfg: &TrainConfig,
    trained: &TrainedModel,
) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    write_matrix(&dir.join("u.csv"), trained.factor.u())?;
    let s_row = DenseMatrix::from_vec(1, trained.factor.s().len(), trained.factor.s().to_vec())?;
    write_matrix(&dir.join("s.csv"), &s_row)?;
    write_matrix(&dir.join("w1.csv"), &trained.model.w1)?;
    write_matrix(&dir.join("w2.csv"), &trained.model.w2)?;
    let manifest = CheckpointManifest {
        method,
        config: cfg.clone(),
        seed: cfg.seed,
        epoch: trained.selected_epoch,
        val_accuracy: trained.val_accuracy,
        u: entry(dir, "u.csv")?,
        s: entry(dir, "s.csv")?,
        w1: entry(dir, "w1.csv")?,
        w2: entry(dir, "w2.csv")?,
    };
    let path = dir.join("manifest.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(|e| DataError::io(&path, e))
}

/// Load a checkpoint directory, verifying every checksum.
pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint, DataError> {
    let manifest_path = dir.join("manifest.json");
    let content =
        fs::read_to_string(&manifest_path).map_err(|e| DataError::io(&manifest_path, e))?;
    let manifest: CheckpointManifest =
        serde_json::from_str(&content).map_err(|e| DataError::Json {
            path: manifest_path.clone(),
            message: e.to_string(),
        })?;
    for entry in [&manifest.u, &manifest.s, &manifest.w1, &manifest.w2] {
        let full = dir.join(&entry.path);
        let found = sha256_file(&full)?;
        if found != entry.sha256 {
            return Err(DataError::ChecksumMismatch {
                path: full,
                expected: entry.sha256.clone(),
                found,
            });
        }
    }
    let u = read_matrix(&dir.join(&manifest.u.path))?;
    let s = read_matrix(&dir.join(&manifest.s.path))?;
    let w1 = read_matrix(&dir.join(&manifest.w1.path))?;
    let w2 = read_matrix(&dir.join(&manifest.w2.path))?;
    let factor = LowRankFactor::new(u, s.data().to_vec())?;
    Ok(Checkpoint {
        method: manifest.method,
        config: manifest.config,
        epoch: manifest.epoch,
        val_accuracy: manifest.val_accuracy,
        factor,
        model: GcnModel { w1, w2 },
    })
}
