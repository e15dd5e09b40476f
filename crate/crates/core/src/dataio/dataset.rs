//! Dataset ingestion and the checksummed manifest tying the files together.
//!
//! Formats:
//! - edges: UTF-8 text, one edge per line `src<TAB>dst[<TAB>weight]`,
//!   `#`-prefixed comment lines, weight defaults to 1.0;
//! - features: headerless CSV, one row per node;
//! - labels: TSV `node<TAB>label`, omitted nodes stay unlabeled;
//! - split: JSON `{"train": [...], "val": [...], "test": [...]}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::text::{format_f64, parse_f64, sha256_file};
use super::DataError;
use crate::graph::{
    build_symmetric, DenseMatrix, Features, NodeSplit, SparseGraph, SparseMatrix,
};

/// Load a symmetrized adjacency matrix from an edge-list file.
pub fn load_graph(path: &Path, n: usize) -> Result<SparseMatrix, DataError> {
    let content = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let mut edges = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(DataError::parse(
                path,
                line_no,
                format!("expected 'src\\tdst[\\tweight]', found {} fields", fields.len()),
            ));
        }
        let src: usize = fields[0]
            .trim()
            .parse()
            .map_err(|e| DataError::parse(path, line_no, format!("bad src '{}': {e}", fields[0])))?;
        let dst: usize = fields[1]
            .trim()
            .parse()
            .map_err(|e| DataError::parse(path, line_no, format!("bad dst '{}': {e}", fields[1])))?;
        let weight = if fields.len() == 3 {
            parse_f64(fields[2]).map_err(|e| DataError::parse(path, line_no, e))?
        } else {
            1.0
        };
        if src >= n || dst >= n {
            return Err(DataError::parse(
                path,
                line_no,
                format!("node id out of range: edge ({src}, {dst}) with n = {n}"),
            ));
        }
        if !weight.is_finite() {
            return Err(DataError::parse(path, line_no, "non-finite weight"));
        }
        edges.push((src, dst, weight));
    }
    Ok(build_symmetric(n, edges)?)
}

/// Load a dense feature matrix: exactly `n` CSV rows of equal width.
pub fn load_features(path: &Path, n: usize) -> Result<DenseMatrix, DataError> {
    let content = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v = parse_f64(field).map_err(|e| DataError::parse(path, line_no, e))?;
            if !v.is_finite() {
                return Err(DataError::parse(path, line_no, "non-finite feature value"));
            }
            row.push(v);
        }
        if let Some(w) = width {
            if row.len() != w {
                return Err(DataError::parse(
                    path,
                    line_no,
                    format!("row has {} values, expected {w}", row.len()),
                ));
            }
        } else {
            width = Some(row.len());
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(DataError::file(
            path,
            format!("expected {n} feature rows, found {}", rows.len()),
        ));
    }
    let width = width.unwrap_or(0);
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DenseMatrix::from_vec(n, width, data)?)
}

/// Load labels; nodes missing from the file stay unlabeled.
pub fn load_labels(path: &Path, n: usize) -> Result<Vec<Option<usize>>, DataError> {
    let content = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let mut labels = vec![None; n];
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(DataError::parse(
                path,
                line_no,
                format!("expected 'node\\tlabel', found {} fields", fields.len()),
            ));
        }
        let node: usize = fields[0]
            .trim()
            .parse()
            .map_err(|e| DataError::parse(path, line_no, format!("bad node id: {e}")))?;
        let label: usize = fields[1]
            .trim()
            .parse()
            .map_err(|e| DataError::parse(path, line_no, format!("bad label: {e}")))?;
        if node >= n {
            return Err(DataError::parse(
                path,
                line_no,
                format!("node id {node} out of range (n = {n})"),
            ));
        }
        labels[node] = Some(label);
    }
    Ok(labels)
}

#[derive(Serialize, Deserialize)]
struct SplitFile {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

/// Load and validate a node split.
pub fn load_split(path: &Path, n: usize) -> Result<NodeSplit, DataError> {
    let content = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let raw: SplitFile = serde_json::from_str(&content).map_err(|e| DataError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(NodeSplit::new(raw.train, raw.val, raw.test, n)?)
}

/// A referenced file plus its expected checksum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileEntry {
    fn resolve(&self, base: &Path) -> PathBuf {
        base.join(&self.path)
    }

    fn verify(&self, base: &Path) -> Result<PathBuf, DataError> {
        let full = self.resolve(base);
        let found = sha256_file(&full)?;
        if found != self.sha256 {
            return Err(DataError::ChecksumMismatch {
                path: full,
                expected: self.sha256.clone(),
                found,
            });
        }
        Ok(full)
    }
}

/// Manifest describing one on-disk dataset. Paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub n_nodes: usize,
    /// 0 means identity features.
    pub n_features: usize,
    pub n_classes: usize,
    pub edges: FileEntry,
    pub features: Option<FileEntry>,
    pub labels: FileEntry,
    pub split: FileEntry,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self, DataError> {
        let content = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        serde_json::from_str(&content).map_err(|e| DataError::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        let content = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, content).map_err(|e| DataError::io(path, e))
    }
}

/// Load a full dataset through its manifest, verifying every checksum and
/// cross-checking the counts.
pub fn load_dataset(manifest_path: &Path) -> Result<(SparseGraph, NodeSplit), DataError> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let base = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let edges_path = manifest.edges.verify(&base)?;
    let adjacency = load_graph(&edges_path, manifest.n_nodes)?;

    let features = match (&manifest.features, manifest.n_features) {
        (None, 0) => Features::Identity,
        (None, d) => {
            return Err(DataError::file(
                manifest_path,
                format!("manifest claims {d} features but names no feature file"),
            ))
        }
        (Some(_), 0) => {
            return Err(DataError::file(
                manifest_path,
                "manifest names a feature file but n_features = 0",
            ))
        }
        (Some(entry), d) => {
            let path = entry.verify(&base)?;
            let m = load_features(&path, manifest.n_nodes)?;
            if m.n_cols() != d {
                return Err(DataError::file(
                    path,
                    format!("expected {d} feature columns, found {}", m.n_cols()),
                ));
            }
            Features::Dense(m)
        }
    };

    let labels_path = manifest.labels.verify(&base)?;
    let labels = load_labels(&labels_path, manifest.n_nodes)?;
    let split_path = manifest.split.verify(&base)?;
    let split = load_split(&split_path, manifest.n_nodes)?;
    let graph = SparseGraph::new(adjacency, features, labels, manifest.n_classes)?;
    Ok((graph, split))
}

/// Write a graph edge-list file in the canonical format (upper-triangle
/// pairs, ascending, unit weights elided).
pub fn write_edges(path: &Path, a: &SparseMatrix) -> Result<(), DataError> {
    let mut out = String::new();
    for (i, j, w) in a.undirected_edges() {
        if w == 1.0 {
            out.push_str(&format!("{i}\t{j}\n"));
        } else {
            out.push_str(&format!("{i}\t{j}\t{}\n", format_f64(w)));
        }
    }
    fs::write(path, out).map_err(|e| DataError::io(path, e))
}

/// Persist a dataset directory (edges, optional features, labels, split,
/// manifest) and return the manifest path.
pub fn save_dataset(
    dir: &Path,
    name: &str,
    graph: &SparseGraph,
    split: &NodeSplit,
) -> Result<PathBuf, DataError> {
    fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let edges_path = dir.join("edges.tsv");
    write_edges(&edges_path, &graph.adjacency)?;

    let features = match &graph.features {
        Features::Identity => None,
        Features::Dense(m) => {
            let path = dir.join("features.csv");
            let mut out = String::new();
            for i in 0..m.n_rows() {
                let row: Vec<String> = m.row(i).iter().map(|v| format_f64(*v)).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
            fs::write(&path, out).map_err(|e| DataError::io(&path, e))?;
            Some(FileEntry {
                path: PathBuf::from("features.csv"),
                sha256: sha256_file(&path)?,
            })
        }
    };

    let labels_path = dir.join("labels.tsv");
    let mut out = String::new();
    for (node, label) in graph.labels.iter().enumerate() {
        if let Some(l) = label {
            out.push_str(&format!("{node}\t{l}\n"));
        }
    }
    fs::write(&labels_path, out).map_err(|e| DataError::io(&labels_path, e))?;

    let split_path = dir.join("split.json");
    let split_file = SplitFile {
        train: split.train_ids.clone(),
        val: split.val_ids.clone(),
        test: split.test_ids.clone(),
    };
    fs::write(
        &split_path,
        serde_json::to_string_pretty(&split_file).expect("split serializes"),
    )
    .map_err(|e| DataError::io(&split_path, e))?;

    let manifest = DatasetManifest {
        name: name.to_string(),
        n_nodes: graph.n_nodes,
        n_features: match &graph.features {
            Features::Identity => 0,
            Features::Dense(m) => m.n_cols(),
        },
        n_classes: graph.n_classes,
        edges: FileEntry {
            path: PathBuf::from("edges.tsv"),
            sha256: sha256_file(&edges_path)?,
        },
        features,
        labels: FileEntry {
            path: PathBuf::from("labels.tsv"),
            sha256: sha256_file(&labels_path)?,
        },
        split: FileEntry {
            path: PathBuf::from("split.json"),
            sha256: sha256_file(&split_path)?,
        },
    };
    let manifest_path = dir.join("manifest.json");
    manifest.write(&manifest_path)?;
    Ok(manifest_path)
}
