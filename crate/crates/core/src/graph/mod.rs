//! Graph and matrix primitives: CSR adjacency storage, dense matrices,
//! degrees and symmetric normalization.

mod dense;
mod sparse;

pub use dense::DenseMatrix;
pub use sparse::{
    build_symmetric, degree_vector, sym_normalize, sym_normalize_with_stats, NormalizeStats,
    SparseMatrix, DEGREE_EPS,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge ({src}, {dst}) out of range for {n} nodes")]
    EdgeOutOfRange { src: usize, dst: usize, n: usize },
    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("non-finite value at ({row}, {col})")]
    NonFiniteValue { row: usize, col: usize },
    #[error("{context}: expected {expected} entries, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("malformed CSR: {0}")]
    MalformedCsr(String),
    #[error("adjacency must be symmetric: entry ({row}, {col}) has no mirror")]
    AsymmetricAdjacency { row: usize, col: usize },
    #[error("label {label} out of range for {n_classes} classes (node {node})")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        n_classes: usize,
    },
    #[error("node split parts overlap at node {node}")]
    OverlappingSplit { node: usize },
    #[error("train split is empty")]
    EmptyTrainSplit,
}

/// Node feature storage: an explicit dense matrix, or the identity
/// convention used for graphs without features.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense(DenseMatrix),
    /// One-hot identity features; the effective dimension equals the node count.
    Identity,
}

impl Features {
    pub fn dim(&self, n_nodes: usize) -> usize {
        match self {
            Features::Dense(m) => m.n_cols(),
            Features::Identity => n_nodes,
        }
    }

    /// CSR view used by the message-passing kernels. Row L1 normalization is
    /// applied when requested; identity rows are already unit mass.
    pub fn to_csr(&self, n_nodes: usize, row_normalize: bool) -> SparseMatrix {
        match self {
            Features::Identity => {
                SparseMatrix::from_triples(n_nodes, n_nodes, (0..n_nodes).map(|i| (i, i, 1.0)))
                    .expect("identity features are well-formed")
            }
            Features::Dense(m) => {
                let mut triples = Vec::new();
                for i in 0..m.n_rows() {
                    let row = m.row(i);
                    let scale = if row_normalize {
                        let mass: f64 = row.iter().map(|v| v.abs()).sum();
                        if mass > 0.0 {
                            1.0 / mass
                        } else {
                            1.0
                        }
                    } else {
                        1.0
                    };
                    for (j, &v) in row.iter().enumerate() {
                        if v != 0.0 {
                            triples.push((i, j, v * scale));
                        }
                    }
                }
                SparseMatrix::from_triples(m.n_rows(), m.n_cols(), triples)
                    .expect("dense features are finite")
            }
        }
    }
}

/// An attributed, undirected graph for semi-supervised node classification.
#[derive(Debug, Clone)]
pub struct SparseGraph {
    pub n_nodes: usize,
    pub adjacency: SparseMatrix,
    pub features: Features,
    /// Per-node class index; `None` marks unlabeled nodes.
    pub labels: Vec<Option<usize>>,
    pub n_classes: usize,
}

impl SparseGraph {
    /// Validate and assemble a graph. The adjacency must be square of order
    /// `n_nodes`, symmetric, and zero-diagonal; labels must fit `n_classes`.
    pub fn new(
        adjacency: SparseMatrix,
        features: Features,
        labels: Vec<Option<usize>>,
        n_classes: usize,
    ) -> Result<Self, GraphError> {
        let n = adjacency.n_rows();
        if adjacency.n_cols() != n {
            return Err(GraphError::DimensionMismatch {
                context: "adjacency must be square",
                expected: n,
                found: adjacency.n_cols(),
            });
        }
        for (i, j, v) in adjacency.triples() {
            if i == j {
                return Err(GraphError::MalformedCsr(format!(
                    "ingested adjacency has diagonal entry at node {i}"
                )));
            }
            if adjacency.get(j, i).to_bits() != v.to_bits() {
                return Err(GraphError::AsymmetricAdjacency { row: i, col: j });
            }
        }
        if let Features::Dense(m) = &features {
            if m.n_rows() != n {
                return Err(GraphError::DimensionMismatch {
                    context: "feature rows must match node count",
                    expected: n,
                    found: m.n_rows(),
                });
            }
        }
        if labels.len() != n {
            return Err(GraphError::DimensionMismatch {
                context: "label list must match node count",
                expected: n,
                found: labels.len(),
            });
        }
        for (node, label) in labels.iter().enumerate() {
            if let Some(l) = label {
                if *l >= n_classes {
                    return Err(GraphError::LabelOutOfRange {
                        node,
                        label: *l,
                        n_classes,
                    });
                }
            }
        }
        Ok(Self {
            n_nodes: n,
            adjacency,
            features,
            labels,
            n_classes,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.features.dim(self.n_nodes)
    }
}

/// Disjoint train/validation/test node index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSplit {
    pub train_ids: Vec<usize>,
    pub val_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

impl NodeSplit {
    /// Validate disjointness, range, and a nonempty train part.
    pub fn new(
        train_ids: Vec<usize>,
        val_ids: Vec<usize>,
        test_ids: Vec<usize>,
        n_nodes: usize,
    ) -> Result<Self, GraphError> {
        if train_ids.is_empty() {
            return Err(GraphError::EmptyTrainSplit);
        }
        let mut seen = vec![false; n_nodes];
        for &id in train_ids.iter().chain(&val_ids).chain(&test_ids) {
            if id >= n_nodes {
                return Err(GraphError::IndexOutOfRange {
                    index: id,
                    bound: n_nodes,
                });
            }
            if seen[id] {
                return Err(GraphError::OverlappingSplit { node: id });
            }
            seen[id] = true;
        }
        Ok(Self {
            train_ids,
            val_ids,
            test_ids,
        })
    }

    /// Random split by fractions (remainder goes to the test part), seeded.
    /// The conventional semi-supervised setup is `random(n, 0.1, 0.1, seed)`.
    pub fn random(n_nodes: usize, train_frac: f64, val_frac: f64, seed: u64) -> Self {
        let mut ids: Vec<usize> = (0..n_nodes).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ids.shuffle(&mut rng);
        let n_train = ((n_nodes as f64) * train_frac).round() as usize;
        let n_val = ((n_nodes as f64) * val_frac).round() as usize;
        let mut train: Vec<usize> = ids[..n_train].to_vec();
        let mut val: Vec<usize> = ids[n_train..n_train + n_val].to_vec();
        let mut test: Vec<usize> = ids[n_train + n_val..].to_vec();
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        Self {
            train_ids: train,
            val_ids: val,
            test_ids: test,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_rejects_asymmetric_adjacency() {
        let a = SparseMatrix::from_triples(2, 2, vec![(0, 1, 1.0)]).unwrap();
        let err = SparseGraph::new(a, Features::Identity, vec![None, None], 2).unwrap_err();
        assert!(matches!(err, GraphError::AsymmetricAdjacency { .. }));
    }

    #[test]
    fn graph_rejects_diagonal() {
        let a = SparseMatrix::from_triples(2, 2, vec![(0, 0, 1.0)]).unwrap();
        let err = SparseGraph::new(a, Features::Identity, vec![None, None], 2).unwrap_err();
        assert!(matches!(err, GraphError::MalformedCsr(_)));
    }

    #[test]
    fn graph_rejects_label_out_of_range() {
        let a = build_symmetric(2, vec![(0, 1, 1.0)]).unwrap();
        let err = SparseGraph::new(a, Features::Identity, vec![Some(2), None], 2).unwrap_err();
        assert!(matches!(err, GraphError::LabelOutOfRange { node: 0, .. }));
    }

    #[test]
    fn split_rejects_overlap() {
        let err = NodeSplit::new(vec![0, 1], vec![1], vec![2], 4).unwrap_err();
        assert!(matches!(err, GraphError::OverlappingSplit { node: 1 }));
    }

    #[test]
    fn split_rejects_empty_train() {
        assert!(matches!(
            NodeSplit::new(vec![], vec![0], vec![1], 2).unwrap_err(),
            GraphError::EmptyTrainSplit
        ));
    }

    #[test]
    fn random_split_is_deterministic_and_disjoint() {
        let a = NodeSplit::random(50, 0.1, 0.1, 7);
        let b = NodeSplit::random(50, 0.1, 0.1, 7);
        assert_eq!(a, b);
        assert_eq!(a.train_ids.len(), 5);
        assert_eq!(a.val_ids.len(), 5);
        assert_eq!(a.test_ids.len(), 40);
        NodeSplit::new(a.train_ids.clone(), a.val_ids.clone(), a.test_ids.clone(), 50).unwrap();
    }

    #[test]
    fn identity_features_to_csr() {
        let x = Features::Identity.to_csr(3, true);
        assert_eq!(x.nnz(), 3);
        assert_eq!(x.get(1, 1), 1.0);
    }

    #[test]
    fn dense_features_row_normalized() {
        let m = DenseMatrix::from_vec(2, 2, vec![2.0, 2.0, 0.0, 0.0]).unwrap();
        let x = Features::Dense(m).to_csr(2, true);
        assert_eq!(x.get(0, 0), 0.5);
        assert_eq!(x.get(0, 1), 0.5);
        assert_eq!(x.row_iter(1).count(), 0);
    }
}
