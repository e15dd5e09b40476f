//! Two-layer graph convolutional classifier with hand-derived gradients.
//!
//! The forward map is `P = softmax(A · relu(A · X · W1) · W2)` with row-wise
//! softmax; `A` is a normalized adjacency and `X` a sparse feature matrix.

mod backward;
mod loss;
mod optim;

pub use backward::{gcn_backward, AdjGrad, GcnBackward};
pub use loss::{accuracy, cross_entropy, cross_entropy_with_stats, CeMode};
pub use optim::{adam_step, sgd_momentum_step, AdamState, MomentumState};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{DenseMatrix, SparseMatrix};
use crate::linalg::spmm;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite activation in {layer}")]
    NonFiniteActivation { layer: &'static str },
    #[error("node {node} in the loss mask is unlabeled")]
    UnlabeledInMask { node: usize },
    #[error("forward trace does not match inputs ({context})")]
    MismatchedTrace { context: &'static str },
}

/// Two message-passing layers' weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub w1: DenseMatrix,
    pub w2: DenseMatrix,
}

impl GcnModel {
    /// Glorot-uniform initialization, seed-controlled.
    pub fn glorot(in_dim: usize, hidden: usize, n_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let data: Vec<f64> = (0..rows * cols)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            DenseMatrix::from_vec_unchecked(rows, cols, data)
        };
        let w1 = init(in_dim, hidden, &mut rng);
        let w2 = init(hidden, n_classes, &mut rng);
        Self { w1, w2 }
    }

    pub fn in_dim(&self) -> usize {
        self.w1.n_rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.n_cols()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.n_cols()
    }
}

/// Every intermediate needed by the backward pass, plus the probabilities.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// X · W1.
    pub z0: DenseMatrix,
    /// A · z0 (first-layer pre-activation).
    pub s1: DenseMatrix,
    /// relu(s1).
    pub h1: DenseMatrix,
    /// h1 · W2.
    pub z2: DenseMatrix,
    /// A · z2 (logits).
    pub s2: DenseMatrix,
    /// Row-wise softmax of the logits.
    pub probabilities: DenseMatrix,
}

/// Forward pass. `x` is the (sparse) N x D feature matrix, `a_norm` the
/// normalized N x N adjacency.
pub fn gcn_forward(
    x: &SparseMatrix,
    a_norm: &SparseMatrix,
    model: &GcnModel,
) -> Result<ForwardTrace, GnnError> {
    if x.n_cols() != model.w1.n_rows() {
        return Err(GnnError::ShapeMismatch {
            context: "features vs W1",
            expected: model.w1.n_rows(),
            found: x.n_cols(),
        });
    }
    if a_norm.n_rows() != x.n_rows() || a_norm.n_cols() != x.n_rows() {
        return Err(GnnError::ShapeMismatch {
            context: "adjacency vs features",
            expected: x.n_rows(),
            found: a_norm.n_rows(),
        });
    }
    let z0 = spmm(x, &model.w1).expect("checked dims");
    let s1 = spmm(a_norm, &z0).expect("checked dims");
    if !s1.is_finite() {
        return Err(GnnError::NonFiniteActivation { layer: "layer1" });
    }
    let mut h1 = s1.clone();
    for v in h1.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let z2 = h1.matmul(&model.w2);
    let s2 = spmm(a_norm, &z2).expect("checked dims");
    if !s2.is_finite() {
        return Err(GnnError::NonFiniteActivation { layer: "layer2" });
    }
    let probabilities = row_softmax(&s2);
    Ok(ForwardTrace {
        z0,
        s1,
        h1,
        z2,
        s2,
        probabilities,
    })
}

/// Row-wise softmax with max subtraction.
fn row_softmax(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for i in 0..out.n_rows() {
        let row = out.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}
