//! Randomized truncated SVD for sparse symmetric matrices: Gaussian sketch,
//! subspace (power) iterations with QR re-orthonormalization, then an exact
//! eigensolve of the small projected matrix.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::graph::{DenseMatrix, SparseMatrix};
use crate::linalg::jacobi::jacobi_eigh;
use crate::linalg::qr::householder_qr;
use crate::linalg::{spmm, LinalgError};

/// Parameters for [`truncated_svd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvdConfig {
    /// Target rank.
    pub d: usize,
    /// Extra sketch columns beyond `d`.
    pub oversample: usize,
    /// Subspace/power iterations applied to the sketch.
    pub power_iters: usize,
    /// RNG seed for the Gaussian sketch.
    pub seed: u64,
}

impl SvdConfig {
    pub fn new(d: usize, seed: u64) -> Self {
        Self {
            d,
            oversample: 10,
            power_iters: 8,
            seed,
        }
    }
}

/// Top-d singular pairs of a symmetric matrix.
///
/// For symmetric input the singular values are the eigenvalue magnitudes and
/// the left/right singular vectors coincide up to sign; only one copy is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvdResult {
    /// Singular values, non-increasing and non-negative.
    pub singular_values: Vec<f64>,
    /// N x d matrix with orthonormal columns.
    pub singular_vectors: DenseMatrix,
}

/// Randomized truncated SVD of a square symmetric sparse matrix.
/// Deterministic for a fixed config.
pub fn truncated_svd(a: &SparseMatrix, cfg: &SvdConfig) -> Result<TruncatedSvdResult, LinalgError> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(LinalgError::NotSquare {
            rows: n,
            cols: a.n_cols(),
        });
    }
    if cfg.d == 0 {
        return Err(LinalgError::ZeroRank);
    }
    let k = cfg.d + cfg.oversample;
    if k > n {
        return Err(LinalgError::SketchTooWide { requested: k, n });
    }
    for (i, j, v) in a.triples() {
        if !v.is_finite() {
            return Err(LinalgError::NonFinite { row: i, col: j });
        }
    }

    // Gaussian sketch, column-major draw order fixed by the seed.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut omega = DenseMatrix::zeros(n, k);
    for col in 0..k {
        for row in 0..n {
            let g: f64 = StandardNormal.sample(&mut rng);
            omega.set(row, col, g);
        }
    }

    let mut q = householder_qr(&spmm(a, &omega)?);
    for _ in 0..cfg.power_iters {
        q = householder_qr(&spmm(a, &q)?);
    }

    // Rayleigh-Ritz on the projected matrix B = Q^T A Q.
    let aq = spmm(a, &q)?;
    let b = q.transpose().matmul(&aq);
    let eigh = jacobi_eigh(&b)?;

    let mut vectors = DenseMatrix::zeros(n, cfg.d);
    let mut values = Vec::with_capacity(cfg.d);
    for out_col in 0..cfg.d {
        values.push(eigh.values[out_col].abs());
        for row in 0..n {
            let mut acc = 0.0;
            for inner in 0..k {
                acc += q.get(row, inner) * eigh.vectors.get(inner, out_col);
            }
            vectors.set(row, out_col, acc);
        }
    }

    // Sign convention: the entry of largest magnitude in each column is made
    // positive (first such index on ties).
    for col in 0..cfg.d {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for row in 0..n {
            let mag = vectors.get(row, col).abs();
            if mag > best_abs {
                best_abs = mag;
                best = row;
            }
        }
        if vectors.get(best, col) < 0.0 {
            for row in 0..n {
                let v = vectors.get(row, col);
                vectors.set(row, col, -v);
            }
        }
    }

    Ok(TruncatedSvdResult {
        singular_values: values,
        singular_vectors: vectors,
    })
}
