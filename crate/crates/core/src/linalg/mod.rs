//! Dense/sparse kernels and spectral decompositions: CSR-by-dense products,
//! a cyclic-Jacobi eigensolver used as the exact reference path, and a
//! randomized truncated SVD for sparse symmetric matrices.

mod jacobi;
mod qr;
mod svd;

pub use jacobi::{full_svd_oracle, jacobi_eigh, EighResult};
pub use qr::householder_qr;
pub use svd::{truncated_svd, SvdConfig, TruncatedSvdResult};

use thiserror::Error;

use crate::graph::{DenseMatrix, SparseMatrix};

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("inner dimensions disagree: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix asymmetry {max_asym:.3e} exceeds tolerance {tol:.1e}")]
    NotSymmetric { max_asym: f64, tol: f64 },
    #[error("sketch width d + oversample = {requested} exceeds matrix order {n}")]
    SketchTooWide { requested: usize, n: usize },
    #[error("rank d must be at least 1")]
    ZeroRank,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix order {n} exceeds the dense-oracle cap {cap}")]
    TooLargeForOracle { n: usize, cap: usize },
}

/// CSR times dense: exact product with ascending-column accumulation within
/// each row.
pub fn spmm(a: &SparseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if a.n_cols() != b.n_rows() {
        return Err(LinalgError::DimensionMismatch {
            left: a.n_cols(),
            right: b.n_rows(),
        });
    }
    let mut out = DenseMatrix::zeros(a.n_rows(), b.n_cols());
    for i in 0..a.n_rows() {
        let out_row = out.row_mut(i);
        for (k, v) in a.row_iter(i) {
            let b_row = b.row(k);
            for (o, &x) in out_row.iter_mut().zip(b_row.iter()) {
                *o += v * x;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_symmetric;
    use crate::oracle;

    #[test]
    fn spmm_empty_gives_zero() {
        let a = SparseMatrix::empty(3, 3);
        let b = DenseMatrix::from_vec(3, 2, vec![1.0; 6]).unwrap();
        let out = spmm(&a, &b).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spmm_identity_pattern_returns_input() {
        let a = SparseMatrix::from_triples(3, 3, (0..3).map(|i| (i, i, 1.0))).unwrap();
        let b = DenseMatrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(spmm(&a, &b).unwrap(), b);
    }

    #[test]
    fn spmm_matches_dense_oracle() {
        let mut edges = Vec::new();
        for i in 0..8usize {
            for j in (i + 1)..8usize {
                if (i * 31 + j * 17) % 3 == 0 {
                    edges.push((i, j, ((i + j) as f64).sin() + 1.5));
                }
            }
        }
        let a = build_symmetric(8, edges).unwrap();
        let b = DenseMatrix::from_vec(
            8,
            3,
            (0..24).map(|k| ((k * 7 % 11) as f64) * 0.25 - 1.0).collect(),
        )
        .unwrap();
        let got = spmm(&a, &b).unwrap();
        let want = oracle::dense_matmul(&a.to_dense(), &b);
        for (g, w) in got.data().iter().zip(want.data().iter()) {
            assert!((g - w).abs() < 1e-13);
        }
    }

    #[test]
    fn spmm_rejects_mismatch() {
        let a = SparseMatrix::empty(3, 4);
        let b = DenseMatrix::zeros(3, 2);
        assert!(matches!(
            spmm(&a, &b).unwrap_err(),
            LinalgError::DimensionMismatch { left: 4, right: 3 }
        ));
    }
}
