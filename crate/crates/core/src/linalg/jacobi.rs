//! Cyclic Jacobi eigendecomposition for dense symmetric matrices. Slow and
//! exact; this is the reference path the randomized code is checked against.

use crate::graph::DenseMatrix;
use crate::linalg::LinalgError;

/// Largest matrix order accepted by the dense reference decompositions.
pub const ORACLE_CAP: usize = 256;

const ASYMMETRY_TOL: f64 = 1e-10;
const OFFDIAG_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Signed eigendecomposition result: `matrix = V diag(values) V^T`.
#[derive(Debug, Clone)]
pub struct EighResult {
    /// Eigenvalues, sorted by descending magnitude.
    pub values: Vec<f64>,
    /// Corresponding eigenvectors as columns.
    pub vectors: DenseMatrix,
}

/// Full eigendecomposition of a dense symmetric matrix by cyclic Jacobi
/// rotations. Pairs are sorted by |eigenvalue| descending.
pub fn jacobi_eigh(a: &DenseMatrix) -> Result<EighResult, LinalgError> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(LinalgError::NotSquare {
            rows: n,
            cols: a.n_cols(),
        });
    }
    if n > ORACLE_CAP {
        return Err(LinalgError::TooLargeForOracle { n, cap: ORACLE_CAP });
    }
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((a.get(i, j) - a.get(j, i)).abs());
        }
        for j in 0..n {
            if !a.get(i, j).is_finite() {
                return Err(LinalgError::NonFinite { row: i, col: j });
            }
        }
    }
    if max_asym > ASYMMETRY_TOL {
        return Err(LinalgError::NotSymmetric {
            max_asym,
            tol: ASYMMETRY_TOL,
        });
    }

    let mut m = a.clone();
    // Work on the symmetrized copy so rotations stay consistent.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, avg);
            m.set(j, i, avg);
        }
    }
    let mut v = DenseMatrix::identity(n);
    let scale = m.max_abs().max(1.0);

    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m.get(p, q).abs());
            }
        }
        if off <= OFFDIAG_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= OFFDIAG_TOL * scale {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        m.get(y, y)
            .abs()
            .partial_cmp(&m.get(x, x).abs())
            .expect("eigenvalues are finite")
            .then(x.cmp(&y))
    });
    let values: Vec<f64> = order.iter().map(|&k| m.get(k, k)).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, new_col, v.get(row, old_col));
        }
    }
    Ok(EighResult { values, vectors })
}

/// Singular decomposition of a dense symmetric matrix via [`jacobi_eigh`]:
/// singular values are |eigenvalues| sorted non-increasing, with the
/// matching eigenvectors as columns.
pub fn full_svd_oracle(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix), LinalgError> {
    let eigh = jacobi_eigh(a)?;
    Ok((eigh.values.iter().map(|v| v.abs()).collect(), eigh.vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spectrum() {
        let (vals, _) = full_svd_oracle(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(vals, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn off_diagonal_pair() {
        let a = DenseMatrix::from_vec(2, 2, vec![0.0, 2.0, 2.0, 0.0]).unwrap();
        let (vals, _) = full_svd_oracle(&a).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_with_signed_values() {
        let n = 20;
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = (((i * 7 + j * 13) % 19) as f64 - 9.0) / 9.0;
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let eigh = jacobi_eigh(&a).unwrap();
        let mut recon = DenseMatrix::zeros(n, n);
        for k in 0..n {
            let lam = eigh.values[k];
            for i in 0..n {
                for j in 0..n {
                    let cur = recon.get(i, j);
                    recon.set(i, j, cur + lam * eigh.vectors.get(i, k) * eigh.vectors.get(j, k));
                }
            }
        }
        let mut err = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                err += (recon.get(i, j) - a.get(i, j)).powi(2);
            }
        }
        assert!(err.sqrt() <= 1e-9, "reconstruction error {}", err.sqrt());
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DenseMatrix::from_vec(2, 2, vec![0.0, 1.0, 0.5, 0.0]).unwrap();
        assert!(matches!(
            jacobi_eigh(&a).unwrap_err(),
            LinalgError::NotSymmetric { .. }
        ));
    }

    #[test]
    fn rejects_oversized() {
        let a = DenseMatrix::zeros(ORACLE_CAP + 1, ORACLE_CAP + 1);
        assert!(matches!(
            jacobi_eigh(&a).unwrap_err(),
            LinalgError::TooLargeForOracle { .. }
        ));
    }
}
