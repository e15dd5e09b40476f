//! Independent reference implementations used to verify the fast paths.
//!
//! Everything here is deliberately naive: plain loops, no shared kernels
//! with the code under test. Test suites freeze expected values computed by
//! these routines.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::estimator::LowRankFactor;
use crate::gnn::{cross_entropy, gcn_forward, CeMode, GcnModel};
use crate::graph::{DenseMatrix, SparseMatrix};
use crate::linalg::jacobi_eigh;

/// Naive triple-loop dense product.
pub fn dense_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.n_cols(), b.n_rows());
    let mut out = DenseMatrix::zeros(a.n_rows(), b.n_cols());
    for i in 0..a.n_rows() {
        for j in 0..b.n_cols() {
            let mut acc = 0.0;
            for k in 0..a.n_cols() {
                acc += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, acc);
        }
    }
    out
}

/// Entrywise sum of squares, scalar loop.
pub fn frobenius_sq_scalar(m: &DenseMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.n_rows() {
        for j in 0..m.n_cols() {
            acc += m.get(i, j) * m.get(i, j);
        }
    }
    acc
}

/// Random symmetric matrix with a controlled spectrum: the top `d`
/// eigenvalues lie in [1.5, 2.5] and the tail in [-0.8, 0.8], so the
/// magnitude gap at index `d` is at least 0.7. Returned as CSR.
pub fn gapped_symmetric_csr(n: usize, d: usize, seed: u64) -> SparseMatrix {
    let dense = gapped_symmetric_dense(n, d, seed);
    SparseMatrix::from_dense(&dense, 0.0)
}

/// Dense variant of [`gapped_symmetric_csr`].
pub fn gapped_symmetric_dense(n: usize, d: usize, seed: u64) -> DenseMatrix {
    assert!(d <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            raw.set(i, j, rng.random_range(-1.0..1.0));
        }
    }
    let q = crate::linalg::householder_qr(&raw);
    let mut eigs = Vec::with_capacity(n);
    for k in 0..n {
        if k < d {
            eigs.push(rng.random_range(1.5..2.5));
        } else {
            eigs.push(rng.random_range(-0.8..0.8));
        }
    }
    let mut out = DenseMatrix::zeros(n, n);
    for k in 0..n {
        for i in 0..n {
            let qik = q.get(i, k) * eigs[k];
            for j in 0..n {
                let cur = out.get(i, j);
                out.set(i, j, cur + qik * q.get(j, k));
            }
        }
    }
    // Force exact symmetry; the construction is symmetric only to rounding.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (out.get(i, j) + out.get(j, i));
            out.set(i, j, avg);
            out.set(j, i, avg);
        }
    }
    out
}

/// Best achievable squared Frobenius error of any rank-`d` approximation,
/// from the exact spectrum: the energy of the n-d smallest |eigenvalues|.
pub fn best_rank_d_error_sq(a: &DenseMatrix, d: usize) -> f64 {
    let eigh = jacobi_eigh(a).expect("oracle input must be symmetric");
    eigh.values.iter().skip(d).map(|v| v * v).sum()
}

/// Numerical rank: eigenvalue magnitudes above `tol` times the largest.
pub fn numerical_rank(a: &DenseMatrix, tol: f64) -> usize {
    let eigh = jacobi_eigh(a).expect("oracle input must be symmetric");
    let top = eigh.values.first().map(|v| v.abs()).unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    eigh.values.iter().filter(|v| v.abs() > tol * top).count()
}

/// Central finite difference of a scalar function: (f(x+h) - f(x-h)) / 2h.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Relative error with an absolute floor, the usual gradient-check metric.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(1e-8);
    (a - b).abs() / denom
}

/// Scalar Adam reference: one update for a single parameter, written out
/// longhand. `state` is (m, v, t) before the step.
pub fn scalar_adam_step(
    param: f64,
    grad: f64,
    state: (f64, f64, u64),
    lr: f64,
    weight_decay: f64,
) -> (f64, (f64, f64, u64)) {
    let beta1 = 0.9;
    let beta2 = 0.999;
    let eps = 1e-8;
    let g = grad + weight_decay * param;
    let (m0, v0, t0) = state;
    let t = t0 + 1;
    let m = beta1 * m0 + (1.0 - beta1) * g;
    let v = beta2 * v0 + (1.0 - beta2) * g * g;
    let m_hat = m / (1.0 - beta1.powi(t as i32));
    let v_hat = v / (1.0 - beta2.powi(t as i32));
    (param - lr * m_hat / (v_hat.sqrt() + eps), (m, v, t))
}

/// The joint objective evaluated under the trainer's differentiation
/// conventions: the prune mask (`support`) and the degree scaling
/// (`inv_sqrt_deg`) are frozen at the linearization point, so central
/// differences of this function are directly comparable to the analytic
/// factor gradient.
#[allow(clippy::too_many_arguments)]
pub fn frozen_objective(
    a: &SparseMatrix,
    factor: &LowRankFactor,
    support: &[(usize, usize)],
    inv_sqrt_deg: &[f64],
    x: &SparseMatrix,
    model: &GcnModel,
    labels: &[Option<usize>],
    mask: &[usize],
    ce_mode: CeMode,
    lambda_sim: f64,
    lambda_fr: f64,
    sim_on_normalized: bool,
) -> f64 {
    let n = factor.n();
    let lambda = factor.lambda();
    let dot = |i: usize, j: usize| {
        let mut acc = 0.0;
        for (p, q) in lambda.row(i).iter().zip(lambda.row(j).iter()) {
            acc += p * q;
        }
        acc
    };

    let mut triples = Vec::with_capacity(support.len());
    let mut sim = 0.0;
    for &(i, j) in support {
        let a_d = dot(i, j);
        let a_tilde = inv_sqrt_deg[i] * inv_sqrt_deg[j] * a_d;
        triples.push((i, j, a_tilde));
        let target = if sim_on_normalized { a_tilde } else { a_d };
        let diff = target - a.get(i, j);
        sim += diff * diff;
    }
    // Entries of A outside the frozen support face a zero estimate.
    let support_set: HashSet<(usize, usize)> = support.iter().copied().collect();
    for (i, j, v) in a.triples() {
        if !support_set.contains(&(i, j)) {
            sim += v * v;
        }
    }

    let a_tilde = SparseMatrix::from_triples(n, n, triples).expect("frozen support in range");
    let trace = gcn_forward(x, &a_tilde, model).expect("shapes fixed");
    let ce = cross_entropy(&trace.probabilities, labels, mask, ce_mode).expect("mask labeled");
    ce + lambda_sim * sim + lambda_fr * lambda.frobenius_sq()
}

/// Mean and sample standard deviation (n-1 denominator; 0.0 for n <= 1).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() as f64 - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gapped_matrix_has_requested_gap() {
        let a = gapped_symmetric_dense(30, 5, 3);
        let eigh = jacobi_eigh(&a).unwrap();
        let mags: Vec<f64> = eigh.values.iter().map(|v| v.abs()).collect();
        assert!(mags[4] >= 1.5 - 1e-9);
        assert!(mags[5] <= 0.8 + 1e-9);
    }

    #[test]
    fn central_difference_of_square() {
        let d = central_difference(|x| x * x, 3.0, 1e-6);
        assert!((d - 6.0).abs() < 1e-8);
    }

    #[test]
    fn mean_std_basics() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[5.0]).1, 0.0);
    }
}
