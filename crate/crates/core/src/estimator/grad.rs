//! Analytic gradient of the joint objective with respect to the learnable
//! factor `u`.
//!
//! Differentiation conventions: pruning acts as a straight-through mask
//! (gradients flow only through surviving entries), the degree scaling is
//! held constant within a step, and the outer-product chain rule gives
//! `dL/dLambda = (G + G^T) Lambda` for an upstream gradient `G` on the
//! surviving support.

use super::{normalized_estimate, LowRankFactor, NormalizedEstimate, TrainError};
use crate::gnn::{gcn_backward, gcn_forward, CeMode, ForwardTrace, GcnBackward, GcnModel};
use crate::graph::{DenseMatrix, SparseMatrix};

/// Everything the classifier side contributes to the factor gradient.
#[derive(Debug, Clone, Copy)]
pub struct GnnInputs<'a> {
    pub x: &'a SparseMatrix,
    pub model: &'a GcnModel,
    pub labels: &'a [Option<usize>],
    pub mask: &'a [usize],
    pub ce_mode: CeMode,
}

/// Gradient of `ce + lambda_sim * sim + lambda_fr * fr` with respect to the
/// factor's `u`, under the conventions above. Rebuilds the estimate and the
/// forward trace from the current factor.
pub fn u_gradient(
    a: &SparseMatrix,
    factor: &LowRankFactor,
    epsilon: f64,
    gnn: &GnnInputs,
    lambda_sim: f64,
    lambda_fr: f64,
) -> Result<DenseMatrix, TrainError> {
    let est = normalized_estimate(factor, epsilon, false)?;
    let trace = gcn_forward(gnn.x, &est.a_tilde, gnn.model)?;
    let back = gcn_backward(
        &trace,
        gnn.x,
        &est.a_tilde,
        gnn.model,
        gnn.labels,
        gnn.mask,
        gnn.ce_mode,
    )?;
    Ok(u_gradient_from_parts(
        a, factor, &est, &trace, &back, lambda_sim, lambda_fr, true,
    ))
}

/// Storage-index permutation sending each stored (i, j) to its mirror (j, i).
/// The support must be structurally symmetric.
fn transpose_permutation(m: &SparseMatrix) -> Vec<usize> {
    let offsets = m.row_offsets();
    let cols = m.col_indices();
    let mut perm = vec![0usize; m.nnz()];
    for i in 0..m.n_rows() {
        for idx in offsets[i]..offsets[i + 1] {
            let j = cols[idx];
            let lo = offsets[j];
            let hi = offsets[j + 1];
            let pos = cols[lo..hi]
                .binary_search(&i)
                .expect("support must be symmetric");
            perm[idx] = lo + pos;
        }
    }
    perm
}

/// Worker shared with the trainer: assumes the estimate, trace, and backward
/// pass were produced from this factor.
#[allow(clippy::too_many_arguments)]
pub(crate) fn u_gradient_from_parts(
    a: &SparseMatrix,
    factor: &LowRankFactor,
    est: &NormalizedEstimate,
    trace: &ForwardTrace,
    back: &GcnBackward,
    lambda_sim: f64,
    lambda_fr: f64,
    sim_on_normalized: bool,
) -> DenseMatrix {
    let n = factor.n();
    let d = factor.d();
    let lambda = factor.lambda();
    let pruned = &est.pruned;
    let dinv = &est.inv_sqrt_deg;

    // Upstream gradient G = dL/dA_d on the surviving support.
    let offsets = pruned.row_offsets();
    let cols = pruned.col_indices();
    let vals = pruned.values();
    let mut g = vec![0.0f64; pruned.nnz()];
    for i in 0..n {
        for idx in offsets[i]..offsets[i + 1] {
            let j = cols[idx];
            let scale = dinv[i] * dinv[j];
            let ce_part = if scale != 0.0 {
                back.adj.at(trace, i, j) * scale
            } else {
                0.0
            };
            let sim_part = if lambda_sim != 0.0 {
                if sim_on_normalized {
                    let a_tilde_ij = vals[idx] * scale;
                    2.0 * lambda_sim * (a_tilde_ij - a.get(i, j)) * scale
                } else {
                    2.0 * lambda_sim * (vals[idx] - a.get(i, j))
                }
            } else {
                0.0
            };
            g[idx] = ce_part + sim_part;
        }
    }

    // dL/dLambda = (G + G^T) Lambda, evaluated over the sparse support.
    let perm = transpose_permutation(pruned);
    let mut d_lambda = DenseMatrix::zeros(n, d);
    for i in 0..n {
        let out_row = d_lambda.row_mut(i);
        for idx in offsets[i]..offsets[i + 1] {
            let j = cols[idx];
            let h = g[idx] + g[perm[idx]];
            if h == 0.0 {
                continue;
            }
            for (o, &l) in out_row.iter_mut().zip(lambda.row(j).iter()) {
                *o += h * l;
            }
        }
    }

    // dL/dU = dL/dLambda * diag(sqrt(s)) + 2 * lambda_fr * U * diag(s).
    let mut grad = d_lambda;
    let sqrt_s = factor.sqrt_s();
    let s = factor.s();
    for i in 0..n {
        let row = grad.row_mut(i);
        let u_row = factor.u().row(i);
        for k in 0..d {
            row[k] = row[k] * sqrt_s[k] + 2.0 * lambda_fr * u_row[k] * s[k];
        }
    }
    grad
}
