//! Reverse-mode gradients of the masked cross-entropy through the two-layer
//! forward map, including lazily evaluated gradients with respect to
//! individual normalized-adjacency entries.

use super::{CeMode, ForwardTrace, GcnModel, GnnError};
use crate::graph::{DenseMatrix, SparseMatrix};
use crate::linalg::spmm;

/// Gradients produced by [`gcn_backward`].
#[derive(Debug, Clone)]
pub struct GcnBackward {
    pub grad_w1: DenseMatrix,
    pub grad_w2: DenseMatrix,
    pub adj: AdjGrad,
}

/// Deferred adjacency gradient. The dense N x N gradient is never formed;
/// entries are evaluated on demand from the cached backward intermediates.
#[derive(Debug, Clone)]
pub struct AdjGrad {
    /// dL/d(logits), zero outside the mask.
    d_s2: DenseMatrix,
    /// dL/d(first-layer pre-activation).
    d_s1: DenseMatrix,
}

impl AdjGrad {
    /// Gradient of the loss with respect to the (i, j) entry of the
    /// normalized adjacency, holding everything else fixed.
    pub fn at(&self, trace: &ForwardTrace, i: usize, j: usize) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.d_s2.row(i).iter().zip(trace.z2.row(j).iter()) {
            acc += a * b;
        }
        for (a, b) in self.d_s1.row(i).iter().zip(trace.z0.row(j).iter()) {
            acc += a * b;
        }
        acc
    }

    /// Evaluate the gradient on a caller-supplied support set.
    pub fn on_support(&self, trace: &ForwardTrace, support: &[(usize, usize)]) -> Vec<f64> {
        support.iter().map(|&(i, j)| self.at(trace, i, j)).collect()
    }
}

/// Backward pass for the masked cross-entropy. The trace must come from a
/// forward call on exactly these inputs.
pub fn gcn_backward(
    trace: &ForwardTrace,
    x: &SparseMatrix,
    a_norm: &SparseMatrix,
    model: &GcnModel,
    labels: &[Option<usize>],
    mask: &[usize],
    mode: CeMode,
) -> Result<GcnBackward, GnnError> {
    let n = a_norm.n_rows();
    let c = model.n_classes();
    let h = model.hidden_dim();
    if trace.probabilities.n_rows() != n || trace.probabilities.n_cols() != c {
        return Err(GnnError::MismatchedTrace {
            context: "probabilities shape",
        });
    }
    if trace.h1.n_cols() != h || trace.z0.n_cols() != h || x.n_rows() != n {
        return Err(GnnError::MismatchedTrace {
            context: "hidden shape",
        });
    }

    let scale = match mode {
        CeMode::Sum => 1.0,
        CeMode::Mean => {
            if mask.is_empty() {
                0.0
            } else {
                1.0 / mask.len() as f64
            }
        }
    };

    // dL/d(logits): (P - Y) on masked rows.
    let mut d_s2 = DenseMatrix::zeros(n, c);
    for &node in mask {
        let label = labels
            .get(node)
            .copied()
            .flatten()
            .ok_or(GnnError::UnlabeledInMask { node })?;
        let p_row = trace.probabilities.row(node);
        let out_row = d_s2.row_mut(node);
        for (cls, (&p, o)) in p_row.iter().zip(out_row.iter_mut()).enumerate() {
            let y = if cls == label { 1.0 } else { 0.0 };
            *o = (p - y) * scale;
        }
    }

    // Back through the second aggregation: dZ2 = A^T dS2 (A symmetric).
    let d_z2 = spmm(a_norm, &d_s2).expect("square adjacency");
    let grad_w2 = trace.h1.transpose().matmul(&d_z2);

    // Back through relu.
    let mut d_s1 = d_z2.matmul(&model.w2.transpose());
    for (g, s) in d_s1.data_mut().iter_mut().zip(trace.s1.data().iter()) {
        if *s <= 0.0 {
            *g = 0.0;
        }
    }

    // Back through the first aggregation and the feature product.
    let d_z0 = spmm(a_norm, &d_s1).expect("square adjacency");
    let grad_w1 = spmm(&x.transpose(), &d_z0).expect("checked dims");

    Ok(GcnBackward {
        grad_w1,
        grad_w2,
        adj: AdjGrad { d_s2, d_s1 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{cross_entropy, gcn_forward};
    use crate::graph::{build_symmetric, sym_normalize};
    use crate::oracle::relative_error;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Instance {
        x: SparseMatrix,
        a: SparseMatrix,
        model: GcnModel,
        labels: Vec<Option<usize>>,
        mask: Vec<usize>,
    }

    fn random_instance(n: usize, seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 6;
        let h = 5;
        let c = 3;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_range(0.0..1.0) < 0.35 {
                    edges.push((i, j, 1.0));
                }
            }
        }
        // Keep every node attached so no zero rows blunt the gradients.
        for i in 1..n {
            edges.push((i - 1, i, 1.0));
        }
        let a = sym_normalize(&build_symmetric(n, edges).unwrap(), true);
        let x_dense: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = SparseMatrix::from_dense(
            &DenseMatrix::from_vec(n, d, x_dense).unwrap(),
            0.0,
        );
        let model = GcnModel::glorot(d, h, c, seed ^ 0x9e37);
        let labels: Vec<Option<usize>> = (0..n).map(|i| Some(i % c)).collect();
        let mask: Vec<usize> = (0..n).step_by(2).collect();
        Instance {
            x,
            a,
            model,
            labels,
            mask,
        }
    }

    fn loss_of(inst: &Instance, model: &GcnModel) -> f64 {
        let trace = gcn_forward(&inst.x, &inst.a, model).unwrap();
        cross_entropy(&trace.probabilities, &inst.labels, &inst.mask, CeMode::Mean).unwrap()
    }

    #[test]
    fn saturated_predictions_give_near_zero_gradients() {
        // Two disconnected nodes, huge weights pushing each to its label.
        let a = sym_normalize(&build_symmetric(2, vec![]).unwrap(), true);
        let x = SparseMatrix::from_triples(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let model = GcnModel {
            w1: DenseMatrix::from_vec(2, 2, vec![40.0, 0.0, 0.0, 40.0]).unwrap(),
            w2: DenseMatrix::from_vec(2, 2, vec![40.0, -40.0, -40.0, 40.0]).unwrap(),
        };
        let trace = gcn_forward(&x, &a, &model).unwrap();
        let labels = vec![Some(0), Some(1)];
        let back =
            gcn_backward(&trace, &x, &a, &model, &labels, &[0, 1], CeMode::Mean).unwrap();
        assert!(back.grad_w1.max_abs() < 1e-8);
        assert!(back.grad_w2.max_abs() < 1e-8);
    }

    #[test]
    fn weight_gradients_match_finite_differences() {
        for seed in 0..5u64 {
            let inst = random_instance(12, seed);
            let trace = gcn_forward(&inst.x, &inst.a, &inst.model).unwrap();
            let back = gcn_backward(
                &trace,
                &inst.x,
                &inst.a,
                &inst.model,
                &inst.labels,
                &inst.mask,
                CeMode::Mean,
            )
            .unwrap();
            let h = 1e-6;
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 99);
            for _ in 0..12 {
                let which = rng.random_range(0..2);
                let (rows, cols) = if which == 0 {
                    (inst.model.w1.n_rows(), inst.model.w1.n_cols())
                } else {
                    (inst.model.w2.n_rows(), inst.model.w2.n_cols())
                };
                let i = rng.random_range(0..rows);
                let j = rng.random_range(0..cols);
                let numeric = {
                    let mut plus = inst.model.clone();
                    let mut minus = inst.model.clone();
                    let (mp, mm) = if which == 0 {
                        (&mut plus.w1, &mut minus.w1)
                    } else {
                        (&mut plus.w2, &mut minus.w2)
                    };
                    mp.set(i, j, mp.get(i, j) + h);
                    mm.set(i, j, mm.get(i, j) - h);
                    (loss_of(&inst, &plus) - loss_of(&inst, &minus)) / (2.0 * h)
                };
                let analytic = if which == 0 {
                    back.grad_w1.get(i, j)
                } else {
                    back.grad_w2.get(i, j)
                };
                let rel = relative_error(analytic, numeric);
                assert!(
                    rel <= 1e-5,
                    "seed {seed} block {which} ({i},{j}): analytic {analytic}, fd {numeric}, rel {rel}"
                );
            }
        }
    }

    #[test]
    fn adjacency_gradients_match_finite_differences() {
        for seed in 0..5u64 {
            let inst = random_instance(12, seed);
            let trace = gcn_forward(&inst.x, &inst.a, &inst.model).unwrap();
            let back = gcn_backward(
                &trace,
                &inst.x,
                &inst.a,
                &inst.model,
                &inst.labels,
                &inst.mask,
                CeMode::Mean,
            )
            .unwrap();
            let support: Vec<(usize, usize)> =
                inst.a.triples().map(|(i, j, _)| (i, j)).collect();
            let picks: Vec<(usize, usize)> = support
                .iter()
                .copied()
                .step_by((support.len() / 20).max(1))
                .take(20)
                .collect();
            let h = 1e-6;
            let analytic_all = back.adj.on_support(&trace, &picks);
            for (&(i, j), &analytic) in picks.iter().zip(analytic_all.iter()) {
                // Perturb the single stored entry (i, j), leaving (j, i) alone.
                let numeric = {
                    let perturbed = |delta: f64| {
                        let triples: Vec<(usize, usize, f64)> = inst
                            .a
                            .triples()
                            .map(|(r, c, v)| {
                                if (r, c) == (i, j) {
                                    (r, c, v + delta)
                                } else {
                                    (r, c, v)
                                }
                            })
                            .collect();
                        let a2 = SparseMatrix::from_triples(
                            inst.a.n_rows(),
                            inst.a.n_cols(),
                            triples,
                        )
                        .unwrap();
                        let t = gcn_forward(&inst.x, &a2, &inst.model).unwrap();
                        cross_entropy(&t.probabilities, &inst.labels, &inst.mask, CeMode::Mean)
                            .unwrap()
                    };
                    (perturbed(h) - perturbed(-h)) / (2.0 * h)
                };
                let rel = relative_error(analytic, numeric);
                assert!(
                    rel <= 1e-5,
                    "seed {seed} entry ({i},{j}): analytic {analytic}, fd {numeric}, rel {rel}"
                );
            }
        }
    }

    #[test]
    fn rejects_mismatched_trace() {
        let inst = random_instance(8, 0);
        let other = random_instance(9, 1);
        let trace = gcn_forward(&other.x, &other.a, &other.model).unwrap();
        let err = gcn_backward(
            &trace,
            &inst.x,
            &inst.a,
            &inst.model,
            &inst.labels,
            &inst.mask,
            CeMode::Mean,
        )
        .unwrap_err();
        assert!(matches!(err, GnnError::MismatchedTrace { .. }));
    }
}
