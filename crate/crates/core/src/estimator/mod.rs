//! Low-rank sparse adjacency estimation: spectral initialization of the
//! factor, reconstruction as an outer product, weak-edge pruning, symmetric
//! normalization, the two regularization losses, and the joint trainer.

mod grad;
mod train;

pub use grad::{u_gradient, GnnInputs};
pub use train::{
    ablation_variant, forward_probabilities, gcn_train, svd_baseline_train, train, train_method,
    EpochStats, Method, TrainConfig, TrainTiming, TrainedModel, Variant,
};

use thiserror::Error;

use crate::graph::{
    degree_vector, sym_normalize_with_stats, DenseMatrix, GraphError, SparseMatrix, DEGREE_EPS,
};
use crate::gnn::GnnError;
use crate::linalg::{truncated_svd, LinalgError, SvdConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Reconstruction materializes an N x N dense matrix; refuse beyond this.
pub const DENSE_CAP: usize = 20_000;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error("non-finite loss at epoch {epoch}; training aborted")]
    Diverged { epoch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{n} nodes exceeds the dense reconstruction cap of {cap}")]
    TooLarge { n: usize, cap: usize },
}

/// Learnable low-rank factorization of the adjacency estimate.
///
/// `u` is the learnable N x d matrix; `s` holds the d leading singular
/// values and is frozen after initialization. The factor matrix is
/// `lambda = u * diag(sqrt(s))`, recomputed from the current `u` on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    u: DenseMatrix,
    s: Vec<f64>,
    sqrt_s: Vec<f64>,
}

impl LowRankFactor {
    /// Assemble from parts; `s` must be non-increasing and non-negative.
    pub fn new(u: DenseMatrix, s: Vec<f64>) -> Result<Self, TrainError> {
        if u.n_cols() != s.len() {
            return Err(TrainError::InvalidConfig(format!(
                "factor has {} columns but {} singular values",
                u.n_cols(),
                s.len()
            )));
        }
        for w in s.windows(2) {
            if w[1] > w[0] {
                return Err(TrainError::InvalidConfig(
                    "singular values must be non-increasing".into(),
                ));
            }
        }
        if s.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(TrainError::InvalidConfig(
                "singular values must be finite and non-negative".into(),
            ));
        }
        let sqrt_s = s.iter().map(|v| v.sqrt()).collect();
        Ok(Self { u, s, sqrt_s })
    }

    /// Zero-rank placeholder used by models that never learn a factor.
    pub fn empty(n: usize) -> Self {
        Self {
            u: DenseMatrix::zeros(n, 0),
            s: Vec::new(),
            sqrt_s: Vec::new(),
        }
    }

    /// Xavier-normal random factor with unit singular values (the random-
    /// initialization ablation).
    pub fn xavier_normal(n: usize, d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = (2.0 / (n + d) as f64).sqrt();
        let data: Vec<f64> = (0..n * d)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * std
            })
            .collect();
        Self {
            u: DenseMatrix::from_vec_unchecked(n, d, data),
            s: vec![1.0; d],
            sqrt_s: vec![1.0; d],
        }
    }

    pub fn n(&self) -> usize {
        self.u.n_rows()
    }

    pub fn d(&self) -> usize {
        self.u.n_cols()
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    /// Mutable access to the learnable part only; `s` stays frozen.
    pub fn u_mut(&mut self) -> &mut DenseMatrix {
        &mut self.u
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn sqrt_s(&self) -> &[f64] {
        &self.sqrt_s
    }

    /// `u * diag(sqrt(s))`.
    pub fn lambda(&self) -> DenseMatrix {
        let mut out = self.u.clone();
        for i in 0..out.n_rows() {
            for (v, &w) in out.row_mut(i).iter_mut().zip(self.sqrt_s.iter()) {
                *v *= w;
            }
        }
        out
    }
}

/// Run the truncated SVD and freeze the top-d spectrum into a factor.
pub fn coarse_init(
    a: &SparseMatrix,
    d: usize,
    svd_cfg: &SvdConfig,
) -> Result<LowRankFactor, TrainError> {
    let mut cfg = *svd_cfg;
    cfg.d = d;
    let svd = truncated_svd(a, &cfg)?;
    LowRankFactor::new(svd.singular_vectors, svd.singular_values)
}

/// Dense rank-d reconstruction `lambda * lambda^T`. Bit-symmetric output.
pub fn reconstruct(factor: &LowRankFactor) -> Result<DenseMatrix, TrainError> {
    let n = factor.n();
    if n > DENSE_CAP {
        return Err(TrainError::TooLarge { n, cap: DENSE_CAP });
    }
    let lambda = factor.lambda();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let li = lambda.row(i);
        for j in i..n {
            let lj = lambda.row(j);
            let mut acc = 0.0;
            for (a, b) in li.iter().zip(lj.iter()) {
                acc += a * b;
            }
            out.set(i, j, acc);
            out.set(j, i, acc);
        }
    }
    Ok(out)
}

/// Threshold weak connections: entries with value >= `epsilon` survive, the
/// rest become zeros. Exact zeros are structural and never stored, so with
/// `epsilon = 0` only strictly positive entries remain.
pub fn prune(a_d: &DenseMatrix, epsilon: f64) -> SparseMatrix {
    assert!(epsilon >= 0.0, "prune threshold must be non-negative");
    let mut triples = Vec::new();
    for i in 0..a_d.n_rows() {
        for (j, &v) in a_d.row(i).iter().enumerate() {
            if v >= epsilon && v != 0.0 {
                triples.push((i, j, v));
            }
        }
    }
    SparseMatrix::from_triples(a_d.n_rows(), a_d.n_cols(), triples)
        .expect("pruned entries are finite and in range")
}

/// Pruned low-rank estimate plus everything the gradient path needs.
#[derive(Debug, Clone)]
pub struct NormalizedEstimate {
    /// Pruned reconstruction (before normalization).
    pub pruned: SparseMatrix,
    /// Symmetrically normalized estimate fed to the GNN.
    pub a_tilde: SparseMatrix,
    /// Per-node 1/sqrt(degree) used by the normalization (0 for guarded rows).
    pub inv_sqrt_deg: Vec<f64>,
}

/// Reconstruct, prune, and normalize in one pass without materializing the
/// dense matrix. Entry values are identical to the composed
/// `reconstruct -> prune -> sym_normalize` pipeline.
pub fn normalized_estimate(
    factor: &LowRankFactor,
    epsilon: f64,
    add_self_loops: bool,
) -> Result<NormalizedEstimate, TrainError> {
    assert!(epsilon >= 0.0, "prune threshold must be non-negative");
    let n = factor.n();
    let lambda = factor.lambda();
    let mut row_offsets = vec![0usize; n + 1];
    let mut col_indices: Vec<usize> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let d = factor.d();
    for i in 0..n {
        let li = lambda.row(i);
        for j in 0..n {
            let lj = lambda.row(j);
            let mut acc = 0.0;
            for k in 0..d {
                acc += li[k] * lj[k];
            }
            if acc >= epsilon && acc != 0.0 {
                col_indices.push(j);
                values.push(acc);
            }
        }
        row_offsets[i + 1] = col_indices.len();
    }
    let pruned = SparseMatrix::from_raw(n, n, row_offsets, col_indices, values)
        .expect("fused prune produces well-formed CSR");

    let (a_tilde, _) = sym_normalize_with_stats(&pruned, add_self_loops);
    let degrees = if add_self_loops {
        // Degrees of pruned + I, mirroring the normalization path.
        let mut deg = degree_vector(&pruned);
        for v in &mut deg {
            *v += 1.0;
        }
        deg
    } else {
        degree_vector(&pruned)
    };
    let inv_sqrt_deg = degrees
        .iter()
        .map(|&dg| if dg < DEGREE_EPS { 0.0 } else { 1.0 / dg.sqrt() })
        .collect();
    Ok(NormalizedEstimate {
        pruned,
        a_tilde,
        inv_sqrt_deg,
    })
}

/// Reconstruct, prune at `epsilon`, and normalize (no self-loops); returns
/// the estimate and the surviving support for gradient masking.
pub fn build_normalized_estimate(
    factor: &LowRankFactor,
    epsilon: f64,
) -> Result<(SparseMatrix, Vec<(usize, usize)>), TrainError> {
    let est = normalized_estimate(factor, epsilon, false)?;
    let support = est.pruned.triples().map(|(i, j, _)| (i, j)).collect();
    Ok((est.a_tilde, support))
}

/// Squared Frobenius distance between two equally-shaped sparse matrices,
/// exact over the union of supports.
pub fn sim_loss(a: &SparseMatrix, a_tilde: &SparseMatrix) -> f64 {
    assert_eq!(a.n_rows(), a_tilde.n_rows());
    assert_eq!(a.n_cols(), a_tilde.n_cols());
    let mut total = 0.0;
    for i in 0..a.n_rows() {
        let mut left = a.row_iter(i).peekable();
        let mut right = a_tilde.row_iter(i).peekable();
        loop {
            match (left.peek().copied(), right.peek().copied()) {
                (Some((lj, lv)), Some((rj, rv))) => {
                    if lj == rj {
                        let diff = lv - rv;
                        total += diff * diff;
                        left.next();
                        right.next();
                    } else if lj < rj {
                        total += lv * lv;
                        left.next();
                    } else {
                        total += rv * rv;
                        right.next();
                    }
                }
                (Some((_, lv)), None) => {
                    total += lv * lv;
                    left.next();
                }
                (None, Some((_, rv))) => {
                    total += rv * rv;
                    right.next();
                }
                (None, None) => break,
            }
        }
    }
    total
}

/// Squared Frobenius norm of the factor matrix `lambda`.
pub fn fr_loss(factor: &LowRankFactor) -> f64 {
    factor.lambda().frobenius_sq()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_symmetric, sym_normalize};
    use crate::linalg::full_svd_oracle;
    use crate::oracle;

    fn all_ones_csr(n: usize) -> SparseMatrix {
        SparseMatrix::from_triples(
            n,
            n,
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j, 1.0))),
        )
        .unwrap()
    }

    #[test]
    fn coarse_init_rank_one_all_ones() {
        // J4 has spectrum {4, 0, 0, 0}; the rank-1 factor reproduces it exactly.
        let a = all_ones_csr(4);
        let factor = coarse_init(
            &a,
            1,
            &SvdConfig {
                d: 1,
                oversample: 3,
                power_iters: 4,
                seed: 0,
            },
        )
        .unwrap();
        assert!((factor.s()[0] - 4.0).abs() < 1e-9);
        let a_d = reconstruct(&factor).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((a_d.get(i, j) - 1.0).abs() < 1e-9, "({i},{j}) = {}", a_d.get(i, j));
            }
        }
    }

    #[test]
    fn coarse_init_matches_best_rank_two_on_blocks() {
        // Two 4-cliques joined by one edge: rank-2 structure dominates.
        let mut edges = Vec::new();
        for i in 0..4usize {
            for j in (i + 1)..4 {
                edges.push((i, j, 1.0));
                edges.push((i + 4, j + 4, 1.0));
            }
        }
        edges.push((0, 4, 1.0));
        let a = build_symmetric(8, edges).unwrap();
        let factor = coarse_init(
            &a,
            2,
            &SvdConfig {
                d: 2,
                oversample: 4,
                power_iters: 8,
                seed: 3,
            },
        )
        .unwrap();
        let a_d = reconstruct(&factor).unwrap();
        let dense = a.to_dense();
        let mut err = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                err += (dense.get(i, j) - a_d.get(i, j)).powi(2);
            }
        }
        // The unsigned reconstruction can only do as well as the signed
        // optimum when the top eigenvalues are positive, which holds here.
        let best = oracle::best_rank_d_error_sq(&dense, 2);
        assert!(err <= best + 1e-6, "err {err} vs best {best}");
    }

    #[test]
    fn full_rank_psd_reconstruction_is_exact() {
        // Gram matrix of random vectors: PSD, so d = N reconstructs exactly.
        let n = 6;
        let mut g = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    let a = (((i + 1) * (k + 2)) as f64).sin();
                    let b = (((j + 1) * (k + 2)) as f64).sin();
                    acc += a * b;
                }
                g.set(i, j, acc);
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (g.get(i, j) + g.get(j, i));
                g.set(i, j, avg);
                g.set(j, i, avg);
            }
        }
        let a = SparseMatrix::from_dense(&g, 0.0);
        let factor = coarse_init(
            &a,
            n,
            &SvdConfig {
                d: n,
                oversample: 0,
                power_iters: 10,
                seed: 1,
            },
        )
        .unwrap();
        let a_d = reconstruct(&factor).unwrap();
        let mut err = 0.0;
        for i in 0..n {
            for j in 0..n {
                err += (a_d.get(i, j) - g.get(i, j)).powi(2);
            }
        }
        assert!(err.sqrt() < 1e-6, "residual {}", err.sqrt());
    }

    #[test]
    fn reconstruct_column_vector() {
        let factor =
            LowRankFactor::new(DenseMatrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap(), vec![1.0])
                .unwrap();
        let a_d = reconstruct(&factor).unwrap();
        assert_eq!(a_d.data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn reconstruct_zero_factor() {
        let factor =
            LowRankFactor::new(DenseMatrix::zeros(3, 2), vec![2.0, 1.0]).unwrap();
        let a_d = reconstruct(&factor).unwrap();
        assert!(a_d.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reconstruct_matches_elementwise_oracle() {
        let u = DenseMatrix::from_vec(
            6,
            2,
            (0..12).map(|k| ((k * 5 % 7) as f64) * 0.3 - 0.9).collect(),
        )
        .unwrap();
        let factor = LowRankFactor::new(u, vec![2.0, 0.5]).unwrap();
        let a_d = reconstruct(&factor).unwrap();
        let lambda = factor.lambda();
        for i in 0..6 {
            for j in 0..6 {
                let mut want = 0.0;
                for k in 0..2 {
                    want += lambda.get(i, k) * lambda.get(j, k);
                }
                assert!((a_d.get(i, j) - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn prune_thresholds_correctly() {
        let m = DenseMatrix::from_vec(2, 2, vec![1.0, 0.4, 0.4, 1.0]).unwrap();
        let p = prune(&m, 0.5);
        assert_eq!(p.nnz(), 2);
        assert_eq!(p.get(0, 0), 1.0);
        assert_eq!(p.get(1, 1), 1.0);
        assert_eq!(p.get(0, 1), 0.0);
    }

    #[test]
    fn prune_at_zero_drops_negatives() {
        let m = DenseMatrix::from_vec(2, 2, vec![0.5, -0.3, -0.3, 0.0]).unwrap();
        let p = prune(&m, 0.0);
        assert_eq!(p.nnz(), 1);
        assert_eq!(p.get(0, 0), 0.5);
    }

    #[test]
    fn prune_support_is_exact() {
        let n = 9;
        let mut data = Vec::new();
        for k in 0..n * n {
            data.push((((k * 37 + 11) % 100) as f64) / 100.0 - 0.35);
        }
        // Symmetrize to mirror real inputs.
        let mut m = DenseMatrix::from_vec(n, n, data).unwrap();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = m.get(i, j);
                m.set(j, i, v);
            }
        }
        let eps = 0.2;
        let p = prune(&m, eps);
        for i in 0..n {
            for j in 0..n {
                let expect = m.get(i, j) >= eps && m.get(i, j) != 0.0;
                assert_eq!(p.get(i, j) != 0.0, expect, "support mismatch at ({i},{j})");
                if expect {
                    assert_eq!(p.get(i, j), m.get(i, j));
                }
            }
        }
    }

    #[test]
    fn normalized_estimate_rank_one_case() {
        let a = all_ones_csr(4);
        let factor = coarse_init(
            &a,
            1,
            &SvdConfig {
                d: 1,
                oversample: 3,
                power_iters: 4,
                seed: 0,
            },
        )
        .unwrap();
        let (a_tilde, support) = build_normalized_estimate(&factor, 0.5).unwrap();
        assert_eq!(support.len(), 16);
        for i in 0..4 {
            for j in 0..4 {
                assert!((a_tilde.get(i, j) - 0.25).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normalized_estimate_empty_when_epsilon_huge() {
        let a = all_ones_csr(3);
        let factor = coarse_init(
            &a,
            1,
            &SvdConfig {
                d: 1,
                oversample: 2,
                power_iters: 2,
                seed: 0,
            },
        )
        .unwrap();
        let (a_tilde, support) = build_normalized_estimate(&factor, 1e12).unwrap();
        assert_eq!(a_tilde.nnz(), 0);
        assert!(support.is_empty());
    }

    #[test]
    fn fused_estimate_matches_composed_pipeline() {
        let u = DenseMatrix::from_vec(
            5,
            2,
            (0..10).map(|k| ((k * 3 % 11) as f64) * 0.2 - 0.8).collect(),
        )
        .unwrap();
        let factor = LowRankFactor::new(u, vec![1.5, 0.7]).unwrap();
        let eps = 0.05;
        let est = normalized_estimate(&factor, eps, false).unwrap();
        let composed = sym_normalize(&prune(&reconstruct(&factor).unwrap(), eps), false);
        assert_eq!(est.a_tilde, composed);
        assert!(est.a_tilde.is_symmetric());
    }

    #[test]
    fn sim_loss_zero_on_equal() {
        let a = build_symmetric(3, vec![(0, 1, 1.0), (1, 2, 0.5)]).unwrap();
        assert_eq!(sim_loss(&a, &a), 0.0);
    }

    #[test]
    fn sim_loss_single_entry_counts_twice() {
        let empty = SparseMatrix::empty(3, 3);
        let single = build_symmetric(3, vec![(0, 2, 0.7)]).unwrap();
        let want = 2.0 * 0.7 * 0.7;
        assert!((sim_loss(&empty, &single) - want).abs() < 1e-15);
    }

    #[test]
    fn sim_loss_matches_dense_oracle() {
        let a = build_symmetric(6, vec![(0, 1, 1.0), (2, 3, 2.0), (1, 4, 0.3)]).unwrap();
        let b = build_symmetric(6, vec![(0, 1, 0.5), (2, 5, 1.0), (1, 4, 0.3)]).unwrap();
        let da = a.to_dense();
        let db = b.to_dense();
        let mut want = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                want += (da.get(i, j) - db.get(i, j)).powi(2);
            }
        }
        assert!((sim_loss(&a, &b) - want).abs() < 1e-12);
    }

    #[test]
    fn fr_loss_orthonormal_column() {
        let a = all_ones_csr(4);
        let factor = coarse_init(
            &a,
            1,
            &SvdConfig {
                d: 1,
                oversample: 3,
                power_iters: 4,
                seed: 0,
            },
        )
        .unwrap();
        assert!((fr_loss(&factor) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn fr_loss_zero_factor() {
        let factor = LowRankFactor::new(DenseMatrix::zeros(4, 2), vec![3.0, 1.0]).unwrap();
        assert_eq!(fr_loss(&factor), 0.0);
    }

    #[test]
    fn fr_loss_matches_columnwise_identity() {
        let u = DenseMatrix::from_vec(
            5,
            3,
            (0..15).map(|k| ((k * 7 % 13) as f64) * 0.1 - 0.6).collect(),
        )
        .unwrap();
        let s = vec![2.5, 1.0, 0.25];
        let factor = LowRankFactor::new(u.clone(), s.clone()).unwrap();
        let mut want = 0.0;
        for (k, &sk) in s.iter().enumerate() {
            let col_norm_sq: f64 = (0..5).map(|i| u.get(i, k) * u.get(i, k)).sum();
            want += sk * col_norm_sq;
        }
        assert!((fr_loss(&factor) - want).abs() < 1e-12);
    }

    #[test]
    fn rank_of_reconstruction_bounded_by_d() {
        let a = oracle::gapped_symmetric_csr(12, 3, 9);
        let factor = coarse_init(
            &a,
            3,
            &SvdConfig {
                d: 3,
                oversample: 6,
                power_iters: 8,
                seed: 5,
            },
        )
        .unwrap();
        let a_d = reconstruct(&factor).unwrap();
        assert!(oracle::numerical_rank(&a_d, 1e-8) <= 3);
    }

    #[test]
    fn reconstruct_rejects_oversized() {
        let factor = LowRankFactor::empty(DENSE_CAP + 1);
        assert!(matches!(
            reconstruct(&factor).unwrap_err(),
            TrainError::TooLarge { .. }
        ));
    }

    #[test]
    fn svd_reconstruction_error_close_to_oracle_optimum() {
        let d = 4;
        let a = oracle::gapped_symmetric_csr(30, d, 21);
        let dense = a.to_dense();
        let factor = coarse_init(&a, d, &SvdConfig::new(d, 2)).unwrap();
        let a_d = reconstruct(&factor).unwrap();
        let mut err = 0.0;
        for i in 0..30 {
            for j in 0..30 {
                err += (dense.get(i, j) - a_d.get(i, j)).powi(2);
            }
        }
        let best = oracle::best_rank_d_error_sq(&dense, d);
        assert!(err <= best * (1.0 + 1e-3) + 1e-12, "err {err}, best {best}");
        let _ = full_svd_oracle(&dense).unwrap();
    }
}
