//! Synthetic benchmark graphs: a stochastic block model with planted
//! communities, the controllable testbed used throughout the test suites.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{build_symmetric, Features, SparseGraph};

/// Stochastic block model parameters. Nodes are assigned to blocks in
/// contiguous runs; labels are the block indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbmConfig {
    pub n_nodes: usize,
    pub n_blocks: usize,
    /// Edge probability within a block.
    pub p_in: f64,
    /// Edge probability across blocks.
    pub p_out: f64,
    pub seed: u64,
}

/// Sample an SBM graph with identity features and fully observed labels.
pub fn sbm(cfg: &SbmConfig) -> SparseGraph {
    assert!(cfg.n_blocks >= 1 && cfg.n_nodes >= cfg.n_blocks);
    assert!((0.0..=1.0).contains(&cfg.p_in) && (0.0..=1.0).contains(&cfg.p_out));
    let block_of = |node: usize| node * cfg.n_blocks / cfg.n_nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut edges = Vec::new();
    for i in 0..cfg.n_nodes {
        for j in (i + 1)..cfg.n_nodes {
            let p = if block_of(i) == block_of(j) {
                cfg.p_in
            } else {
                cfg.p_out
            };
            if rng.random_range(0.0..1.0) < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    let adjacency = build_symmetric(cfg.n_nodes, edges).expect("generated edges are in range");
    let labels = (0..cfg.n_nodes).map(|i| Some(block_of(i))).collect();
    SparseGraph::new(adjacency, Features::Identity, labels, cfg.n_blocks)
        .expect("generated graph is well-formed")
}
