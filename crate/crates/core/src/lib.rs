//! Robust semi-supervised node classification under structural attacks.
//!
//! The defense learns a low-rank, sparse estimate of the adjacency matrix as
//! the product of a learnable singular-vector factor and a frozen spectrum,
//! jointly with a two-layer graph convolutional classifier:
//!
//! - [`graph`]: CSR adjacency storage, dense matrices, degrees, symmetric
//!   normalization;
//! - [`linalg`]: sparse-dense products, a Jacobi eigensolver reference, and
//!   a randomized truncated SVD;
//! - [`gnn`]: the classifier, hand-derived gradients, Adam and momentum SGD;
//! - [`estimator`]: factor initialization, reconstruction, weak-edge
//!   pruning, the joint objective, and the alternating trainer, plus the
//!   plain-GCN and SVD-preprocessing baselines;
//! - [`attacks`]: random edge injection and a label-aware edge-flip attack;
//! - [`dataio`]: dataset files, manifests, checkpoints;
//! - [`synth`]: stochastic block model generator for benchmarks;
//! - [`oracle`]: naive reference implementations used by the test suites.

pub mod attacks;
pub mod dataio;
pub mod estimator;
pub mod gnn;
pub mod graph;
pub mod linalg;
pub mod oracle;
pub mod synth;
