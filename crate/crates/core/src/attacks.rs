//! Poisoning structural attacks for evaluation: random edge injection and a
//! label-aware delete-internal/connect-external heuristic.

use std::collections::HashSet;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_symmetric, GraphError, SparseMatrix};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("requested {requested} new edges but only {available} absent pairs exist")]
    TooDense { requested: usize, available: usize },
    #[error("node {node} is unlabeled; the label-aware attack needs full labels")]
    MissingLabel { node: usize },
    #[error("attack rate must be finite and >= 0, got {0}")]
    BadRate(f64),
}

/// Which structural attack to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Random,
    Dice,
}

impl FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(AttackKind::Random),
            "dice" => Ok(AttackKind::Dice),
            other => Err(format!("unknown attack kind '{other}' (expected random|dice)")),
        }
    }
}

/// A fully specified attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Fraction of the undirected edge count to perturb; may exceed 1.
    pub rate: f64,
    pub seed: u64,
}

fn check_rate(rate: f64) -> Result<(), AttackError> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(AttackError::BadRate(rate));
    }
    Ok(())
}

/// Inject `floor(rate * |E|)` new undirected unit-weight edges, chosen
/// uniformly among absent pairs. Existing edges are never touched.
pub fn random_attack(a: &SparseMatrix, rate: f64, seed: u64) -> Result<SparseMatrix, AttackError> {
    check_rate(rate)?;
    let n = a.n_rows();
    let mut edges = a.undirected_edges();
    let edge_count = edges.len();
    let budget = (rate * edge_count as f64).floor() as usize;
    if budget == 0 {
        return Ok(a.clone());
    }
    let total_pairs = n * (n - 1) / 2;
    let available = total_pairs - edge_count;
    if budget > available {
        return Err(AttackError::TooDense {
            requested: budget,
            available,
        });
    }

    let mut present: HashSet<(usize, usize)> =
        edges.iter().map(|&(i, j, _)| (i, j)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed = 0usize;
    let mut attempts = 0usize;
    let attempt_cap = 50 * budget + 10_000;
    while placed < budget && attempts < attempt_cap {
        attempts += 1;
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let pair = if i < j { (i, j) } else { (j, i) };
        if present.insert(pair) {
            edges.push((pair.0, pair.1, 1.0));
            placed += 1;
        }
    }
    if placed < budget {
        // Dense graph: rejection sampling stalled, fall back to enumerating
        // the complement and sampling without replacement.
        let mut absent: Vec<(usize, usize)> = Vec::with_capacity(available);
        for i in 0..n {
            for j in (i + 1)..n {
                if !present.contains(&(i, j)) {
                    absent.push((i, j));
                }
            }
        }
        while placed < budget {
            let pick = rng.random_range(0..absent.len());
            let pair = absent.swap_remove(pick);
            present.insert(pair);
            edges.push((pair.0, pair.1, 1.0));
            placed += 1;
        }
    }
    Ok(build_symmetric(n, edges)?)
}

/// Label-aware heuristic attack: each budget unit flips a fair coin to either
/// delete a random intra-class edge or insert a random absent inter-class
/// edge. Exhausted move types fall back to the other; the attack stops early
/// only when both are exhausted.
pub fn dice_attack(
    a: &SparseMatrix,
    labels: &[Option<usize>],
    rate: f64,
    seed: u64,
) -> Result<SparseMatrix, AttackError> {
    check_rate(rate)?;
    let n = a.n_rows();
    for (node, label) in labels.iter().enumerate().take(n) {
        if label.is_none() {
            return Err(AttackError::MissingLabel { node });
        }
    }
    let label_of = |node: usize| labels[node].expect("checked above");

    let mut kept: HashSet<(usize, usize)> = HashSet::new();
    let mut intra: Vec<(usize, usize)> = Vec::new();
    let mut inter_present = 0usize;
    for (i, j, _) in a.undirected_edges() {
        kept.insert((i, j));
        if label_of(i) == label_of(j) {
            intra.push((i, j));
        } else {
            inter_present += 1;
        }
    }
    let edge_count = kept.len();
    let budget = (rate * edge_count as f64).floor() as usize;
    if budget == 0 {
        return Ok(a.clone());
    }

    // Count absent inter-class pairs to detect insertion exhaustion.
    let mut class_sizes: Vec<usize> = Vec::new();
    for node in 0..n {
        let c = label_of(node);
        if c >= class_sizes.len() {
            class_sizes.resize(c + 1, 0);
        }
        class_sizes[c] += 1;
    }
    let mut inter_total = 0usize;
    for (ci, &a_size) in class_sizes.iter().enumerate() {
        for &b_size in class_sizes.iter().skip(ci + 1) {
            inter_total += a_size * b_size;
        }
    }
    let mut inter_absent = inter_total - inter_present;

    let mut added: HashSet<(usize, usize)> = HashSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spent = 0usize;
    while spent < budget {
        let can_delete = !intra.is_empty();
        let can_insert = inter_absent > 0;
        if !can_delete && !can_insert {
            break;
        }
        let delete = if can_delete && can_insert {
            rng.random_range(0..2u32) == 0
        } else {
            can_delete
        };
        if delete {
            let pick = rng.random_range(0..intra.len());
            let edge = intra.swap_remove(pick);
            kept.remove(&edge);
            spent += 1;
        } else {
            // Rejection-sample an absent inter-class pair.
            loop {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                if i == j || label_of(i) == label_of(j) {
                    continue;
                }
                let pair = if i < j { (i, j) } else { (j, i) };
                if kept.contains(&pair) || added.contains(&pair) {
                    continue;
                }
                added.insert(pair);
                inter_absent -= 1;
                spent += 1;
                break;
            }
        }
    }

    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(kept.len() + added.len());
    for (i, j, w) in a.undirected_edges() {
        if kept.contains(&(i, j)) {
            edges.push((i, j, w));
        }
    }
    for &(i, j) in &added {
        edges.push((i, j, 1.0));
    }
    Ok(build_symmetric(n, edges)?)
}

/// Edge-level diff between two same-shape adjacency matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub added: usize,
    pub removed: usize,
    /// (added + removed) / |E_before|.
    pub rate: f64,
}

/// Count the undirected support difference and the effective rate.
pub fn perturbation_report(before: &SparseMatrix, after: &SparseMatrix) -> PerturbationReport {
    assert_eq!(before.n_rows(), after.n_rows());
    assert_eq!(before.n_cols(), after.n_cols());
    let before_set: HashSet<(usize, usize)> = before
        .undirected_edges()
        .into_iter()
        .map(|(i, j, _)| (i, j))
        .collect();
    let after_set: HashSet<(usize, usize)> = after
        .undirected_edges()
        .into_iter()
        .map(|(i, j, _)| (i, j))
        .collect();
    let added = after_set.difference(&before_set).count();
    let removed = before_set.difference(&after_set).count();
    let rate = if before_set.is_empty() {
        0.0
    } else {
        (added + removed) as f64 / before_set.len() as f64
    };
    PerturbationReport {
        added,
        removed,
        rate,
    }
}

/// Run an [`AttackSpec`]. The label slice is only consulted by the
/// label-aware kind.
pub fn run_attack(
    a: &SparseMatrix,
    labels: &[Option<usize>],
    spec: &AttackSpec,
) -> Result<SparseMatrix, AttackError> {
    match spec.kind {
        AttackKind::Random => random_attack(a, spec.rate, spec.seed),
        AttackKind::Dice => dice_attack(a, labels, spec.rate, spec.seed),
    }
}
