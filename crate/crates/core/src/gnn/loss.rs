//! Cross-entropy over labeled nodes and argmax accuracy.

use serde::{Deserialize, Serialize};

use super::GnnError;
use crate::graph::DenseMatrix;

/// Whether the labeled-node cross-entropy is averaged or summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CeMode {
    #[default]
    Mean,
    Sum,
}

/// Probability floor applied before taking logs.
pub const PROB_FLOOR: f64 = 1e-15;

/// Cross-entropy of the predicted probabilities against the labels on the
/// masked nodes. Every masked node must be labeled.
pub fn cross_entropy(
    p: &DenseMatrix,
    labels: &[Option<usize>],
    mask: &[usize],
    mode: CeMode,
) -> Result<f64, GnnError> {
    cross_entropy_with_stats(p, labels, mask, mode).map(|(loss, _)| loss)
}

/// As [`cross_entropy`], also reporting how many probabilities had to be
/// clamped to the floor.
pub fn cross_entropy_with_stats(
    p: &DenseMatrix,
    labels: &[Option<usize>],
    mask: &[usize],
    mode: CeMode,
) -> Result<(f64, usize), GnnError> {
    let mut total = 0.0;
    let mut clamped = 0usize;
    for &node in mask {
        let label = labels
            .get(node)
            .copied()
            .flatten()
            .ok_or(GnnError::UnlabeledInMask { node })?;
        let mut prob = p.get(node, label);
        if prob <= 0.0 || prob < PROB_FLOOR {
            prob = PROB_FLOOR;
            clamped += 1;
        }
        total -= prob.ln();
    }
    let loss = match mode {
        CeMode::Sum => total,
        CeMode::Mean => {
            if mask.is_empty() {
                0.0
            } else {
                total / mask.len() as f64
            }
        }
    };
    Ok((loss, clamped))
}

/// Fraction of nodes in `ids` whose argmax prediction matches the label.
/// Ties pick the lowest class index. Every node must be labeled.
pub fn accuracy(p: &DenseMatrix, labels: &[Option<usize>], ids: &[usize]) -> Result<f64, GnnError> {
    if ids.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for &node in ids {
        let label = labels
            .get(node)
            .copied()
            .flatten()
            .ok_or(GnnError::UnlabeledInMask { node })?;
        let row = p.row(node);
        let mut best = 0usize;
        let mut best_val = row[0];
        for (c, &v) in row.iter().enumerate().skip(1) {
            if v > best_val {
                best_val = v;
                best = c;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / ids.len() as f64)
}
