//! Thin QR via Householder reflections.

use crate::graph::DenseMatrix;

/// Orthonormal basis for the column span of `m` (n x k, k <= n), returned as
/// an n x k matrix with orthonormal columns.
///
/// Rank-deficient inputs are handled by skipping the zero-norm reflector;
/// the affected columns still come out orthonormal, they just no longer span
/// anything meaningful, which downstream spectral code treats as padding.
pub fn householder_qr(m: &DenseMatrix) -> DenseMatrix {
    let n = m.n_rows();
    let k = m.n_cols();
    assert!(k <= n, "householder_qr expects a tall matrix, got {n}x{k}");

    // Reflectors are accumulated in-place over a working copy.
    let mut w = m.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v: Vec<f64> = (j..n).map(|i| w.get(i, j)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            reflectors.push(Vec::new());
            continue;
        }
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * norm;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm < 1e-300 {
            reflectors.push(Vec::new());
            continue;
        }
        for x in &mut v {
            *x /= vnorm;
        }
        for col in j..k {
            let mut dot = 0.0;
            for (offset, vi) in v.iter().enumerate() {
                dot += vi * w.get(j + offset, col);
            }
            let dot2 = 2.0 * dot;
            for (offset, vi) in v.iter().enumerate() {
                let cur = w.get(j + offset, col);
                w.set(j + offset, col, cur - dot2 * vi);
            }
        }
        reflectors.push(v);
    }

    // Apply reflectors in reverse to the first k identity columns.
    let mut q = DenseMatrix::zeros(n, k);
    for j in 0..k {
        q.set(j, j, 1.0);
    }
    for j in (0..k).rev() {
        let v = &reflectors[j];
        if v.is_empty() {
            continue;
        }
        for col in 0..k {
            let mut dot = 0.0;
            for (offset, vi) in v.iter().enumerate() {
                dot += vi * q.get(j + offset, col);
            }
            let dot2 = 2.0 * dot;
            for (offset, vi) in v.iter().enumerate() {
                let cur = q.get(j + offset, col);
                q.set(j + offset, col, cur - dot2 * vi);
            }
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_ortho_defect(q: &DenseMatrix) -> f64 {
        let k = q.n_cols();
        let mut worst = 0.0f64;
        for a in 0..k {
            for b in 0..k {
                let dot: f64 = (0..q.n_rows()).map(|i| q.get(i, a) * q.get(i, b)).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    #[test]
    fn q_is_orthonormal() {
        let m = DenseMatrix::from_vec(
            5,
            3,
            (0..15).map(|i| ((i * 13 % 7) as f64) - 3.0).collect(),
        )
        .unwrap();
        let q = householder_qr(&m);
        assert!(max_ortho_defect(&q) < 1e-12);
    }

    #[test]
    fn q_spans_input_columns() {
        let m = DenseMatrix::from_vec(4, 2, vec![1.0, 0.0, 1.0, 1.0, 0.0, 2.0, 1.0, 1.0]).unwrap();
        let q = householder_qr(&m);
        // Project each input column onto span(Q); the residual must vanish.
        for col in 0..2 {
            let x: Vec<f64> = (0..4).map(|i| m.get(i, col)).collect();
            let mut residual = x.clone();
            for b in 0..2 {
                let dot: f64 = (0..4).map(|i| q.get(i, b) * x[i]).sum();
                for (i, r) in residual.iter_mut().enumerate() {
                    *r -= dot * q.get(i, b);
                }
            }
            let res_norm: f64 = residual.iter().map(|r| r * r).sum::<f64>().sqrt();
            assert!(res_norm < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_input_still_orthonormal() {
        // Second column is a multiple of the first.
        let m = DenseMatrix::from_vec(4, 2, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap();
        let q = householder_qr(&m);
        assert!(max_ortho_defect(&q) < 1e-12);
    }
}
