//! Adam (classic L2-coupled weight decay) and SGD with momentum.

use crate::graph::DenseMatrix;

/// Adam accumulators for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: DenseMatrix,
    pub v: DenseMatrix,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            m: DenseMatrix::zeros(rows, cols),
            v: DenseMatrix::zeros(rows, cols),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update. Weight decay enters as an L2 term added to the gradient.
pub fn adam_step(
    params: &mut DenseMatrix,
    grads: &DenseMatrix,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) {
    assert_eq!(params.n_rows(), grads.n_rows());
    assert_eq!(params.n_cols(), grads.n_cols());
    state.step += 1;
    let b1 = state.beta1;
    let b2 = state.beta2;
    let bias1 = 1.0 - b1.powi(state.step as i32);
    let bias2 = 1.0 - b2.powi(state.step as i32);
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    let p = params.data_mut();
    for idx in 0..p.len() {
        let g = grads.data()[idx] + weight_decay * p[idx];
        m[idx] = b1 * m[idx] + (1.0 - b1) * g;
        v[idx] = b2 * v[idx] + (1.0 - b2) * g * g;
        let m_hat = m[idx] / bias1;
        let v_hat = v[idx] / bias2;
        p[idx] -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
}

/// Velocity buffer for SGD with momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub velocity: DenseMatrix,
}

impl MomentumState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            velocity: DenseMatrix::zeros(rows, cols),
        }
    }
}

/// One heavy-ball update: `v <- momentum * v + g; p <- p - lr * v`.
pub fn sgd_momentum_step(
    params: &mut DenseMatrix,
    grads: &DenseMatrix,
    state: &mut MomentumState,
    lr: f64,
    momentum: f64,
) {
    assert_eq!(params.n_rows(), grads.n_rows());
    assert_eq!(params.n_cols(), grads.n_cols());
    let v = state.velocity.data_mut();
    let p = params.data_mut();
    for idx in 0..p.len() {
        v[idx] = momentum * v[idx] + grads.data()[idx];
        p[idx] -= lr * v[idx];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::scalar_adam_step;

    #[test]
    fn adam_zero_gradient_zero_decay_is_identity() {
        let mut p = DenseMatrix::from_vec(1, 2, vec![1.5, -2.0]).unwrap();
        let g = DenseMatrix::zeros(1, 2);
        let mut st = AdamState::new(1, 2);
        let before = p.clone();
        adam_step(&mut p, &g, &mut st, 1e-2, 0.0);
        assert_eq!(p, before);
    }

    #[test]
    fn adam_moves_against_constant_gradient() {
        let mut p = DenseMatrix::from_vec(1, 1, vec![0.0]).unwrap();
        let g = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let mut st = AdamState::new(1, 1);
        for _ in 0..50 {
            adam_step(&mut p, &g, &mut st, 1e-2, 0.0);
        }
        assert!(p.get(0, 0) < 0.0);
    }

    #[test]
    fn adam_single_step_matches_scalar_oracle() {
        let mut p = DenseMatrix::from_vec(1, 1, vec![0.7]).unwrap();
        let g = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let mut st = AdamState::new(1, 1);
        adam_step(&mut p, &g, &mut st, 1e-2, 5e-4);
        let (want, (m, v, t)) = scalar_adam_step(0.7, 1.0, (0.0, 0.0, 0), 1e-2, 5e-4);
        assert!((p.get(0, 0) - want).abs() < 1e-15);
        assert!((st.m.get(0, 0) - m).abs() < 1e-15);
        assert!((st.v.get(0, 0) - v).abs() < 1e-15);
        assert_eq!(st.step, t);
        // The very first step moves by almost exactly lr against the gradient.
        assert!((p.get(0, 0) - (0.7 - 1e-2 / (1.0 + 1e-8 / (1.0f64 - 0.999f64).sqrt()))).abs() < 1e-6);
    }

    #[test]
    fn sgd_zero_everything_is_identity() {
        let mut p = DenseMatrix::from_vec(1, 1, vec![3.0]).unwrap();
        let g = DenseMatrix::zeros(1, 1);
        let mut st = MomentumState::new(1, 1);
        sgd_momentum_step(&mut p, &g, &mut st, 0.1, 0.9);
        assert_eq!(p.get(0, 0), 3.0);
    }

    #[test]
    fn sgd_two_steps_accumulate_momentum() {
        let mut p = DenseMatrix::from_vec(1, 1, vec![0.0]).unwrap();
        let g = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let mut st = MomentumState::new(1, 1);
        sgd_momentum_step(&mut p, &g, &mut st, 0.1, 0.9);
        sgd_momentum_step(&mut p, &g, &mut st, 0.1, 0.9);
        // -0.1 * 1 - 0.1 * 1.9 = -0.29
        assert!((p.get(0, 0) + 0.29).abs() < 1e-15);
    }

    #[test]
    fn velocity_decays_geometrically_without_gradient() {
        let mut p = DenseMatrix::from_vec(1, 1, vec![0.0]).unwrap();
        let g1 = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let g0 = DenseMatrix::zeros(1, 1);
        let mut st = MomentumState::new(1, 1);
        sgd_momentum_step(&mut p, &g1, &mut st, 0.1, 0.9);
        let mut v_prev = st.velocity.get(0, 0);
        for _ in 0..5 {
            sgd_momentum_step(&mut p, &g0, &mut st, 0.1, 0.9);
            let v = st.velocity.get(0, 0);
            assert!((v - 0.9 * v_prev).abs() < 1e-15);
            v_prev = v;
        }
    }
}
