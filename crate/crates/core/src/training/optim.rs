//! First-order optimizers over a flat list of parameter tensors.

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

fn check(params: &[Tensor], grads: &[Tensor], lr: f64) -> Result<(), TrainError> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(TrainError::InvalidConfig(format!("learning rate must be positive, got {lr}")));
    }
    if params.len() != grads.len() {
        return Err(TrainError::InvalidConfig(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(TrainError::InvalidConfig(format!(
                "gradient {i} has shape {:?}, parameter has {:?}",
                g.shape(),
                p.shape()
            )));
        }
        if !g.all_finite() {
            return Err(TrainError::NonFiniteGradient { index: i });
        }
    }
    Ok(())
}

/// `p <- p - lr * g`. Nothing is modified when any gradient is non-finite.
pub fn sgd_step(params: &mut [Tensor], grads: &[Tensor], lr: f64) -> Result<(), TrainError> {
    check(params, grads, lr)?;
    for (p, g) in params.iter_mut().zip(grads) {
        p.add_scaled(g, -lr);
    }
    Ok(())
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }
}

/// Bias-corrected Adam update. A rejected step leaves parameters and
/// state untouched.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), TrainError> {
    check(params, grads, lr)?;
    if state.m.len() != params.len() || state.m.iter().zip(params.iter()).any(|(m, p)| m.shape() != p.shape()) {
        return Err(TrainError::InvalidConfig("adam moments do not match parameters".into()));
    }
    state.t += 1;
    let c1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        let pd = p.data_mut();
        let (md, vd) = (m.data_mut(), v.data_mut());
        for (i, &gi) in g.data().iter().enumerate() {
            md[i] = ADAM_BETA1 * md[i] + (1.0 - ADAM_BETA1) * gi;
            vd[i] = ADAM_BETA2 * vd[i] + (1.0 - ADAM_BETA2) * gi * gi;
            let m_hat = md[i] / c1;
            let v_hat = vd[i] / c2;
            pd[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
    Ok(())
}

/// Optimizer plus whatever state it carries.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, state: AdamState },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: &[Tensor]) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                state: AdamState::new(params),
            },
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), TrainError> {
        match self {
            Optimizer::Sgd { lr } => sgd_step(params, grads, *lr),
            Optimizer::Adam { lr, state } => adam_step(params, grads, state, *lr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Vec<Tensor> {
        vec![Tensor::vector(vec![v])]
    }

    #[test]
    fn sgd_examples() {
        let mut p = s(1.0);
        sgd_step(&mut p, &s(2.0), 0.01).unwrap();
        assert!((p[0].item() - 0.98).abs() < 1e-15);
        let mut q = s(1.0);
        sgd_step(&mut q, &s(0.0), 0.01).unwrap();
        assert_eq!(q[0].item(), 1.0);
    }

    #[test]
    fn sgd_is_linear_in_lr() {
        let g = vec![Tensor::vector(vec![0.3, -1.7, 4.0])];
        let p0 = vec![Tensor::vector(vec![1.0, 2.0, -3.0])];
        let (mut a, mut b) = (p0.clone(), p0.clone());
        sgd_step(&mut a, &g, 2e-3).unwrap();
        sgd_step(&mut b, &g, 1e-3).unwrap();
        for i in 0..3 {
            let da = a[0].data()[i] - p0[0].data()[i];
            let db = b[0].data()[i] - p0[0].data()[i];
            assert!((da - 2.0 * db).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut p = vec![Tensor::vector(vec![0.0, 0.0, 0.0])];
        let g = vec![Tensor::vector(vec![3.0, -0.02, 1e3])];
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, 1e-3).unwrap();
        for (pi, gi) in p[0].data().iter().zip(g[0].data()) {
            assert!((pi + 1e-3 * gi.signum()).abs() < 1e-8, "{pi}");
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut p = vec![Tensor::vector(vec![0.5, -2.0])];
        let mut st = AdamState::new(&p);
        for _ in 0..100 {
            adam_step(&mut p, &[Tensor::zeros(&[2])], &mut st, 0.1).unwrap();
        }
        assert_eq!(p[0].data(), &[0.5, -2.0]);
    }

    #[test]
    fn non_finite_gradients_are_rejected_without_side_effects() {
        let mut p = vec![Tensor::vector(vec![1.0]), Tensor::vector(vec![2.0])];
        let g = vec![Tensor::vector(vec![1.0]), Tensor::vector(vec![f64::NAN])];
        let mut st = AdamState::new(&p);
        assert!(matches!(
            adam_step(&mut p, &g, &mut st, 0.1),
            Err(TrainError::NonFiniteGradient { index: 1 })
        ));
        assert_eq!(st.t, 0);
        assert_eq!(p[0].item(), 1.0);
        assert!(sgd_step(&mut p, &g, 0.1).is_err());
        assert_eq!(p[0].item(), 1.0);
        assert!(sgd_step(&mut p, &g[..1], -0.1).is_err());
    }
}
