//! Neural arithmetic logic unit.
//!
//! ```text
//! a = W x
//! m = exp(W log(|x| + eps))
//! g = sigmoid(G x)
//! y = g * a + (1 - g) * m
//! ```
//!
//! Both paths read the same effective `W` unless the untied ablation is
//! requested, in which case the multiplicative path owns a second NAC.

use super::nac::{nac_effective_weights, NacParams};
use super::params::{join, ParamTree};
use super::{linear, LayerError};
use crate::autodiff::{Tape, Var};
use crate::tensor::Tensor;

pub const DEFAULT_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct NaluParams<T = Tensor> {
    pub nac: NacParams<T>,
    /// Gate matrix, `out x in`.
    pub g_mat: T,
    /// Separate multiplicative-path weights; `None` means tied.
    pub mul_nac: Option<NacParams<T>>,
    pub epsilon: f64,
}

impl<T> ParamTree for NaluParams<T> {
    type Elem = T;
    type Mapped<U> = NaluParams<U>;

    fn map_named<U>(&self, prefix: &str, f: &mut dyn FnMut(&str, &T) -> U) -> NaluParams<U> {
        NaluParams {
            nac: self.nac.map_named(&join(prefix, "nac"), f),
            g_mat: f(&join(prefix, "g_mat"), &self.g_mat),
            mul_nac: self.mul_nac.map_named(&join(prefix, "mul_nac"), f),
            epsilon: self.epsilon,
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut T)) {
        self.nac.visit_mut(&join(prefix, "nac"), f);
        f(&join(prefix, "g_mat"), &mut self.g_mat);
        self.mul_nac.visit_mut(&join(prefix, "mul_nac"), f);
    }
}

/// Intermediate values of one NALU evaluation.
#[derive(Debug, Clone, Copy)]
pub struct NaluTrace {
    pub additive: Var,
    pub multiplicative: Var,
    pub gate: Var,
    pub output: Var,
}

fn ensure_finite(tape: &Tape, v: Var, path: &'static str) -> Result<(), LayerError> {
    if tape.value(v).all_finite() {
        Ok(())
    } else {
        Err(LayerError::NonFinite { path })
    }
}

pub fn nalu_trace(tape: &mut Tape, p: &NaluParams<Var>, x: Var) -> Result<NaluTrace, LayerError> {
    if !(p.epsilon > 0.0) {
        return Err(LayerError::InvalidConfig(format!(
            "epsilon must be positive, got {}",
            p.epsilon
        )));
    }
    let w = nac_effective_weights(tape, &p.nac)?;
    let a = linear(tape, w, x)?;
    ensure_finite(tape, a, "additive")?;

    let w_mul = match &p.mul_nac {
        Some(untied) => nac_effective_weights(tape, untied)?,
        None => w,
    };
    let abs = tape.abs(x)?;
    let shifted = tape.add_scalar(abs, p.epsilon)?;
    let log = tape.log(shifted)?;
    let log_m = linear(tape, w_mul, log)?;
    let m = tape.exp(log_m)?;
    ensure_finite(tape, m, "multiplicative")?;

    let gx = linear(tape, p.g_mat, x)?;
    let g = tape.sigmoid(gx)?;
    ensure_finite(tape, g, "gate")?;

    // g*a + (1-g)*m == m + g*(a - m)
    let diff = tape.sub(a, m)?;
    let gated = tape.mul(g, diff)?;
    let y = tape.add(m, gated)?;
    Ok(NaluTrace {
        additive: a,
        multiplicative: m,
        gate: g,
        output: y,
    })
}

pub fn nalu_forward(tape: &mut Tape, p: &NaluParams<Var>, x: Var) -> Result<Var, LayerError> {
    nalu_trace(tape, p, x).map(|t| t.output)
}
