use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::tape::{Tape, Var};
use super::unary::UnaryFn;
use crate::error::AutodiffError;

/// Initial value of the learnable PReLU slope.
pub const PRELU_INIT: f64 = 0.25;

/// The hidden-layer nonlinearities compared in the identity and static
/// arithmetic experiments. `Identity` is the linear ("None") baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Hardtanh,
    Relu6,
    Softsign,
    Tanh,
    Sigmoid,
    Threshold,
    Selu,
    Elu,
    Relu,
    Crelu,
    LeakyRelu,
    Tanhshrink,
    Softplus,
    Prelu,
    Softshrink,
    Identity,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 16] = [
        ActivationKind::Hardtanh,
        ActivationKind::Relu6,
        ActivationKind::Softsign,
        ActivationKind::Tanh,
        ActivationKind::Sigmoid,
        ActivationKind::Threshold,
        ActivationKind::Selu,
        ActivationKind::Elu,
        ActivationKind::Relu,
        ActivationKind::Crelu,
        ActivationKind::LeakyRelu,
        ActivationKind::Tanhshrink,
        ActivationKind::Softplus,
        ActivationKind::Prelu,
        ActivationKind::Softshrink,
        ActivationKind::Identity,
    ];

    /// Output width for an input of width `n`.
    pub fn output_width(self, n: usize) -> usize {
        if self == ActivationKind::Crelu {
            2 * n
        } else {
            n
        }
    }

    pub fn has_slope(self) -> bool {
        self == ActivationKind::Prelu
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Hardtanh => "hardtanh",
            ActivationKind::Relu6 => "relu6",
            ActivationKind::Softsign => "softsign",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Threshold => "threshold",
            ActivationKind::Selu => "selu",
            ActivationKind::Elu => "elu",
            ActivationKind::Relu => "relu",
            ActivationKind::Crelu => "crelu",
            ActivationKind::LeakyRelu => "leakyrelu",
            ActivationKind::Tanhshrink => "tanhshrink",
            ActivationKind::Softplus => "softplus",
            ActivationKind::Prelu => "prelu",
            ActivationKind::Softshrink => "softshrink",
            ActivationKind::Identity => "identity",
        }
    }

    fn unary(self) -> Option<UnaryFn> {
        Some(match self {
            ActivationKind::Hardtanh => UnaryFn::Hardtanh,
            ActivationKind::Relu6 => UnaryFn::Relu6,
            ActivationKind::Softsign => UnaryFn::Softsign,
            ActivationKind::Tanh => UnaryFn::Tanh,
            ActivationKind::Sigmoid => UnaryFn::Sigmoid,
            ActivationKind::Threshold => UnaryFn::Threshold,
            ActivationKind::Selu => UnaryFn::Selu,
            ActivationKind::Elu => UnaryFn::Elu,
            ActivationKind::Relu => UnaryFn::Relu,
            ActivationKind::LeakyRelu => UnaryFn::LeakyRelu,
            ActivationKind::Tanhshrink => UnaryFn::Tanhshrink,
            ActivationKind::Softplus => UnaryFn::Softplus,
            ActivationKind::Softshrink => UnaryFn::Softshrink,
            ActivationKind::Crelu | ActivationKind::Prelu | ActivationKind::Identity => {
                return None
            }
        })
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        let key = if key == "none" { "identity".to_string() } else { key };
        ActivationKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| format!("unknown activation `{s}`"))
    }
}

/// Applies `kind` elementwise. PReLU reads its slope from `slope`; when
/// absent the fixed initial slope is used as a constant.
pub fn apply_activation(
    tape: &mut Tape,
    kind: ActivationKind,
    x: Var,
    slope: Option<Var>,
) -> Result<Var, AutodiffError> {
    match kind {
        ActivationKind::Identity => Ok(x),
        ActivationKind::Prelu => {
            let s = match slope {
                Some(s) => s,
                None => tape.constant(crate::tensor::Tensor::scalar(PRELU_INIT)),
            };
            tape.prelu(x, s)
        }
        ActivationKind::Crelu => {
            let pos = tape.unary(UnaryFn::Relu, x)?;
            let neg = tape.unary(UnaryFn::Neg, x)?;
            let neg = tape.unary(UnaryFn::Relu, neg)?;
            tape.concat(pos, neg)
        }
        other => tape.unary(other.unary().expect("elementwise activation"), x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn eval(kind: ActivationKind, xs: Vec<f64>) -> Vec<f64> {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(xs));
        let y = apply_activation(&mut tape, kind, x, None).unwrap();
        tape.value(y).data().to_vec()
    }

    #[test]
    fn catalog_has_sixteen_distinct_names() {
        let mut names: Vec<_> = ActivationKind::ALL.iter().map(|k| k.name()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 16);
        for k in ActivationKind::ALL {
            assert_eq!(k.name().parse::<ActivationKind>().unwrap(), k);
        }
        assert_eq!("None".parse::<ActivationKind>().unwrap(), ActivationKind::Identity);
    }

    #[test]
    fn worked_values() {
        assert_eq!(eval(ActivationKind::Relu6, vec![8.0]), vec![6.0]);
        assert_eq!(eval(ActivationKind::Tanh, vec![0.0]), vec![0.0]);
        assert_eq!(eval(ActivationKind::Softsign, vec![1.0]), vec![0.5]);
        assert_eq!(eval(ActivationKind::Crelu, vec![1.0, -2.0]), vec![1.0, 0.0, 0.0, 2.0]);
        assert_eq!(eval(ActivationKind::Hardtanh, vec![-3.0, 0.5, 3.0]), vec![-1.0, 0.5, 1.0]);
        assert_eq!(eval(ActivationKind::Threshold, vec![1.0, 1.5]), vec![0.0, 1.5]);
        assert_eq!(eval(ActivationKind::LeakyRelu, vec![-2.0]), vec![-0.02]);
        assert_eq!(eval(ActivationKind::Prelu, vec![-2.0, 3.0]), vec![-0.5, 3.0]);
        assert_eq!(eval(ActivationKind::Softshrink, vec![-2.0, 0.2, 2.0]), vec![-1.5, 0.0, 1.5]);
    }

    #[test]
    fn identity_is_bitwise_passthrough() {
        let xs = vec![1e-300, -0.0, 3.5, f64::MAX];
        assert_eq!(
            eval(ActivationKind::Identity, xs.clone())
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>(),
            xs.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn crelu_doubles_batched_width() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![3, 4], (0..12).map(|v| v as f64 - 6.0).collect()).unwrap());
        let y = apply_activation(&mut tape, ActivationKind::Crelu, x, None).unwrap();
        assert_eq!(tape.value(y).shape(), &[3, 8]);
        for k in ActivationKind::ALL {
            assert_eq!(k.output_width(5), if k == ActivationKind::Crelu { 10 } else { 5 });
        }
    }
}
