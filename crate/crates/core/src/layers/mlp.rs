//! Affine layers and the multilayer-perceptron baselines.

use serde::{Deserialize, Serialize};

use super::params::{join, Leaf, ParamTree};
use super::{linear, LayerError};
use crate::autodiff::{apply_activation, ActivationKind, Tape, Var};
use crate::tensor::Tensor;

/// `W x + b`; `w` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineParams<T = Tensor> {
    pub w: T,
    pub b: Option<T>,
}

impl<T> ParamTree for AffineParams<T> {
    type Elem = T;
    type Mapped<U> = AffineParams<U>;

    fn map_named<U>(&self, prefix: &str, f: &mut dyn FnMut(&str, &T) -> U) -> AffineParams<U> {
        AffineParams {
            w: f(&join(prefix, "w"), &self.w),
            b: self.b.as_ref().map(|b| f(&join(prefix, "b"), b)),
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut T)) {
        f(&join(prefix, "w"), &mut self.w);
        if let Some(b) = &mut self.b {
            f(&join(prefix, "b"), b);
        }
    }
}

pub fn affine_forward(tape: &mut Tape, p: &AffineParams<Var>, x: Var) -> Result<Var, LayerError> {
    let y = linear(tape, p.w, x)?;
    match p.b {
        None => Ok(y),
        Some(b) if tape.value(y).rank() == 1 => Ok(tape.add(y, b)?),
        Some(b) => Ok(tape.add_row(y, b)?),
    }
}

/// Layer widths from input to output plus the hidden nonlinearity.
///
/// The final affine layer has no activation. For CReLU the width entering
/// each following affine layer is doubled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activation: ActivationKind,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activation: ActivationKind) -> Self {
        Self { widths, activation }
    }

    pub fn validate(&self) -> Result<(), LayerError> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(LayerError::InvalidConfig(format!(
                "mlp widths must list at least input and output, all positive: {:?}",
                self.widths
            )));
        }
        Ok(())
    }

    /// `(in, out)` of each affine layer after the activation width rule.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let n = self.widths.len();
        (0..n - 1)
            .map(|i| {
                let fan_in = if i == 0 {
                    self.widths[0]
                } else {
                    self.activation.output_width(self.widths[i])
                };
                (fan_in, self.widths[i + 1])
            })
            .collect()
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated widths")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T = Tensor> {
    pub layers: Vec<AffineParams<T>>,
    /// One learnable slope per hidden layer when the activation is PReLU.
    pub slopes: Vec<Leaf<T>>,
}

impl<T> ParamTree for MlpParams<T> {
    type Elem = T;
    type Mapped<U> = MlpParams<U>;

    fn map_named<U>(&self, prefix: &str, f: &mut dyn FnMut(&str, &T) -> U) -> MlpParams<U> {
        MlpParams {
            layers: self.layers.map_named(&join(prefix, "layers"), f),
            slopes: self.slopes.map_named(&join(prefix, "slopes"), f),
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut T)) {
        self.layers.visit_mut(&join(prefix, "layers"), f);
        self.slopes.visit_mut(&join(prefix, "slopes"), f);
    }
}

pub fn mlp_forward(
    tape: &mut Tape,
    spec: &MlpSpec,
    p: &MlpParams<Var>,
    x: Var,
) -> Result<Var, LayerError> {
    spec.validate()?;
    let dims = spec.layer_dims();
    if p.layers.len() != dims.len() {
        return Err(LayerError::InvalidConfig(format!(
            "mlp expects {} affine layers, got {}",
            dims.len(),
            p.layers.len()
        )));
    }
    let mut h = x;
    let last = p.layers.len() - 1;
    for (i, layer) in p.layers.iter().enumerate() {
        let (_, width_in) = tape.value(h).dims2();
        if width_in != dims[i].0 {
            return Err(LayerError::Width {
                layer: i,
                expected: dims[i].0,
                got: width_in,
            });
        }
        h = affine_forward(tape, layer, h)?;
        if i < last {
            let slope = p.slopes.get(i).map(|s| s.0);
            h = apply_activation(tape, spec.activation, h, slope)?;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{bind, init::init_mlp};
    use crate::seed;

    fn eye(n: usize) -> Tensor {
        Tensor::from_fn(&[n, n], |i| if i / n == i % n { 1.0 } else { 0.0 })
    }

    #[test]
    fn identity_network_passes_input_through() {
        let spec = MlpSpec::new(vec![3, 3, 3, 3], ActivationKind::Identity);
        let p = MlpParams {
            layers: (0..3)
                .map(|_| AffineParams {
                    w: eye(3),
                    b: Some(Tensor::zeros(&[3])),
                })
                .collect(),
            slopes: vec![],
        };
        let mut tape = Tape::new();
        let b = bind(&p, &mut tape);
        let x = tape.constant(Tensor::vector(vec![1.5, -2.0, 7.0]));
        let y = mlp_forward(&mut tape, &spec, &b, x).unwrap();
        assert_eq!(tape.value(y).data(), &[1.5, -2.0, 7.0]);
    }

    #[test]
    fn single_layer_is_a_linear_model() {
        let spec = MlpSpec::new(vec![2, 1], ActivationKind::Tanh);
        let p = MlpParams {
            layers: vec![AffineParams {
                w: Tensor::new(vec![1, 2], vec![3.0, -1.0]).unwrap(),
                b: Some(Tensor::vector(vec![0.5])),
            }],
            slopes: vec![],
        };
        let mut tape = Tape::new();
        let b = bind(&p, &mut tape);
        let x = tape.constant(Tensor::vector(vec![2.0, 4.0]));
        let y = mlp_forward(&mut tape, &spec, &b, x).unwrap();
        // no activation on the output layer
        assert_eq!(tape.value(y).data(), &[2.5]);
    }

    #[test]
    fn crelu_doubles_next_fan_in() {
        let spec = MlpSpec::new(vec![4, 8, 1], ActivationKind::Crelu);
        assert_eq!(spec.layer_dims(), vec![(4, 8), (16, 1)]);
        let p = init_mlp(&spec, &mut seed::rng(1)).unwrap();
        assert_eq!(p.layers[1].w.shape(), &[1, 16]);
        let mut tape = Tape::new();
        let b = bind(&p, &mut tape);
        let x = tape.constant(Tensor::from_fn(&[5, 4], |i| i as f64 * 0.1 - 1.0));
        let y = mlp_forward(&mut tape, &spec, &b, x).unwrap();
        assert_eq!(tape.value(y).shape(), &[5, 1]);
    }

    #[test]
    fn width_chain_violation_is_reported() {
        let spec = MlpSpec::new(vec![4, 8, 1], ActivationKind::Relu);
        let p = init_mlp(&spec, &mut seed::rng(1)).unwrap();
        let mut tape = Tape::new();
        let b = bind(&p, &mut tape);
        let x = tape.constant(Tensor::vector(vec![1.0; 5]));
        assert!(matches!(
            mlp_forward(&mut tape, &spec, &b, x),
            Err(LayerError::Width { layer: 0, expected: 4, got: 5 })
        ));
        assert!(MlpSpec::new(vec![4], ActivationKind::Relu).validate().is_err());
    }
}
