//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Tape`] records every primitive as it is evaluated; [`Tape::backward`]
//! then walks the tape in reverse id order, which is a valid reverse
//! topological order because operands are always recorded before their
//! consumers. Tapes are rebuilt for every training step.

mod activation;
mod gradcheck;
pub(crate) mod kernels;
mod tape;
mod unary;

pub use activation::{apply_activation, ActivationKind, PRELU_INIT};
pub use gradcheck::{grad_check, grad_check_report, GradCheckError, GradCheckReport};
pub use tape::{CustomOp, Gradients, GraphNode, Op, Tape, Var};
pub use unary::{sigmoid, UnaryFn};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::AutodiffError;
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_matrix_vector() {
        let mut tape = Tape::new();
        let a = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let x = tape.constant(Tensor::vector(vec![5.0, 6.0]));
        let y = tape.matmul(a, x).unwrap();
        assert_eq!(tape.value(y).data(), &[17.0, 39.0]);
    }

    #[test]
    fn log_inverts_exp_and_abs() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.5, 2.0]));
        let e = tape.exp(x).unwrap();
        let l = tape.log(e).unwrap();
        for (got, want) in tape.value(l).data().iter().zip([0.5, 2.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        let z = tape.constant(Tensor::vector(vec![-3.0, 0.0, 3.0]));
        let a = tape.abs(z).unwrap();
        assert_eq!(tape.value(a).data(), &[3.0, 0.0, 3.0]);
    }

    #[test]
    fn shape_mismatch_names_primitive_and_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2]));
        match tape.matmul(a, b) {
            Err(AutodiffError::ShapeMismatch { op, lhs, rhs }) => {
                assert_eq!(op, "matmul");
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let c = tape.constant(Tensor::zeros(&[3]));
        assert!(matches!(tape.add(b, c), Err(AutodiffError::ShapeMismatch { op: "add", .. })));
    }

    #[test]
    fn log_of_nonpositive_is_domain_error() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1.0, 0.0]));
        assert!(matches!(tape.log(x), Err(AutodiffError::Domain { op: "log", .. })));
        let n = tape.constant(Tensor::vector(vec![-1.0]));
        assert!(matches!(tape.log(n), Err(AutodiffError::Domain { .. })));
    }

    #[test]
    fn power_rule() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::scalar(3.0));
        let l = tape.square(w).unwrap();
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(w).item(), 6.0);
    }

    #[test]
    fn tanh_slope_at_zero() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![0.0, 0.0]));
        let h = tape.tanh(w).unwrap();
        let l = tape.sum(h).unwrap();
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(w).data(), &[1.0, 1.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(w), Err(AutodiffError::NonScalarLoss { .. })));
    }

    #[test]
    fn unreachable_nodes_get_zero_grad() {
        let mut tape = Tape::new();
        let used = tape.param(Tensor::vector(vec![1.0, 2.0]));
        let unused = tape.param(Tensor::new(vec![2, 2], vec![1.0; 4]).unwrap());
        let l = tape.sum(used).unwrap();
        let g = tape.backward(l).unwrap();
        assert!(!g.is_reached(unused));
        assert_eq!(g.get(unused), Tensor::zeros(&[2, 2]));
    }

    #[test]
    fn operands_precede_consumers() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::vector(vec![0.3, 0.4]));
        let b = tape.tanh(a).unwrap();
        let c = tape.mul(a, b).unwrap();
        let d = tape.sum(c).unwrap();
        assert_eq!(d.id() + 1, tape.len());
        for (id, node) in tape.nodes().iter().enumerate() {
            assert!(node.operands.iter().all(|o| o.id() < id));
        }
    }

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
        Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
    }

    /// Every primitive, wrapped into a scalar loss through a random
    /// weighting so that all output entries contribute.
    #[test]
    fn every_primitive_passes_grad_check_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let unaries = [
            UnaryFn::Neg,
            UnaryFn::Tanh,
            UnaryFn::Sigmoid,
            UnaryFn::Exp,
            UnaryFn::Log,
            UnaryFn::Abs,
            UnaryFn::Sqrt,
            UnaryFn::Square,
            UnaryFn::Relu,
            UnaryFn::Relu6,
            UnaryFn::Hardtanh,
            UnaryFn::Softsign,
            UnaryFn::Threshold,
            UnaryFn::Selu,
            UnaryFn::Elu,
            UnaryFn::LeakyRelu,
            UnaryFn::Tanhshrink,
            UnaryFn::Softplus,
            UnaryFn::Softshrink,
        ];
        let n_prims = 12 + unaries.len();
        for trial in 0..100 {
            let m = rng.gen_range(1..=8);
            let k = rng.gen_range(1..=8);
            let n = rng.gen_range(1..=8);
            let prim = trial % n_prims;
            let (params, build): (Vec<Tensor>, Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>>) =
                match prim {
                    0 => (
                        vec![random_tensor(&mut rng, &[m, k], -1.0, 1.0), random_tensor(&mut rng, &[k, n], -1.0, 1.0)],
                        Box::new(|t, v| t.matmul(v[0], v[1])),
                    ),
                    1 => (
                        vec![random_tensor(&mut rng, &[m, k], -1.0, 1.0), random_tensor(&mut rng, &[k], -1.0, 1.0)],
                        Box::new(|t, v| t.matmul(v[0], v[1])),
                    ),
                    2 => (
                        vec![random_tensor(&mut rng, &[m, k], -1.0, 1.0), random_tensor(&mut rng, &[n, k], -1.0, 1.0)],
                        Box::new(|t, v| t.matmul_t(v[0], v[1])),
                    ),
                    3 => (
                        vec![random_tensor(&mut rng, &[m, n], -1.0, 1.0), random_tensor(&mut rng, &[m, n], -1.0, 1.0)],
                        Box::new(|t, v| t.add(v[0], v[1])),
                    ),
                    4 => (
                        vec![random_tensor(&mut rng, &[m, n], -1.0, 1.0), random_tensor(&mut rng, &[m, n], -1.0, 1.0)],
                        Box::new(|t, v| t.sub(v[0], v[1])),
                    ),
                    5 => (
                        vec![random_tensor(&mut rng, &[m, n], -1.0, 1.0), random_tensor(&mut rng, &[m, n], -1.0, 1.0)],
                        Box::new(|t, v| t.mul(v[0], v[1])),
                    ),
                    6 => (
                        vec![random_tensor(&mut rng, &[m, n], -1.0, 1.0), random_tensor(&mut rng, &[m, n], 0.5, 2.0)],
                        Box::new(|t, v| t.div(v[0], v[1])),
                    ),
                    7 => (
                        vec![random_tensor(&mut rng, &[m, n], -1.0, 1.0), random_tensor(&mut rng, &[n], -1.0, 1.0)],
                        Box::new(|t, v| t.add_row(v[0], v[1])),
                    ),
                    8 => (
                        vec![random_tensor(&mut rng, &[m, n], -1.0, 1.0), random_tensor(&mut rng, &[1], 0.0, 1.0)],
                        Box::new(|t, v| t.prelu(v[0], v[1])),
                    ),
                    9 => {
                        let c: f64 = rng.gen_range(-2.0..2.0);
                        (
                            vec![random_tensor(&mut rng, &[m, n], -1.0, 1.0)],
                            Box::new(move |t, v| {
                                let s = t.scale(v[0], c)?;
                                t.add_scalar(s, c)
                            }),
                        )
                    }
                    10 => (
                        vec![random_tensor(&mut rng, &[m, n], -1.0, 1.0)],
                        Box::new(|t, v| {
                            let s = t.sum(v[0])?;
                            let mean = t.mean(v[0])?;
                            t.mul(s, mean)
                        }),
                    ),
                    11 => (
                        vec![random_tensor(&mut rng, &[m, k], -1.0, 1.0), random_tensor(&mut rng, &[m, n], -1.0, 1.0)],
                        Box::new(|t, v| t.concat(v[0], v[1])),
                    ),
                    u => {
                        let f = unaries[u - 12];
                        let (lo, hi) = match f {
                            UnaryFn::Log | UnaryFn::Sqrt => (0.2, 3.0),
                            _ => (-8.0, 8.0),
                        };
                        (
                            vec![random_tensor(&mut rng, &[m, n], lo, hi)],
                            Box::new(move |t, v| t.unary(f, v[0])),
                        )
                    }
                };
            // weight the output so the loss is not symmetric in its entries
            let probe = {
                let mut tape = Tape::new();
                let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
                let out = build(&mut tape, &vars).unwrap();
                tape.value(out).shape().to_vec()
            };
            let weights = random_tensor(&mut rng, &probe, -1.0, 1.0);
            let loss = |t: &mut Tape, v: &[Var]| {
                let out = build(t, v)?;
                let w = t.constant(weights.clone());
                let p = t.mul(out, w)?;
                t.sum(p)
            };
            let err = grad_check(loss, &params, 1e-6).unwrap();
            assert!(err < 1e-5, "trial {trial} primitive {prim}: {err}");
        }
    }

    #[test]
    fn gradients_are_linear_in_the_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let w0 = random_tensor(&mut rng, &[3, 4], -1.0, 1.0);
            let x0 = random_tensor(&mut rng, &[4], -1.0, 1.0);
            let (alpha, beta): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let build = |which: u8| {
                let mut tape = Tape::new();
                let w = tape.param(w0.clone());
                let x = tape.constant(x0.clone());
                let y = tape.matmul(w, x).unwrap();
                let th = tape.tanh(y).unwrap();
                let l1 = tape.sum(th).unwrap();
                let sq = tape.square(y).unwrap();
                let l2 = tape.mean(sq).unwrap();
                let loss = match which {
                    1 => l1,
                    2 => l2,
                    _ => {
                        let a = tape.scale(l1, alpha).unwrap();
                        let b = tape.scale(l2, beta).unwrap();
                        tape.add(a, b).unwrap()
                    }
                };
                tape.backward(loss).unwrap().get(w)
            };
            let (g1, g2, g) = (build(1), build(2), build(0));
            for i in 0..g.len() {
                let want = alpha * g1.data()[i] + beta * g2.data()[i];
                assert!((g.data()[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    /// Elementwise cube with a deliberately wrong adjoint (2x^2 instead of 3x^2).
    struct BrokenCube;

    impl CustomOp for BrokenCube {
        fn name(&self) -> &'static str {
            "broken_cube"
        }
        fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor, AutodiffError> {
            Ok(inputs[0].map(|x| x * x * x))
        }
        fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Vec<Tensor> {
            vec![grad.zip_map(inputs[0], |g, x| g * 2.0 * x * x)]
        }
    }

    struct Cube;

    impl CustomOp for Cube {
        fn name(&self) -> &'static str {
            "cube"
        }
        fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor, AutodiffError> {
            Ok(inputs[0].map(|x| x * x * x))
        }
        fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Vec<Tensor> {
            vec![grad.zip_map(inputs[0], |g, x| g * 3.0 * x * x)]
        }
    }

    #[test]
    fn grad_check_catches_corrupted_adjoint() {
        let p = Tensor::vector(vec![0.7, -1.3, 1.1]);
        let good = grad_check(
            |t, v| {
                let c = t.custom(Arc::new(Cube), &[v[0]])?;
                t.sum(c)
            },
            &[p.clone()],
            1e-6,
        )
        .unwrap();
        assert!(good < 1e-5, "{good}");
        let bad = grad_check(
            |t, v| {
                let c = t.custom(Arc::new(BrokenCube), &[v[0]])?;
                t.sum(c)
            },
            &[p],
            1e-6,
        )
        .unwrap();
        assert!(bad > 1e-2, "{bad}");
    }
}
