//! Neural accumulator: a bias-free linear map whose weights are softly
//! pushed toward {-1, 0, 1}.

use super::params::{join, ParamTree};
use super::{linear, LayerError};
use crate::autodiff::{Tape, Var};
use crate::tensor::Tensor;

/// `w_hat` and `m_hat` are both `out x in`. There is deliberately no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct NacParams<T = Tensor> {
    pub w_hat: T,
    pub m_hat: T,
}

impl<T> ParamTree for NacParams<T> {
    type Elem = T;
    type Mapped<U> = NacParams<U>;

    fn map_named<U>(&self, prefix: &str, f: &mut dyn FnMut(&str, &T) -> U) -> NacParams<U> {
        NacParams {
            w_hat: f(&join(prefix, "w_hat"), &self.w_hat),
            m_hat: f(&join(prefix, "m_hat"), &self.m_hat),
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut T)) {
        f(&join(prefix, "w_hat"), &mut self.w_hat);
        f(&join(prefix, "m_hat"), &mut self.m_hat);
    }
}

impl NacParams<Tensor> {
    /// `(out, in)`
    pub fn dims(&self) -> (usize, usize) {
        self.w_hat.dims2()
    }

    /// `tanh(w_hat) * sigmoid(m_hat)`, evaluated directly.
    pub fn effective_weights(&self) -> Result<Tensor, LayerError> {
        let mut tape = Tape::new();
        let bound = NacParams {
            w_hat: tape.constant(self.w_hat.clone()),
            m_hat: tape.constant(self.m_hat.clone()),
        };
        let w = nac_effective_weights(&mut tape, &bound)?;
        Ok(tape.value(w).clone())
    }
}

pub fn nac_effective_weights(tape: &mut Tape, p: &NacParams<Var>) -> Result<Var, LayerError> {
    let t = tape.tanh(p.w_hat)?;
    let s = tape.sigmoid(p.m_hat)?;
    Ok(tape.mul(t, s)?)
}

/// `W x` for a single input vector or `X W^T` for a row batch.
pub fn nac_forward(tape: &mut Tape, p: &NacParams<Var>, x: Var) -> Result<Var, LayerError> {
    let w = nac_effective_weights(tape, p)?;
    linear(tape, w, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(w: &[f64], m: &[f64], out: usize, inp: usize) -> NacParams {
        NacParams {
            w_hat: Tensor::new(vec![out, inp], w.to_vec()).unwrap(),
            m_hat: Tensor::new(vec![out, inp], m.to_vec()).unwrap(),
        }
    }

    fn run(p: &NacParams, x: Vec<f64>) -> Vec<f64> {
        let mut tape = Tape::new();
        let b = crate::layers::bind(p, &mut tape);
        let x = tape.constant(Tensor::vector(x));
        let y = nac_forward(&mut tape, &b, x).unwrap();
        tape.value(y).data().to_vec()
    }

    #[test]
    fn saturation_points() {
        let zero = params(&[0.0], &[0.0], 1, 1).effective_weights().unwrap();
        assert_eq!(zero.data(), &[0.0]);
        // tanh(10) * sigmoid(10), evaluated in high precision:
        // 0.99999999587769276 * 0.99995460213129761 = 0.99995459800917747
        let high = params(&[10.0, -10.0], &[10.0, 10.0], 1, 2).effective_weights().unwrap();
        assert!((high.data()[0] - 0.999_954_598_009).abs() < 1e-11);
        assert!((high.data()[1] + 0.999_954_598_009).abs() < 1e-11);
    }

    #[test]
    fn mismatched_hat_shapes_are_rejected() {
        let p = NacParams {
            w_hat: Tensor::zeros(&[2, 3]),
            m_hat: Tensor::zeros(&[3, 2]),
        };
        assert!(p.effective_weights().is_err());
    }

    #[test]
    fn driven_weights_add_and_subtract() {
        let add = params(&[40.0, 40.0], &[40.0, 40.0], 1, 2);
        assert!((run(&add, vec![2.0, 3.0])[0] - 5.0).abs() < 1e-12);
        let sub = params(&[40.0, -40.0], &[40.0, 40.0], 1, 2);
        assert!((run(&sub, vec![2.0, 3.0])[0] + 1.0).abs() < 1e-12);
        assert_eq!(run(&add, vec![0.0, 0.0]), vec![0.0]);
    }

    #[test]
    fn batched_rows_match_single_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = params(
            &(0..6).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>(),
            &(0..6).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>(),
            2,
            3,
        );
        let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut tape = Tape::new();
        let b = crate::layers::bind(&p, &mut tape);
        let x = tape.constant(Tensor::matrix(&rows).unwrap());
        let y = nac_forward(&mut tape, &b, x).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let single = run(&p, r.clone());
            assert_eq!(tape.value(y).row(i), single.as_slice());
        }
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let w = Tensor::from_fn(&[1, 5], |_| rng.gen_range(-1.5..1.5));
            let m = Tensor::from_fn(&[1, 5], |_| rng.gen_range(-1.5..1.5));
            let x = Tensor::vector((0..5).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let target = Tensor::vector(vec![rng.gen_range(-3.0..3.0)]);
            let err = grad_check(
                |t, v| {
                    let p = NacParams { w_hat: v[0], m_hat: v[1] };
                    let xi = t.constant(x.clone());
                    let y = nac_forward(t, &p, xi).map_err(|e| e.into_autodiff())?;
                    let tv = t.constant(target.clone());
                    let d = t.sub(y, tv)?;
                    let sq = t.square(d)?;
                    t.mean(sq)
                },
                &[w, m],
                1e-6,
            )
            .unwrap();
            assert!(err < 1e-5, "{err}");
        }
    }

    proptest! {
        #[test]
        fn effective_weights_stay_inside_unit_interval(w in -50.0f64..50.0, m in -50.0f64..50.0) {
            let e = params(&[w], &[m], 1, 1).effective_weights().unwrap().data()[0];
            prop_assert!(e.abs() <= 1.0);
            // strictly inside whenever tanh/sigmoid are not rounded to 1
            if w.abs() < 18.0 || m < 36.0 {
                prop_assert!(e.abs() < 1.0);
            }
        }

        #[test]
        fn nac_is_linear(
            seed in 0u64..1000,
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = params(
                &(0..8).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>(),
                &(0..8).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>(),
                2,
                4,
            );
            let x1: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let x2: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mix: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| alpha * a + beta * b).collect();
            let (y1, y2, y) = (run(&p, x1.clone()), run(&p, x2), run(&p, mix));
            for i in 0..2 {
                let want = alpha * y1[i] + beta * y2[i];
                let scale = (alpha * y1[i]).abs() + (beta * y2[i]).abs() + 1e-300;
                prop_assert!((y[i] - want).abs() <= 1e-12 * scale.max(want.abs()).max(1.0));
            }
            let c = alpha;
            let scaled = run(&p, x1.iter().map(|v| c * v).collect());
            for i in 0..2 {
                prop_assert!((scaled[i] - c * y1[i]).abs() <= 1e-12 * (c * y1[i]).abs().max(1.0));
            }
        }
    }
}
