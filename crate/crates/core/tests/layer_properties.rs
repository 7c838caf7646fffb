use nalu_core::autodiff::Tape;
use nalu_core::layers::{gradient_suite, nac_forward, nalu_forward, nalu_trace, NacParams, NaluParams, DEFAULT_EPSILON};
use nalu_core::seed;
use nalu_core::Tensor;
use proptest::prelude::*;
use rand::Rng;

fn matrix(rows: usize, cols: usize, values: &[f64]) -> Tensor {
    Tensor::from_fn(&[rows, cols], |i| values[i % values.len()])
}

fn nac_apply(p: &NacParams, x: &Tensor) -> Vec<f64> {
    let mut tape = Tape::new();
    let bound = NacParams {
        w_hat: tape.constant(p.w_hat.clone()),
        m_hat: tape.constant(p.m_hat.clone()),
    };
    let xv = tape.constant(x.clone());
    let y = nac_forward(&mut tape, &bound, xv).unwrap();
    tape.value(y).data().to_vec()
}

fn bind_nalu(tape: &mut Tape, p: &NaluParams) -> NaluParams<nalu_core::autodiff::Var> {
    NaluParams {
        nac: NacParams {
            w_hat: tape.constant(p.nac.w_hat.clone()),
            m_hat: tape.constant(p.nac.m_hat.clone()),
        },
        g_mat: tape.constant(p.g_mat.clone()),
        mul_nac: None,
        epsilon: p.epsilon,
    }
}

fn params_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>)> {
    (1usize..5, 1usize..5).prop_flat_map(|(o, i)| {
        (
            Just(o),
            Just(i),
            prop::collection::vec(-3.0f64..3.0, o * i),
            prop::collection::vec(-3.0f64..3.0, o * i),
        )
    })
}

proptest! {
    #[test]
    fn nac_is_linear((o, i, w, m) in params_strategy(), xs in prop::collection::vec(-10.0f64..10.0, 8), zs in prop::collection::vec(-10.0f64..10.0, 8), alpha in -5.0f64..5.0, beta in -5.0f64..5.0) {
        let p = NacParams { w_hat: matrix(o, i, &w), m_hat: matrix(o, i, &m) };
        let x = Tensor::vector(xs[..i].to_vec());
        let z = Tensor::vector(zs[..i].to_vec());
        let combo = x.zip_map(&z, |a, b| alpha * a + beta * b);
        let lhs = nac_apply(&p, &combo);
        let (yx, yz) = (nac_apply(&p, &x), nac_apply(&p, &z));
        for k in 0..o {
            let rhs = alpha * yx[k] + beta * yz[k];
            prop_assert!((lhs[k] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "{} vs {}", lhs[k], rhs);
        }
    }

    #[test]
    fn nac_scales_with_input((o, i, w, m) in params_strategy(), xs in prop::collection::vec(-10.0f64..10.0, 8), c in -100.0f64..100.0) {
        let p = NacParams { w_hat: matrix(o, i, &w), m_hat: matrix(o, i, &m) };
        let x = Tensor::vector(xs[..i].to_vec());
        let scaled = nac_apply(&p, &x.map(|v| c * v));
        for (s, y) in scaled.iter().zip(nac_apply(&p, &x)) {
            prop_assert!((s - c * y).abs() <= 1e-12 * (1.0 + (c * y).abs()));
        }
    }

    #[test]
    fn effective_weights_inside_open_interval((o, i, w, m) in params_strategy(), spread in 0.1f64..3.3) {
        let p = NacParams {
            w_hat: matrix(o, i, &w).map(|v| v * spread),
            m_hat: matrix(o, i, &m).map(|v| v * spread),
        };
        for &v in p.effective_weights().unwrap().data() {
            prop_assert!(v > -1.0 && v < 1.0, "{v}");
        }
    }

    #[test]
    fn nalu_output_between_paths((o, i, w, m) in params_strategy(), g in prop::collection::vec(-3.0f64..3.0, 16), xs in prop::collection::vec(0.0f64..4.0, 8)) {
        let p = NaluParams {
            nac: NacParams { w_hat: matrix(o, i, &w), m_hat: matrix(o, i, &m) },
            g_mat: matrix(o, i, &g),
            mul_nac: None,
            epsilon: DEFAULT_EPSILON,
        };
        let mut tape = Tape::new();
        let bound = bind_nalu(&mut tape, &p);
        let x = tape.constant(Tensor::vector(xs[..i].to_vec()));
        let t = nalu_trace(&mut tape, &bound, x).unwrap();
        let (a, mm, y) = (tape.value(t.additive), tape.value(t.multiplicative), tape.value(t.output));
        for k in 0..o {
            let (lo, hi) = (a.data()[k].min(mm.data()[k]), a.data()[k].max(mm.data()[k]));
            let slack = 1e-12 * (1.0 + hi.abs());
            prop_assert!(y.data()[k] >= lo - slack && y.data()[k] <= hi + slack);
        }
    }
}

#[test]
fn multiplicative_path_matches_product_oracle() {
    let mut rng = seed::stream(11, "tests/product-oracle");
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let dim = rng.gen_range(1..=6);
        // saturated selection: each input is either fully in or fully out
        let picks: Vec<bool> = (0..dim).map(|_| rng.gen_bool(0.6)).collect();
        let p = NaluParams {
            nac: NacParams {
                w_hat: Tensor::from_fn(&[1, dim], |j| if picks[j] { 40.0 } else { 0.0 }),
                m_hat: Tensor::from_fn(&[1, dim], |j| if picks[j] { 40.0 } else { -40.0 }),
            },
            g_mat: Tensor::zeros(&[1, dim]),
            mul_nac: None,
            epsilon: DEFAULT_EPSILON,
        };
        let xs: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.01..10.0)).collect();
        let oracle: f64 = xs
            .iter()
            .zip(&picks)
            .filter(|(_, &on)| on)
            .map(|(&x, _)| x + DEFAULT_EPSILON)
            .product();
        let mut tape = Tape::new();
        let bound = bind_nalu(&mut tape, &p);
        let x = tape.constant(Tensor::vector(xs));
        let t = nalu_trace(&mut tape, &bound, x).unwrap();
        let got = tape.value(t.multiplicative).item();
        worst = worst.max((got - oracle).abs() / oracle.abs());
    }
    assert!(worst < 1e-6, "worst relative error {worst}");
}

#[test]
fn nalu_forward_matches_trace_output() {
    let p = NaluParams {
        nac: NacParams {
            w_hat: matrix(2, 3, &[0.3, -1.2, 2.0]),
            m_hat: matrix(2, 3, &[1.0, 0.5, -0.7]),
        },
        g_mat: matrix(2, 3, &[0.1, -0.4, 0.9]),
        mul_nac: None,
        epsilon: DEFAULT_EPSILON,
    };
    let mut tape = Tape::new();
    let bound = bind_nalu(&mut tape, &p);
    let x = tape.constant(Tensor::vector(vec![1.5, 0.2, 3.0]));
    let t = nalu_trace(&mut tape, &bound, x).unwrap();
    let y = nalu_forward(&mut tape, &bound, x).unwrap();
    assert_eq!(tape.value(t.output), tape.value(y));
}

#[test]
fn every_layer_passes_gradient_check() {
    for seed_value in [0, 7] {
        for e in gradient_suite(seed_value, 100) {
            assert!(e.passed, "seed {seed_value}: {e:?}");
        }
    }
}
