//! Recurrent cells. Every cell reads the concatenation `[x_t ; h_{t-1}]`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::mlp::{affine_forward, AffineParams};
use super::nac::{nac_forward, NacParams};
use super::nalu::{nalu_forward, NaluParams};
use super::params::{join, ParamTree};
use super::LayerError;
use crate::autodiff::{Tape, UnaryFn, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    RnnTanh,
    RnnRelu,
    Lstm,
    Gru,
    RecurrentNac,
    RecurrentNalu,
}

impl CellKind {
    pub const ALL: [CellKind; 6] = [
        CellKind::RnnTanh,
        CellKind::RnnRelu,
        CellKind::Lstm,
        CellKind::Gru,
        CellKind::RecurrentNac,
        CellKind::RecurrentNalu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CellKind::RnnTanh => "rnn_tanh",
            CellKind::RnnRelu => "rnn_relu",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
            CellKind::RecurrentNac => "nac",
            CellKind::RecurrentNalu => "nalu",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        let key = match key.as_str() {
            "tanh" | "rnn" => "rnn_tanh",
            "relu" => "rnn_relu",
            "recurrent_nac" => "nac",
            "recurrent_nalu" => "nalu",
            k => k,
        };
        CellKind::ALL
            .into_iter()
            .find(|c| c.name() == key)
            .ok_or_else(|| format!("unknown cell `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellWeights<T = Tensor> {
    Rnn(AffineParams<T>),
    Lstm {
        input: AffineParams<T>,
        forget: AffineParams<T>,
        cell: AffineParams<T>,
        output: AffineParams<T>,
    },
    Gru {
        reset: AffineParams<T>,
        update: AffineParams<T>,
        candidate: AffineParams<T>,
    },
    Nac(NacParams<T>),
    Nalu(NaluParams<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellParams<T = Tensor> {
    pub kind: CellKind,
    pub input: usize,
    pub hidden: usize,
    pub weights: CellWeights<T>,
}

impl<T> ParamTree for CellParams<T> {
    type Elem = T;
    type Mapped<U> = CellParams<U>;

    fn map_named<U>(&self, prefix: &str, f: &mut dyn FnMut(&str, &T) -> U) -> CellParams<U> {
        let weights = match &self.weights {
            CellWeights::Rnn(p) => CellWeights::Rnn(p.map_named(&join(prefix, "rnn"), f)),
            CellWeights::Lstm {
                input,
                forget,
                cell,
                output,
            } => CellWeights::Lstm {
                input: input.map_named(&join(prefix, "input"), f),
                forget: forget.map_named(&join(prefix, "forget"), f),
                cell: cell.map_named(&join(prefix, "cell"), f),
                output: output.map_named(&join(prefix, "output"), f),
            },
            CellWeights::Gru {
                reset,
                update,
                candidate,
            } => CellWeights::Gru {
                reset: reset.map_named(&join(prefix, "reset"), f),
                update: update.map_named(&join(prefix, "update"), f),
                candidate: candidate.map_named(&join(prefix, "candidate"), f),
            },
            CellWeights::Nac(p) => CellWeights::Nac(p.map_named(&join(prefix, "nac"), f)),
            CellWeights::Nalu(p) => CellWeights::Nalu(p.map_named(&join(prefix, "nalu"), f)),
        };
        CellParams {
            kind: self.kind,
            input: self.input,
            hidden: self.hidden,
            weights,
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut T)) {
        match &mut self.weights {
            CellWeights::Rnn(p) => p.visit_mut(&join(prefix, "rnn"), f),
            CellWeights::Lstm {
                input,
                forget,
                cell,
                output,
            } => {
                input.visit_mut(&join(prefix, "input"), f);
                forget.visit_mut(&join(prefix, "forget"), f);
                cell.visit_mut(&join(prefix, "cell"), f);
                output.visit_mut(&join(prefix, "output"), f);
            }
            CellWeights::Gru {
                reset,
                update,
                candidate,
            } => {
                reset.visit_mut(&join(prefix, "reset"), f);
                update.visit_mut(&join(prefix, "update"), f);
                candidate.visit_mut(&join(prefix, "candidate"), f);
            }
            CellWeights::Nac(p) => p.visit_mut(&join(prefix, "nac"), f),
            CellWeights::Nalu(p) => p.visit_mut(&join(prefix, "nalu"), f),
        }
    }
}

/// Hidden state; `c` is present only for the LSTM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellState {
    pub h: Var,
    pub c: Option<Var>,
}

/// Zero state, batched when `batch` is given.
pub fn initial_state<T>(tape: &mut Tape, p: &CellParams<T>, batch: Option<usize>) -> CellState {
    let shape = match batch {
        Some(n) => vec![n, p.hidden],
        None => vec![p.hidden],
    };
    let h = tape.constant(Tensor::zeros(&shape));
    let c = (p.kind == CellKind::Lstm).then(|| tape.constant(Tensor::zeros(&shape)));
    CellState { h, c }
}

fn gate(tape: &mut Tape, p: &AffineParams<Var>, z: Var, f: UnaryFn) -> Result<Var, LayerError> {
    let pre = affine_forward(tape, p, z)?;
    Ok(tape.unary(f, pre)?)
}

/// One recurrence step; returns the output (the new `h`) and the new state.
pub fn cell_step(
    tape: &mut Tape,
    p: &CellParams<Var>,
    x_t: Var,
    state: &CellState,
) -> Result<(Var, CellState), LayerError> {
    let (_, x_width) = tape.value(x_t).dims2();
    if x_width != p.input {
        return Err(LayerError::Width {
            layer: 0,
            expected: p.input,
            got: x_width,
        });
    }
    let (_, h_width) = tape.value(state.h).dims2();
    if h_width != p.hidden {
        return Err(LayerError::Width {
            layer: 0,
            expected: p.hidden,
            got: h_width,
        });
    }
    let z = tape.concat(x_t, state.h)?;
    let next = match &p.weights {
        CellWeights::Rnn(w) => {
            let f = if p.kind == CellKind::RnnRelu {
                UnaryFn::Relu
            } else {
                UnaryFn::Tanh
            };
            CellState {
                h: gate(tape, w, z, f)?,
                c: None,
            }
        }
        CellWeights::Lstm {
            input,
            forget,
            cell,
            output,
        } => {
            let c_prev = state
                .c
                .ok_or_else(|| LayerError::InvalidConfig("lstm step without cell state".into()))?;
            let i = gate(tape, input, z, UnaryFn::Sigmoid)?;
            let f = gate(tape, forget, z, UnaryFn::Sigmoid)?;
            let g = gate(tape, cell, z, UnaryFn::Tanh)?;
            let o = gate(tape, output, z, UnaryFn::Sigmoid)?;
            let keep = tape.mul(f, c_prev)?;
            let write = tape.mul(i, g)?;
            let c = tape.add(keep, write)?;
            let tc = tape.tanh(c)?;
            CellState {
                h: tape.mul(o, tc)?,
                c: Some(c),
            }
        }
        CellWeights::Gru {
            reset,
            update,
            candidate,
        } => {
            let r = gate(tape, reset, z, UnaryFn::Sigmoid)?;
            let u = gate(tape, update, z, UnaryFn::Sigmoid)?;
            let rh = tape.mul(r, state.h)?;
            let zr = tape.concat(x_t, rh)?;
            let n = gate(tape, candidate, zr, UnaryFn::Tanh)?;
            // (1 - u) * n + u * h == n + u * (h - n)
            let d = tape.sub(state.h, n)?;
            let ud = tape.mul(u, d)?;
            CellState {
                h: tape.add(n, ud)?,
                c: None,
            }
        }
        CellWeights::Nac(w) => CellState {
            h: nac_forward(tape, w, z)?,
            c: None,
        },
        CellWeights::Nalu(w) => CellState {
            h: nalu_forward(tape, w, z)?,
            c: None,
        },
    };
    Ok((next.h, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use crate::layers::init::init_cell;
    use crate::layers::{bind, LayerError};
    use crate::seed;
    use rand::Rng;

    fn zero_like(p: &CellParams) -> CellParams {
        let mut z = p.clone();
        z.visit_mut("", &mut |_, t| *t = Tensor::zeros(t.shape()));
        z
    }

    #[test]
    fn zero_rnn_stays_at_zero() {
        let p = zero_like(&init_cell(CellKind::RnnTanh, 3, 2, &mut seed::rng(0)).unwrap());
        let mut tape = Tape::new();
        let b = bind(&p, &mut tape);
        let s = initial_state(&mut tape, &p, None);
        let x = tape.constant(Tensor::vector(vec![0.0, 0.0, 0.0]));
        let (h, _) = cell_step(&mut tape, &b, x, &s).unwrap();
        assert_eq!(tape.value(h).data(), &[0.0, 0.0]);
    }

    #[test]
    fn identity_nac_cell_accumulates() {
        // W = [I | I] with input width 2 and hidden width 2
        let mut p = init_cell(CellKind::RecurrentNac, 2, 2, &mut seed::rng(0)).unwrap();
        if let CellWeights::Nac(nac) = &mut p.weights {
            let big = |r: usize, c: usize| if c % 2 == r { 60.0_f64 } else { -60.0 };
            nac.w_hat = Tensor::from_fn(&[2, 4], |i| big(i / 4, i % 4).abs());
            nac.m_hat = Tensor::from_fn(&[2, 4], |i| big(i / 4, i % 4));
        }
        let mut tape = Tape::new();
        let b = bind(&p, &mut tape);
        let mut s = initial_state(&mut tape, &p, None);
        let xs = [[1.0, 2.0], [3.0, -1.0], [0.5, 0.25]];
        for x in xs {
            let xv = tape.constant(Tensor::vector(x.to_vec()));
            s = cell_step(&mut tape, &b, xv, &s).unwrap().1;
        }
        let h = tape.value(s.h).data();
        assert!((h[0] - 4.5).abs() < 1e-12, "{h:?}");
        assert!((h[1] - 1.25).abs() < 1e-12, "{h:?}");
    }

    #[test]
    fn saturated_lstm_gates_hold_cell_state() {
        let mut p = zero_like(&init_cell(CellKind::Lstm, 2, 3, &mut seed::rng(0)).unwrap());
        if let CellWeights::Lstm { input, forget, .. } = &mut p.weights {
            forget.b = Some(Tensor::filled(&[3], 50.0));
            input.b = Some(Tensor::filled(&[3], -50.0));
        }
        let mut tape = Tape::new();
        let b = bind(&p, &mut tape);
        let h0 = tape.constant(Tensor::vector(vec![0.1, 0.2, 0.3]));
        let c0 = tape.constant(Tensor::vector(vec![1.0, -2.0, 0.5]));
        let s = CellState { h: h0, c: Some(c0) };
        let x = tape.constant(Tensor::vector(vec![3.0, -4.0]));
        let (_, next) = cell_step(&mut tape, &b, x, &s).unwrap();
        let c1 = tape.value(next.c.unwrap()).data();
        for (a, b) in c1.iter().zip([1.0, -2.0, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let p = init_cell(CellKind::Gru, 3, 2, &mut seed::rng(0)).unwrap();
        let mut tape = Tape::new();
        let b = bind(&p, &mut tape);
        let s = initial_state(&mut tape, &p, None);
        let x = tape.constant(Tensor::vector(vec![0.0; 4]));
        assert!(matches!(
            cell_step(&mut tape, &b, x, &s),
            Err(LayerError::Width { expected: 3, got: 4, .. })
        ));
    }

    #[test]
    fn every_cell_passes_grad_check_over_short_sequences() {
        let mut rng = seed::rng(21);
        for kind in CellKind::ALL {
            for trial in 0..4 {
                let input = rng.gen_range(1..=4);
                let hidden = rng.gen_range(1..=3);
                let steps = rng.gen_range(1..=4);
                let batch = 2;
                let mut p = init_cell(kind, input, hidden, &mut seed::rng(trial)).unwrap();
                if kind == CellKind::RecurrentNalu {
                    // the zero initial state feeds log(eps) into the multiplicative path;
                    // full-size weights make the loss too steep for finite differences
                    p.visit_mut("", &mut |_, t| *t = t.map(|v| 0.25 * v));
                }
                let flat: Vec<Tensor> = crate::layers::flatten(&p).into_iter().map(|(_, t)| t).collect();
                let (lo, hi) = if kind == CellKind::RecurrentNalu { (0.2, 1.5) } else { (-1.0, 1.0) };
                let xs: Vec<Tensor> = (0..steps)
                    .map(|_| Tensor::from_fn(&[batch, input], |_| rng.gen_range(lo..hi)))
                    .collect();
                let target = Tensor::from_fn(&[batch, hidden], |_| rng.gen_range(-1.0..1.0));
                let template = p.clone();
                let err = grad_check(
                    |t, v| {
                        let mut i = 0;
                        let bound = template.map_named("", &mut |_, _| {
                            i += 1;
                            v[i - 1]
                        });
                        let mut s = initial_state(t, &bound, Some(batch));
                        for x in &xs {
                            let xv = t.constant(x.clone());
                            s = cell_step(t, &bound, xv, &s).map_err(|e| e.into_autodiff())?.1;
                        }
                        let tv = t.constant(target.clone());
                        let d = t.sub(s.h, tv)?;
                        let sq = t.square(d)?;
                        t.mean(sq)
                    },
                    &flat,
                    1e-6,
                )
                .unwrap();
                assert!(err < 1e-5, "{kind} trial {trial} in {input} hid {hidden} steps {steps}: {err}");
            }
        }
    }
}
