//! Static and recurrent arithmetic over two fixed input subsections.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::dataset::{Dataset, Regime};
use super::TaskError;
use crate::seed;
use crate::tensor::Tensor;

pub const STATIC_INPUT_DIM: usize = 100;
pub const RECURRENT_INPUT_DIM: usize = 10;
pub const RECURRENT_TRAIN_LEN: usize = 10;
pub const RECURRENT_EXTRAP_LEN: usize = 1000;
pub const TRAIN_SCALE: f64 = 1.0;
pub const EXTRAP_SCALE: f64 = 5.0;
/// Training and interpolation examples with `b` below this are redrawn.
pub const DIVISION_GUARD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArithmeticOp {
    Add,
    Sub,
    Mul,
    Div,
    Square,
    Sqrt,
}

impl ArithmeticOp {
    pub const ALL: [ArithmeticOp; 6] = [
        ArithmeticOp::Add,
        ArithmeticOp::Sub,
        ArithmeticOp::Mul,
        ArithmeticOp::Div,
        ArithmeticOp::Square,
        ArithmeticOp::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArithmeticOp::Add => "add",
            ArithmeticOp::Sub => "sub",
            ArithmeticOp::Mul => "mul",
            ArithmeticOp::Div => "div",
            ArithmeticOp::Square => "square",
            ArithmeticOp::Sqrt => "sqrt",
        }
    }

    /// Row label in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            ArithmeticOp::Add => "a + b",
            ArithmeticOp::Sub => "a - b",
            ArithmeticOp::Mul => "a x b",
            ArithmeticOp::Div => "a / b",
            ArithmeticOp::Square => "a^2",
            ArithmeticOp::Sqrt => "sqrt(a)",
        }
    }
}

impl fmt::Display for ArithmeticOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArithmeticOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "add" | "+" => Ok(ArithmeticOp::Add),
            "sub" | "-" => Ok(ArithmeticOp::Sub),
            "mul" | "*" | "x" => Ok(ArithmeticOp::Mul),
            "div" | "/" => Ok(ArithmeticOp::Div),
            "square" | "sq" => Ok(ArithmeticOp::Square),
            "sqrt" => Ok(ArithmeticOp::Sqrt),
            _ => Err(format!("unknown operation `{s}`")),
        }
    }
}

/// One task: the operation plus the half-open ranges `[m, n)` and `[p, q)`
/// summed into `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub op: ArithmeticOp,
    pub input_dim: usize,
    pub range_a: (usize, usize),
    pub range_b: (usize, usize),
    pub train_scale: f64,
    pub extrap_scale: f64,
    /// Root of the per-regime data streams.
    pub seed: u64,
}

fn draw_range<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> (usize, usize) {
    let min_len = (dim / 20).max(2).min(dim);
    let len = rng.gen_range(min_len..=dim);
    let start = rng.gen_range(0..=dim - len);
    (start, start + len)
}

pub fn make_task<R: Rng + ?Sized>(rng: &mut R, op: ArithmeticOp, input_dim: usize) -> TaskInstance {
    let range_a = draw_range(rng, input_dim);
    let range_b = draw_range(rng, input_dim);
    TaskInstance {
        op,
        input_dim,
        range_a,
        range_b,
        train_scale: TRAIN_SCALE,
        extrap_scale: EXTRAP_SCALE,
        seed: rng.gen(),
    }
}

pub fn make_static_task<R: Rng + ?Sized>(rng: &mut R, op: ArithmeticOp) -> TaskInstance {
    make_task(rng, op, STATIC_INPUT_DIM)
}

pub fn make_recurrent_task<R: Rng + ?Sized>(rng: &mut R, op: ArithmeticOp) -> TaskInstance {
    make_task(rng, op, RECURRENT_INPUT_DIM)
}

impl TaskInstance {
    pub fn validate(&self) -> Result<(), TaskError> {
        let ok = |(lo, hi): (usize, usize)| lo < hi && hi <= self.input_dim;
        if !ok(self.range_a) || !ok(self.range_b) {
            return Err(TaskError::InvalidConfig(format!(
                "ranges {:?} / {:?} do not fit input width {}",
                self.range_a, self.range_b, self.input_dim
            )));
        }
        if !(self.train_scale > 0.0 && self.extrap_scale > self.train_scale) {
            return Err(TaskError::InvalidConfig(
                "need 0 < train_scale < extrap_scale".into(),
            ));
        }
        Ok(())
    }

    pub fn scale(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Extrapolation => self.extrap_scale,
            _ => self.train_scale,
        }
    }

    /// Independent generator for one regime; distinct regimes and indices
    /// never share a stream.
    pub fn stream(&self, regime: Regime, index: u64) -> ChaCha8Rng {
        seed::stream(self.seed, &format!("{}/{index}", regime.name()))
    }
}

/// `op(a, b)` without any guard.
pub fn apply_op(op: ArithmeticOp, a: f64, b: f64) -> f64 {
    match op {
        ArithmeticOp::Add => a + b,
        ArithmeticOp::Sub => a - b,
        ArithmeticOp::Mul => a * b,
        ArithmeticOp::Div => a / b,
        ArithmeticOp::Square => a * a,
        ArithmeticOp::Sqrt => a.sqrt(),
    }
}

fn guarded(op: ArithmeticOp, a: f64, b: f64, guard: bool) -> Result<f64, TaskError> {
    if op == ArithmeticOp::Div && guard && b < DIVISION_GUARD {
        return Err(TaskError::DivisionGuard { b });
    }
    if op == ArithmeticOp::Sqrt && a < 0.0 {
        return Err(TaskError::NegativeSqrt { a });
    }
    Ok(apply_op(op, a, b))
}

/// `(a, b)` for a `[steps, input_dim]` or `[input_dim]` input.
pub fn subsection_sums(task: &TaskInstance, x: &Tensor) -> Result<(f64, f64), TaskError> {
    let (steps, width) = x.dims2();
    if width != task.input_dim {
        return Err(TaskError::InputWidth {
            expected: task.input_dim,
            got: width,
        });
    }
    let (mut a, mut b) = (0.0, 0.0);
    for t in 0..steps {
        let row = &x.data()[t * width..(t + 1) * width];
        a += row[task.range_a.0..task.range_a.1].iter().sum::<f64>();
        b += row[task.range_b.0..task.range_b.1].iter().sum::<f64>();
    }
    Ok((a, b))
}

/// Target for one static input vector. Division applies the guard band.
pub fn static_target(task: &TaskInstance, x: &Tensor) -> Result<f64, TaskError> {
    if x.rank() != 1 {
        return Err(TaskError::InvalidConfig(format!(
            "static input must be a vector, got shape {:?}",
            x.shape()
        )));
    }
    let (a, b) = subsection_sums(task, x)?;
    guarded(task.op, a, b, true)
}

/// Target for one `[T, input_dim]` sequence: the subsections are summed
/// over every step before the operation is applied.
pub fn recurrent_target(task: &TaskInstance, x: &Tensor) -> Result<f64, TaskError> {
    let (a, b) = subsection_sums(task, x)?;
    guarded(task.op, a, b, true)
}

fn draw_examples<R: Rng + ?Sized>(
    task: &TaskInstance,
    shape: &[usize],
    regime: Regime,
    count: usize,
    rng: &mut R,
) -> Result<Dataset, TaskError> {
    task.validate()?;
    if count == 0 {
        return Err(TaskError::InvalidConfig("count must be positive".into()));
    }
    let scale = task.scale(regime);
    let guard = regime != Regime::Extrapolation;
    let mut inputs = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    while inputs.len() < count {
        let x = Tensor::from_fn(shape, |_| rng.gen_range(0.0..scale));
        let (a, b) = subsection_sums(task, &x)?;
        match guarded(task.op, a, b, guard) {
            Ok(y) => {
                inputs.push(x);
                targets.push(y);
            }
            Err(TaskError::DivisionGuard { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(Dataset {
        inputs,
        targets,
        regime,
    })
}

/// Static examples: each coordinate uniform on `[0, scale)` for the regime.
pub fn sample_batch<R: Rng + ?Sized>(
    task: &TaskInstance,
    regime: Regime,
    count: usize,
    rng: &mut R,
) -> Result<Dataset, TaskError> {
    draw_examples(task, &[task.input_dim], regime, count, rng)
}

/// Sequences of `len` steps, each `[len, input_dim]`.
pub fn sample_recurrent_batch<R: Rng + ?Sized>(
    task: &TaskInstance,
    len: usize,
    regime: Regime,
    count: usize,
    rng: &mut R,
) -> Result<Dataset, TaskError> {
    if len == 0 {
        return Err(TaskError::InvalidConfig("sequence length must be positive".into()));
    }
    draw_examples(task, &[len, task.input_dim], regime, count, rng)
}
