//! Whole models: the static stacks, recurrent sequence models and the
//! number-phrase reader, all over a shared parameter-tree layout.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::ablation::{ablation_forward, AblationParams, AblationVariant};
use super::cell::{cell_step, initial_state, CellKind, CellParams};
use super::init::{init_ablation, init_affine, init_cell, init_mlp, init_nac, init_nalu, uniform_matrix};
use super::mlp::{affine_forward, mlp_forward, AffineParams, MlpParams, MlpSpec};
use super::nac::{nac_forward, NacParams};
use super::nalu::{nalu_forward, NaluParams, DEFAULT_EPSILON};
use super::params::{join, Leaf, ParamTree};
use super::LayerError;
use crate::autodiff::{Tape, Var};
use crate::tensor::Tensor;

/// Output layer of a sequence model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Linear,
    Nac,
    Nalu,
}

impl HeadKind {
    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Linear => "linear",
            HeadKind::Nac => "nac",
            HeadKind::Nalu => "nalu",
        }
    }

    /// The head used with a given recurrent cell in the arithmetic tasks.
    pub fn for_cell(kind: CellKind) -> Self {
        match kind {
            CellKind::RecurrentNac => HeadKind::Nac,
            CellKind::RecurrentNalu => HeadKind::Nalu,
            _ => HeadKind::Linear,
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "affine" => Ok(HeadKind::Linear),
            "nac" => Ok(HeadKind::Nac),
            "nalu" => Ok(HeadKind::Nalu),
            _ => Err(format!("unknown head `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Mlp(MlpSpec),
    NacStack {
        widths: Vec<usize>,
    },
    NaluStack {
        widths: Vec<usize>,
        epsilon: f64,
        tied: bool,
    },
    AblationStack {
        variant: AblationVariant,
        widths: Vec<usize>,
    },
    Recurrent {
        cell: CellKind,
        input: usize,
        hidden: usize,
        head: HeadKind,
    },
    Language {
        vocab: usize,
        embed: usize,
        hidden: usize,
        head: HeadKind,
        summed_state: bool,
    },
}

impl ModelSpec {
    pub fn is_sequence(&self) -> bool {
        matches!(self, ModelSpec::Recurrent { .. } | ModelSpec::Language { .. })
    }

    pub fn input_width(&self) -> usize {
        match self {
            ModelSpec::Mlp(m) => m.input_width(),
            ModelSpec::NacStack { widths }
            | ModelSpec::NaluStack { widths, .. }
            | ModelSpec::AblationStack { widths, .. } => widths[0],
            ModelSpec::Recurrent { input, .. } => *input,
            ModelSpec::Language { vocab, .. } => *vocab,
        }
    }

    /// Short tag used in result files.
    pub fn tag(&self) -> String {
        match self {
            ModelSpec::Mlp(m) => m.activation.name().to_string(),
            ModelSpec::NacStack { .. } => "nac".into(),
            ModelSpec::NaluStack { tied: true, .. } => "nalu".into(),
            ModelSpec::NaluStack { tied: false, .. } => "nalu_untied".into(),
            ModelSpec::AblationStack { variant, .. } => format!("ablation_{variant}"),
            ModelSpec::Recurrent { cell, .. } => cell.name().to_string(),
            ModelSpec::Language {
                head, summed_state, ..
            } => match (head, summed_state) {
                (HeadKind::Linear, true) => "lstm_summed".into(),
                (HeadKind::Linear, false) => "lstm".into(),
                (h, _) => format!("lstm_{h}"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeadParams<T = Tensor> {
    Linear(AffineParams<T>),
    Nac(NacParams<T>),
    Nalu(NaluParams<T>),
}

impl<T> ParamTree for HeadParams<T> {
    type Elem = T;
    type Mapped<U> = HeadParams<U>;

    fn map_named<U>(&self, prefix: &str, f: &mut dyn FnMut(&str, &T) -> U) -> HeadParams<U> {
        match self {
            HeadParams::Linear(p) => HeadParams::Linear(p.map_named(prefix, f)),
            HeadParams::Nac(p) => HeadParams::Nac(p.map_named(prefix, f)),
            HeadParams::Nalu(p) => HeadParams::Nalu(p.map_named(prefix, f)),
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut T)) {
        match self {
            HeadParams::Linear(p) => p.visit_mut(prefix, f),
            HeadParams::Nac(p) => p.visit_mut(prefix, f),
            HeadParams::Nalu(p) => p.visit_mut(prefix, f),
        }
    }
}

pub fn head_forward(tape: &mut Tape, p: &HeadParams<Var>, x: Var) -> Result<Var, LayerError> {
    match p {
        HeadParams::Linear(a) => affine_forward(tape, a, x),
        HeadParams::Nac(n) => nac_forward(tape, n, x),
        HeadParams::Nalu(n) => nalu_forward(tape, n, x),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams<T = Tensor> {
    Mlp(MlpParams<T>),
    NacStack(Vec<NacParams<T>>),
    NaluStack(Vec<NaluParams<T>>),
    AblationStack(Vec<AblationParams<T>>),
    Recurrent {
        cell: CellParams<T>,
        head: HeadParams<T>,
    },
    Language {
        /// `vocab x embed`
        embedding: Leaf<T>,
        cell: CellParams<T>,
        head: HeadParams<T>,
    },
}

impl<T> ParamTree for ModelParams<T> {
    type Elem = T;
    type Mapped<U> = ModelParams<U>;

    fn map_named<U>(&self, prefix: &str, f: &mut dyn FnMut(&str, &T) -> U) -> ModelParams<U> {
        match self {
            ModelParams::Mlp(p) => ModelParams::Mlp(p.map_named(prefix, f)),
            ModelParams::NacStack(p) => ModelParams::NacStack(p.map_named(&join(prefix, "nac"), f)),
            ModelParams::NaluStack(p) => ModelParams::NaluStack(p.map_named(&join(prefix, "nalu"), f)),
            ModelParams::AblationStack(p) => {
                ModelParams::AblationStack(p.map_named(&join(prefix, "ablation"), f))
            }
            ModelParams::Recurrent { cell, head } => ModelParams::Recurrent {
                cell: cell.map_named(&join(prefix, "cell"), f),
                head: head.map_named(&join(prefix, "head"), f),
            },
            ModelParams::Language {
                embedding,
                cell,
                head,
            } => ModelParams::Language {
                embedding: embedding.map_named(&join(prefix, "embedding"), f),
                cell: cell.map_named(&join(prefix, "cell"), f),
                head: head.map_named(&join(prefix, "head"), f),
            },
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut T)) {
        match self {
            ModelParams::Mlp(p) => p.visit_mut(prefix, f),
            ModelParams::NacStack(p) => p.visit_mut(&join(prefix, "nac"), f),
            ModelParams::NaluStack(p) => p.visit_mut(&join(prefix, "nalu"), f),
            ModelParams::AblationStack(p) => p.visit_mut(&join(prefix, "ablation"), f),
            ModelParams::Recurrent { cell, head } => {
                cell.visit_mut(&join(prefix, "cell"), f);
                head.visit_mut(&join(prefix, "head"), f);
            }
            ModelParams::Language {
                embedding,
                cell,
                head,
            } => {
                embedding.visit_mut(&join(prefix, "embedding"), f);
                cell.visit_mut(&join(prefix, "cell"), f);
                head.visit_mut(&join(prefix, "head"), f);
            }
        }
    }
}

fn check_widths(widths: &[usize]) -> Result<(), LayerError> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(LayerError::InvalidConfig(format!(
            "layer widths must list input and output, all positive: {widths:?}"
        )));
    }
    Ok(())
}

fn init_head<R: Rng + ?Sized>(head: HeadKind, input: usize, rng: &mut R) -> Result<HeadParams, LayerError> {
    Ok(match head {
        HeadKind::Linear => HeadParams::Linear(init_affine(input, 1, true, rng)),
        HeadKind::Nac => HeadParams::Nac(init_nac(input, 1, rng)?),
        HeadKind::Nalu => HeadParams::Nalu(init_nalu(input, 1, DEFAULT_EPSILON, true, rng)?),
    })
}

/// Draws fresh parameters for `spec`; deterministic given the generator state.
pub fn init_params<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<ModelParams, LayerError> {
    Ok(match spec {
        ModelSpec::Mlp(m) => ModelParams::Mlp(init_mlp(m, rng)?),
        ModelSpec::NacStack { widths } => {
            check_widths(widths)?;
            ModelParams::NacStack(
                widths
                    .windows(2)
                    .map(|w| init_nac(w[0], w[1], rng))
                    .collect::<Result<_, _>>()?,
            )
        }
        ModelSpec::NaluStack {
            widths,
            epsilon,
            tied,
        } => {
            check_widths(widths)?;
            ModelParams::NaluStack(
                widths
                    .windows(2)
                    .map(|w| init_nalu(w[0], w[1], *epsilon, *tied, rng))
                    .collect::<Result<_, _>>()?,
            )
        }
        ModelSpec::AblationStack { variant, widths } => {
            check_widths(widths)?;
            ModelParams::AblationStack(
                widths
                    .windows(2)
                    .map(|w| init_ablation(*variant, w[0], w[1], rng))
                    .collect::<Result<_, _>>()?,
            )
        }
        ModelSpec::Recurrent {
            cell,
            input,
            hidden,
            head,
        } => ModelParams::Recurrent {
            cell: init_cell(*cell, *input, *hidden, rng)?,
            head: init_head(*head, *hidden, rng)?,
        },
        ModelSpec::Language {
            vocab,
            embed,
            hidden,
            head,
            ..
        } => {
            if *vocab == 0 || *embed == 0 {
                return Err(LayerError::InvalidConfig("vocab and embed must be positive".into()));
            }
            ModelParams::Language {
                embedding: Leaf(uniform_matrix(*vocab, *embed, rng)),
                cell: init_cell(CellKind::Lstm, *embed, *hidden, rng)?,
                head: init_head(*head, *hidden, rng)?,
            }
        }
    })
}

/// Model input: one row batch, or one row batch per time step.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelInput {
    Batch(Tensor),
    Sequence(Vec<Tensor>),
}

impl ModelInput {
    pub fn batch_size(&self) -> usize {
        match self {
            ModelInput::Batch(t) => t.dims2().0,
            ModelInput::Sequence(steps) => steps.first().map_or(0, |t| t.dims2().0),
        }
    }
}

fn mismatch(spec: &ModelSpec, params: &str) -> LayerError {
    LayerError::InvalidConfig(format!("parameters `{params}` do not match model {}", spec.tag()))
}

/// Forward pass producing a `[batch, 1]` prediction.
pub fn model_forward(
    tape: &mut Tape,
    spec: &ModelSpec,
    p: &ModelParams<Var>,
    input: &ModelInput,
) -> Result<Var, LayerError> {
    match (spec, input) {
        (ModelSpec::Recurrent { .. } | ModelSpec::Language { .. }, ModelInput::Sequence(steps)) => {
            sequence_forward(tape, spec, p, steps).map(|(y, _)| y)
        }
        (_, ModelInput::Batch(x)) if !spec.is_sequence() => {
            let x = tape.constant(x.clone());
            static_forward(tape, spec, p, x)
        }
        _ => Err(LayerError::InvalidConfig(format!(
            "input kind does not match model {}",
            spec.tag()
        ))),
    }
}

pub fn static_forward(
    tape: &mut Tape,
    spec: &ModelSpec,
    p: &ModelParams<Var>,
    x: Var,
) -> Result<Var, LayerError> {
    let mut h = x;
    match (spec, p) {
        (ModelSpec::Mlp(m), ModelParams::Mlp(mp)) => return mlp_forward(tape, m, mp, x),
        (ModelSpec::NacStack { .. }, ModelParams::NacStack(layers)) => {
            for l in layers {
                h = nac_forward(tape, l, h)?;
            }
        }
        (ModelSpec::NaluStack { .. }, ModelParams::NaluStack(layers)) => {
            for l in layers {
                h = nalu_forward(tape, l, h)?;
            }
        }
        (ModelSpec::AblationStack { variant, .. }, ModelParams::AblationStack(layers)) => {
            for l in layers {
                h = ablation_forward(tape, *variant, l, h)?;
            }
        }
        _ => return Err(mismatch(spec, "static")),
    }
    Ok(h)
}

/// Runs a sequence model; returns the prediction and the per-step head
/// outputs (the latter only for the number-phrase reader).
pub fn sequence_forward(
    tape: &mut Tape,
    spec: &ModelSpec,
    p: &ModelParams<Var>,
    steps: &[Tensor],
) -> Result<(Var, Vec<Var>), LayerError> {
    if steps.is_empty() {
        return Err(LayerError::InvalidConfig("empty sequence".into()));
    }
    let batch = steps[0].dims2().0;
    match (spec, p) {
        (ModelSpec::Recurrent { .. }, ModelParams::Recurrent { cell, head }) => {
            let mut state = initial_state(tape, cell, Some(batch));
            for x in steps {
                let xv = tape.constant(x.clone());
                state = cell_step(tape, cell, xv, &state)?.1;
            }
            Ok((head_forward(tape, head, state.h)?, Vec::new()))
        }
        (
            ModelSpec::Language { summed_state, .. },
            ModelParams::Language {
                embedding,
                cell,
                head,
            },
        ) => {
            let mut state = initial_state(tape, cell, Some(batch));
            let mut trace = Vec::with_capacity(steps.len());
            let mut summed: Option<Var> = None;
            for x in steps {
                let onehot = tape.constant(x.clone());
                let e = tape.matmul(onehot, embedding.0)?;
                state = cell_step(tape, cell, e, &state)?.1;
                if *summed_state {
                    summed = Some(match summed {
                        None => state.h,
                        Some(s) => tape.add(s, state.h)?,
                    });
                    trace.push(head_forward(tape, head, summed.expect("set above"))?);
                } else {
                    trace.push(head_forward(tape, head, state.h)?);
                }
            }
            let last = *trace.last().expect("nonempty sequence");
            Ok((last, trace))
        }
        _ => Err(mismatch(spec, "sequence")),
    }
}
