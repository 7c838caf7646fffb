//! The training loop and its batch sources.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{Optimizer, OptimizerKind};
use super::TrainError;
use crate::autodiff::{Tape, Var};
use crate::layers::{bind, collect_grads, flatten, model_forward, LayerError, ModelInput, ModelParams, ModelSpec, ParamTree};
use crate::tasks::{identity_training_batch, sample_batch, sample_recurrent_batch, Dataset, Regime, TaskInstance};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    MeanSquaredError,
    MeanAbsoluteError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossKind,
    /// Loss is recorded every this many steps (0 picks about 100 points).
    pub log_every: usize,
}

impl TrainConfig {
    /// Adam, lr 1e-3, batch 64, squared error.
    pub fn adam(steps: usize, seed: u64) -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            steps,
            batch_size: 64,
            seed,
            loss: LossKind::MeanSquaredError,
            log_every: 0,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }

    fn log_interval(&self) -> usize {
        if self.log_every > 0 {
            self.log_every
        } else {
            (self.steps / 100).max(1)
        }
    }
}

/// One group of equally shaped examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub input: ModelInput,
    /// `[batch, 1]`
    pub targets: Tensor,
}

impl Batch {
    pub fn from_dataset(d: &Dataset) -> Self {
        Batch {
            input: d.model_input(0, d.len()),
            targets: d.target_column(0, d.len()),
        }
    }

    pub fn len(&self) -> usize {
        self.targets.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Supplies the examples for each optimisation step.
pub trait BatchSource {
    fn next_batch(&mut self, batch_size: usize) -> Result<Vec<Batch>, TrainError>;
}

/// Fresh arithmetic examples from the task's training stream.
pub struct TaskSource {
    task: TaskInstance,
    /// `None` for static inputs, otherwise the sequence length.
    seq_len: Option<usize>,
    rng: ChaCha8Rng,
}

impl TaskSource {
    pub fn new(task: TaskInstance, seq_len: Option<usize>, stream: u64) -> Self {
        Self {
            rng: task.stream(Regime::Train, stream),
            task,
            seq_len,
        }
    }
}

impl BatchSource for TaskSource {
    fn next_batch(&mut self, batch_size: usize) -> Result<Vec<Batch>, TrainError> {
        let d = match self.seq_len {
            None => sample_batch(&self.task, Regime::Train, batch_size, &mut self.rng)?,
            Some(t) => sample_recurrent_batch(&self.task, t, Regime::Train, batch_size, &mut self.rng)?,
        };
        Ok(vec![Batch::from_dataset(&d)])
    }
}

/// Uniform identity-task draws.
pub struct IdentitySource {
    pub lo: f64,
    pub hi: f64,
    pub rng: ChaCha8Rng,
}

impl BatchSource for IdentitySource {
    fn next_batch(&mut self, batch_size: usize) -> Result<Vec<Batch>, TrainError> {
        let d = identity_training_batch(self.lo, self.hi, batch_size, &mut self.rng)?;
        Ok(vec![Batch::from_dataset(&d)])
    }
}

/// The same full set of groups at every step; the batch size is ignored.
pub struct FullBatch(pub Vec<Batch>);

impl BatchSource for FullBatch {
    fn next_batch(&mut self, _batch_size: usize) -> Result<Vec<Batch>, TrainError> {
        Ok(self.0.clone())
    }
}

/// Mean per-example loss over every group.
pub fn batch_loss(
    tape: &mut Tape,
    spec: &ModelSpec,
    params: &ModelParams<Var>,
    batches: &[Batch],
    loss: LossKind,
) -> Result<Var, LayerError> {
    let total: usize = batches.iter().map(Batch::len).sum();
    if total == 0 {
        return Err(LayerError::InvalidConfig("empty batch".into()));
    }
    let mut acc: Option<Var> = None;
    for b in batches {
        let pred = model_forward(tape, spec, params, &b.input)?;
        let y = tape.constant(b.targets.clone());
        let d = tape.sub(pred, y)?;
        let per = match loss {
            LossKind::MeanSquaredError => tape.square(d)?,
            LossKind::MeanAbsoluteError => tape.abs(d)?,
        };
        let s = tape.sum(per)?;
        acc = Some(match acc {
            None => s,
            Some(a) => tape.add(a, s)?,
        });
    }
    Ok(tape.scale(acc.expect("at least one group"), 1.0 / total as f64)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { step: usize, reason: String },
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Completed => "ok",
            RunStatus::Diverged { .. } => "diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the last accepted update.
    pub params: ModelParams,
    pub curve: Vec<CurvePoint>,
    pub status: RunStatus,
    pub steps_run: usize,
    /// Updates skipped because of non-finite gradients.
    pub rejected_steps: usize,
}

fn unflatten(params: &mut ModelParams, flat: Vec<Tensor>) {
    let mut it = flat.into_iter();
    params.visit_mut("", &mut |_, t| *t = it.next().expect("same traversal order"));
}

/// Trains from `init`. A non-finite loss stops the run early and marks it
/// diverged; the last good parameters are returned.
pub fn train_model<S: BatchSource + ?Sized>(
    spec: &ModelSpec,
    init: &ModelParams,
    source: &mut S,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let mut params = init.clone();
    let mut flat: Vec<Tensor> = flatten(&params).into_iter().map(|(_, t)| t).collect();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &flat);
    let interval = config.log_interval();
    let mut curve = Vec::new();
    let mut rejected = 0;
    let mut status = RunStatus::Completed;
    let mut steps_run = 0;

    for step in 0..config.steps {
        let batches = source.next_batch(config.batch_size)?;
        let mut tape = Tape::new();
        let bound = bind(&params, &mut tape);
        let loss = match batch_loss(&mut tape, spec, &bound, &batches, config.loss) {
            Ok(l) => l,
            Err(LayerError::NonFinite { path }) => {
                status = RunStatus::Diverged {
                    step,
                    reason: format!("non-finite {path} path"),
                };
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let value = tape.value(loss).item();
        if !value.is_finite() {
            status = RunStatus::Diverged {
                step,
                reason: format!("loss became {value}"),
            };
            break;
        }
        if step % interval == 0 {
            curve.push(CurvePoint { step, loss: value });
        }
        let grads = tape.backward(loss)?;
        let g = collect_grads(&bound, &grads);
        match opt.step(&mut flat, &g) {
            Ok(()) => unflatten(&mut params, flat.clone()),
            Err(TrainError::NonFiniteGradient { .. }) => rejected += 1,
            Err(e) => return Err(e),
        }
        steps_run = step + 1;
    }

    if matches!(status, RunStatus::Completed) && config.steps > 0 {
        // closing point on a fresh batch
        let batches = source.next_batch(config.batch_size)?;
        let mut tape = Tape::new();
        let bound = crate::layers::bind_frozen(&params, &mut tape);
        if let Ok(l) = batch_loss(&mut tape, spec, &bound, &batches, config.loss) {
            curve.push(CurvePoint {
                step: config.steps,
                loss: tape.value(l).item(),
            });
        }
    }

    Ok(TrainOutcome {
        params,
        curve,
        status,
        steps_run,
        rejected_steps: rejected,
    })
}
