//! Optimizers, the training loop, evaluation, score normalisation and
//! experiment grids.

mod eval;
mod grid;
mod optim;
mod results;
mod train;

pub use eval::{
    evaluate, evaluate_metrics, median, metrics_of, normalized_score, predict, random_baseline_mse, Metric, Metrics,
    BASELINE_INITS,
};
pub use grid::{
    identity_model, language_model, recurrent_model, reference_model, run_experiment_grid, run_pool, static_model,
    Experiment, GridOutput, GridSpec, RawCurve, IDENTITY_MODELS, LANGUAGE_MODELS, RECURRENT_MODELS, STATIC_MODELS,
    SYNTHETIC_LEARNING_RATE,
};
pub use optim::{adam_step, sgd_step, AdamState, Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use results::{read_results_csv, write_results_csv, write_results_jsonl, RunResult};
pub use train::{
    batch_loss, train_model, Batch, BatchSource, CurvePoint, FullBatch, IdentitySource, LossKind, RunStatus,
    TaskSource, TrainConfig, TrainOutcome,
};

use crate::error::AutodiffError;
use crate::layers::LayerError;
use crate::tasks::TaskError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("non-finite gradient for parameter {index}")]
    NonFiniteGradient { index: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("config file: {0}")]
    Config(String),
}
