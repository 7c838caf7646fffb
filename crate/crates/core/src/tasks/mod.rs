//! Seeded generators and targets for the identity, arithmetic and
//! number-phrase tasks.

mod arithmetic;
mod dataset;
mod identity;
mod language;

pub use arithmetic::{
    apply_op, make_recurrent_task, make_static_task, make_task, recurrent_target, sample_batch,
    sample_recurrent_batch, static_target, subsection_sums, ArithmeticOp, TaskInstance,
    DIVISION_GUARD, EXTRAP_SCALE, RECURRENT_EXTRAP_LEN, RECURRENT_INPUT_DIM, RECURRENT_TRAIN_LEN,
    STATIC_INPUT_DIM, TRAIN_SCALE,
};
pub use dataset::{Dataset, Regime};
pub use identity::{identity_dataset, identity_training_batch};
pub use language::{
    build_language_splits, language_dataset, number_to_words, phrase_ids, vocabulary, words_to_number, LanguageSplits,
    LANGUAGE_MAX,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TaskError {
    #[error("denominator {b} is inside the guard band")]
    DivisionGuard { b: f64 },
    #[error("square root of negative value {a}")]
    NegativeSqrt { a: f64 },
    #[error("input has {got} values per step, task expects {expected}")]
    InputWidth { expected: usize, got: usize },
    #[error("value {0} is outside 0..=1000")]
    OutOfRange(i64),
    #[error("cannot parse number phrase `{0}`")]
    Unparseable(String),
    #[error("invalid task configuration: {0}")]
    InvalidConfig(String),
}
