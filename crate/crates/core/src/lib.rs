//! Differentiable-computation workbench for neural accumulators (NAC) and
//! neural arithmetic logic units (NALU).
//!
//! The crate is organised bottom-up:
//!
//! * [`autodiff`]: dense `f64` tensors on a define-by-run gradient tape.
//! * [`layers`]: affine/MLP baselines, NAC, NALU, ablation variants and
//!   recurrent cells, with parameter initialisation and JSON persistence.
//! * [`tasks`]: seeded generators for the identity, static and recurrent
//!   arithmetic, and number-phrase tasks.
//! * [`training`]: optimizers, training loops, evaluation, score
//!   normalisation and experiment grids.
//! * [`reporting`]: score tables and plot-ready CSV series.

pub mod autodiff;
pub mod error;
pub mod layers;
pub mod reporting;
pub mod seed;
pub mod tasks;
pub mod tensor;
pub mod training;

pub use error::{AutodiffError, ShapeError};
pub use tensor::Tensor;
