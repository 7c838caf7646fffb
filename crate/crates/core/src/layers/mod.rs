//! Network layers built on the gradient tape.

mod ablation;
mod cell;
pub mod init;
mod mlp;
mod model;
mod nac;
mod nalu;
mod params;
mod serialize;
mod suite;

pub use ablation::{ablation_forward, AblationParams, AblationVariant};
pub use cell::{cell_step, initial_state, CellKind, CellParams, CellState, CellWeights};
pub use init::{glorot_bound, init_ablation, init_affine, init_cell, init_mlp, init_nac, init_nalu};
pub use mlp::{affine_forward, mlp_forward, AffineParams, MlpParams, MlpSpec};
pub use model::{
    head_forward, init_params, model_forward, sequence_forward, static_forward, HeadKind, HeadParams,
    ModelInput, ModelParams, ModelSpec,
};
pub use nac::{nac_effective_weights, nac_forward, NacParams};
pub use nalu::{nalu_forward, nalu_trace, NaluParams, NaluTrace, DEFAULT_EPSILON};
pub use params::{bind, bind_frozen, collect_grads, flatten, param_count, Leaf, ParamTree};
pub use serialize::{load_model, load_model_str, save_model, save_model_string, SavedModel};
pub use suite::{gradient_suite, SuiteEntry, GRADIENT_STEP, GRADIENT_TOLERANCE};

use crate::autodiff::{Tape, Var};
use crate::error::AutodiffError;

#[derive(Debug, thiserror::Error)]
pub enum LayerError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("non-finite values in the {path} path")]
    NonFinite { path: &'static str },
    #[error("layer {layer} expects input width {expected}, got {got}")]
    Width {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parameter file: {0}")]
    Params(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LayerError {
    /// Folds the error into the tape error type, e.g. inside a gradient-check closure.
    pub fn into_autodiff(self) -> AutodiffError {
        match self {
            LayerError::Autodiff(e) => e,
            other => AutodiffError::Domain {
                op: "layer",
                detail: other.to_string(),
            },
        }
    }
}

/// `W x` for a single vector or `X W^T` for a row batch.
pub(crate) fn linear(tape: &mut Tape, w: Var, x: Var) -> Result<Var, LayerError> {
    if tape.value(x).rank() == 1 {
        Ok(tape.matmul(w, x)?)
    } else {
        Ok(tape.matmul_t(x, w)?)
    }
}
