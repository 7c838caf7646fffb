//! Fan-based uniform initialisation. Every weight matrix (including the
//! NAC/NALU `w_hat`, `m_hat` and gate matrices) is drawn from
//! `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`; biases start at zero.

use rand::Rng;

use super::ablation::{AblationParams, AblationVariant};
use super::cell::{CellKind, CellParams, CellWeights};
use super::mlp::{AffineParams, MlpParams, MlpSpec};
use super::nac::NacParams;
use super::nalu::NaluParams;
use super::params::Leaf;
use super::LayerError;
use crate::autodiff::PRELU_INIT;
use crate::tensor::Tensor;

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `rows x cols` matrix with `fan_in = cols`, `fan_out = rows`.
pub fn uniform_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let bound = glorot_bound(cols, rows);
    Tensor::from_fn(&[rows, cols], |_| rng.gen_range(-bound..bound))
}

fn check_dims(dims: &[usize]) -> Result<(), LayerError> {
    if dims.contains(&0) {
        Err(LayerError::InvalidConfig(format!("widths must be positive: {dims:?}")))
    } else {
        Ok(())
    }
}

pub fn init_affine<R: Rng + ?Sized>(input: usize, output: usize, bias: bool, rng: &mut R) -> AffineParams {
    AffineParams {
        w: uniform_matrix(output, input, rng),
        b: bias.then(|| Tensor::zeros(&[output])),
    }
}

pub fn init_nac<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Result<NacParams, LayerError> {
    check_dims(&[input, output])?;
    Ok(NacParams {
        w_hat: uniform_matrix(output, input, rng),
        m_hat: uniform_matrix(output, input, rng),
    })
}

pub fn init_nalu<R: Rng + ?Sized>(
    input: usize,
    output: usize,
    epsilon: f64,
    tied: bool,
    rng: &mut R,
) -> Result<NaluParams, LayerError> {
    if !(epsilon > 0.0) {
        return Err(LayerError::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    let nac = init_nac(input, output, rng)?;
    let g_mat = uniform_matrix(output, input, rng);
    let mul_nac = if tied { None } else { Some(init_nac(input, output, rng)?) };
    Ok(NaluParams {
        nac,
        g_mat,
        mul_nac,
        epsilon,
    })
}

pub fn init_mlp<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Result<MlpParams, LayerError> {
    spec.validate()?;
    let dims = spec.layer_dims();
    let layers = dims
        .iter()
        .map(|&(i, o)| init_affine(i, o, true, rng))
        .collect();
    let slopes = if spec.activation.has_slope() {
        (0..dims.len() - 1)
            .map(|_| Leaf(Tensor::scalar(PRELU_INIT)))
            .collect()
    } else {
        Vec::new()
    };
    Ok(MlpParams { layers, slopes })
}

pub fn init_ablation<R: Rng + ?Sized>(
    variant: AblationVariant,
    input: usize,
    output: usize,
    rng: &mut R,
) -> Result<AblationParams, LayerError> {
    check_dims(&[input, output])?;
    Ok(match variant {
        AblationVariant::Nac => AblationParams::Nac(init_nac(input, output, rng)?),
        v => AblationParams::Weighted(init_affine(input, output, v.has_bias(), rng)),
    })
}

pub fn init_cell<R: Rng + ?Sized>(
    kind: CellKind,
    input: usize,
    hidden: usize,
    rng: &mut R,
) -> Result<CellParams, LayerError> {
    check_dims(&[input, hidden])?;
    let z = input + hidden;
    let weights = match kind {
        CellKind::RnnTanh | CellKind::RnnRelu => CellWeights::Rnn(init_affine(z, hidden, true, rng)),
        CellKind::Lstm => CellWeights::Lstm {
            input: init_affine(z, hidden, true, rng),
            forget: init_affine(z, hidden, true, rng),
            cell: init_affine(z, hidden, true, rng),
            output: init_affine(z, hidden, true, rng),
        },
        CellKind::Gru => CellWeights::Gru {
            reset: init_affine(z, hidden, true, rng),
            update: init_affine(z, hidden, true, rng),
            candidate: init_affine(z, hidden, true, rng),
        },
        CellKind::RecurrentNac => CellWeights::Nac(init_nac(z, hidden, rng)?),
        CellKind::RecurrentNalu => {
            CellWeights::Nalu(init_nalu(z, hidden, super::nalu::DEFAULT_EPSILON, true, rng)?)
        }
    };
    Ok(CellParams {
        kind,
        input,
        hidden,
        weights,
    })
}
