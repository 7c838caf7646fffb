//! Intermediate layers between a plain affine map and a NAC: weight
//! squashing with or without a bias.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::mlp::AffineParams;
use super::nac::{nac_forward, NacParams};
use super::params::ParamTree;
use super::{linear, LayerError};
use crate::autodiff::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    /// `W x + b`
    AffineBias,
    /// `sigmoid(W) x + b`
    SigmoidWBias,
    /// `tanh(W) x + b`
    TanhWBias,
    /// `W x`
    AffineNoBias,
    /// `sigmoid(W) x`
    SigmoidWNoBias,
    /// `tanh(W) x`
    TanhWNoBias,
    /// `(tanh(W_hat) * sigmoid(M_hat)) x`
    Nac,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 7] = [
        AblationVariant::AffineBias,
        AblationVariant::SigmoidWBias,
        AblationVariant::TanhWBias,
        AblationVariant::AffineNoBias,
        AblationVariant::SigmoidWNoBias,
        AblationVariant::TanhWNoBias,
        AblationVariant::Nac,
    ];

    pub fn has_bias(self) -> bool {
        matches!(
            self,
            AblationVariant::AffineBias | AblationVariant::SigmoidWBias | AblationVariant::TanhWBias
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::AffineBias => "affine_bias",
            AblationVariant::SigmoidWBias => "sigmoid_w_bias",
            AblationVariant::TanhWBias => "tanh_w_bias",
            AblationVariant::AffineNoBias => "affine_no_bias",
            AblationVariant::SigmoidWNoBias => "sigmoid_w_no_bias",
            AblationVariant::TanhWNoBias => "tanh_w_no_bias",
            AblationVariant::Nac => "nac",
        }
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        AblationVariant::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| format!("unknown ablation variant `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AblationParams<T = Tensor> {
    Weighted(AffineParams<T>),
    Nac(NacParams<T>),
}

impl<T> ParamTree for AblationParams<T> {
    type Elem = T;
    type Mapped<U> = AblationParams<U>;

    fn map_named<U>(&self, prefix: &str, f: &mut dyn FnMut(&str, &T) -> U) -> AblationParams<U> {
        match self {
            AblationParams::Weighted(p) => AblationParams::Weighted(p.map_named(prefix, f)),
            AblationParams::Nac(p) => AblationParams::Nac(p.map_named(prefix, f)),
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut T)) {
        match self {
            AblationParams::Weighted(p) => p.visit_mut(prefix, f),
            AblationParams::Nac(p) => p.visit_mut(prefix, f),
        }
    }
}

pub fn ablation_forward(
    tape: &mut Tape,
    variant: AblationVariant,
    p: &AblationParams<Var>,
    x: Var,
) -> Result<Var, LayerError> {
    let mismatch = || LayerError::InvalidConfig(format!("parameters do not match variant {variant}"));
    match (variant, p) {
        (AblationVariant::Nac, AblationParams::Nac(nac)) => nac_forward(tape, nac, x),
        (AblationVariant::Nac, _) | (_, AblationParams::Nac(_)) => Err(mismatch()),
        (v, AblationParams::Weighted(aff)) => {
            if v.has_bias() != aff.b.is_some() {
                return Err(mismatch());
            }
            let w = match v {
                AblationVariant::SigmoidWBias | AblationVariant::SigmoidWNoBias => tape.sigmoid(aff.w)?,
                AblationVariant::TanhWBias | AblationVariant::TanhWNoBias => tape.tanh(aff.w)?,
                _ => aff.w,
            };
            let y = linear(tape, w, x)?;
            match aff.b {
                None => Ok(y),
                Some(b) if tape.value(y).rank() == 1 => Ok(tape.add(y, b)?),
                Some(b) => Ok(tape.add_row(y, b)?),
            }
        }
    }
}
