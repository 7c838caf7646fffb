//! Parameter files: the model spec plus a flat map from dotted parameter
//! name to `{shape, data}` in row-major order.
//!
//! `f64` values are written with round-trip precision, so a save/load cycle
//! is bitwise exact. Non-finite parameters cannot be represented in JSON
//! and are rejected on save.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use super::model::{init_params, ModelParams, ModelSpec};
use super::params::{flatten, ParamTree};
use super::LayerError;
use crate::seed;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub spec: ModelSpec,
    pub params: BTreeMap<String, Tensor>,
}

pub fn save_model_string(spec: &ModelSpec, params: &ModelParams) -> Result<String, LayerError> {
    let mut map = BTreeMap::new();
    for (name, t) in flatten(params) {
        if !t.all_finite() {
            return Err(LayerError::Params(format!("parameter `{name}` is not finite")));
        }
        map.insert(name, t);
    }
    let doc = SavedModel {
        spec: spec.clone(),
        params: map,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| LayerError::Params(e.to_string()))
}

pub fn save_model(path: &Path, spec: &ModelSpec, params: &ModelParams) -> Result<(), LayerError> {
    std::fs::write(path, save_model_string(spec, params)?)?;
    Ok(())
}

pub fn load_model_str(text: &str) -> Result<(ModelSpec, ModelParams), LayerError> {
    let mut doc: SavedModel = serde_json::from_str(text).map_err(|e| LayerError::Params(e.to_string()))?;
    let mut params = init_params(&doc.spec, &mut seed::rng(0))?;
    let mut problem = None;
    params.visit_mut("", &mut |name, slot| {
        if problem.is_some() {
            return;
        }
        match doc.params.remove(name) {
            None => problem = Some(format!("missing parameter `{name}`")),
            Some(t) if t.shape() != slot.shape() => {
                problem = Some(format!(
                    "parameter `{name}` has shape {:?}, expected {:?}",
                    t.shape(),
                    slot.shape()
                ))
            }
            Some(t) => *slot = t,
        }
    });
    if let Some(p) = problem {
        return Err(LayerError::Params(p));
    }
    if let Some(extra) = doc.params.keys().next() {
        return Err(LayerError::Params(format!("unexpected parameter `{extra}`")));
    }
    Ok((doc.spec, params))
}

pub fn load_model(path: &Path) -> Result<(ModelSpec, ModelParams), LayerError> {
    load_model_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ActivationKind;
    use crate::layers::{CellKind, HeadKind, MlpSpec, DEFAULT_EPSILON};

    fn bits(p: &ModelParams) -> Vec<(String, Vec<u64>)> {
        flatten(p)
            .into_iter()
            .map(|(n, t)| (n, t.data().iter().map(|v| v.to_bits()).collect()))
            .collect()
    }

    #[test]
    fn round_trip_is_bitwise_for_every_model_kind() {
        let specs = [
            ModelSpec::Mlp(MlpSpec::new(vec![5, 3, 1], ActivationKind::Prelu)),
            ModelSpec::NaluStack {
                widths: vec![5, 2, 1],
                epsilon: DEFAULT_EPSILON,
                tied: false,
            },
            ModelSpec::Recurrent {
                cell: CellKind::Gru,
                input: 3,
                hidden: 2,
                head: HeadKind::Linear,
            },
            ModelSpec::Language {
                vocab: 7,
                embed: 4,
                hidden: 4,
                head: HeadKind::Nac,
                summed_state: false,
            },
        ];
        for spec in specs {
            let p = init_params(&spec, &mut seed::rng(11)).unwrap();
            let text = save_model_string(&spec, &p).unwrap();
            let (spec2, p2) = load_model_str(&text).unwrap();
            assert_eq!(spec2, spec);
            assert_eq!(bits(&p2), bits(&p));
        }
    }

    #[test]
    fn shape_and_name_mismatches_are_rejected() {
        let spec = ModelSpec::NacStack { widths: vec![3, 1] };
        let p = init_params(&spec, &mut seed::rng(1)).unwrap();
        let text = save_model_string(&spec, &p).unwrap();
        let mut doc: SavedModel = serde_json::from_str(&text).unwrap();
        doc.params.insert("nac.0.w_hat".into(), Tensor::zeros(&[2, 3]));
        assert!(load_model_str(&serde_json::to_string(&doc).unwrap()).is_err());

        let mut doc: SavedModel = serde_json::from_str(&text).unwrap();
        doc.params.insert("bogus".into(), Tensor::zeros(&[1]));
        assert!(load_model_str(&serde_json::to_string(&doc).unwrap()).is_err());
    }

    #[test]
    fn non_finite_parameters_refuse_to_save() {
        let spec = ModelSpec::NacStack { widths: vec![2, 1] };
        let mut p = init_params(&spec, &mut seed::rng(1)).unwrap();
        p.visit_mut("", &mut |_, t| t.data_mut()[0] = f64::NAN);
        assert!(save_model_string(&spec, &p).is_err());
    }
}
