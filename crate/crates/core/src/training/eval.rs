//! Read-only evaluation of trained parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::autodiff::Tape;
use crate::layers::{bind_frozen, init_params, model_forward, LayerError, ModelParams, ModelSpec};
use crate::tasks::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mse,
    Mae,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
}

/// Roughly this many sequence steps are placed on one tape.
const SEQUENCE_BUDGET: usize = 20_000;
const STATIC_CHUNK: usize = 1024;

fn chunk_size(d: &Dataset) -> usize {
    if d.is_sequence() {
        (SEQUENCE_BUDGET / d.inputs[0].dims2().0).max(1)
    } else {
        STATIC_CHUNK
    }
}

/// Model outputs for every example. A forward pass that overflows yields
/// infinite predictions for its chunk.
pub fn predict(params: &ModelParams, spec: &ModelSpec, data: &Dataset) -> Result<Vec<f64>, TrainError> {
    if data.is_empty() {
        return Err(TrainError::InvalidConfig("cannot evaluate an empty dataset".into()));
    }
    let chunk = chunk_size(data);
    let mut out = Vec::with_capacity(data.len());
    let mut start = 0;
    while start < data.len() {
        let end = (start + chunk).min(data.len());
        let mut tape = Tape::new();
        let bound = bind_frozen(params, &mut tape);
        match model_forward(&mut tape, spec, &bound, &data.model_input(start, end)) {
            Ok(y) => out.extend_from_slice(tape.value(y).data()),
            Err(LayerError::NonFinite { .. }) => out.extend(std::iter::repeat(f64::INFINITY).take(end - start)),
            Err(e) => return Err(e.into()),
        }
        start = end;
    }
    if out.len() != data.len() {
        return Err(TrainError::InvalidConfig(format!(
            "model produced {} outputs for {} examples",
            out.len(),
            data.len()
        )));
    }
    Ok(out)
}

pub fn metrics_of(predictions: &[f64], targets: &[f64]) -> Metrics {
    let n = targets.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, t) in predictions.iter().zip(targets) {
        let d = p - t;
        se += d * d;
        ae += d.abs();
    }
    Metrics {
        mse: se / n,
        mae: ae / n,
    }
}

pub fn evaluate_metrics(params: &ModelParams, spec: &ModelSpec, data: &Dataset) -> Result<Metrics, TrainError> {
    Ok(metrics_of(&predict(params, spec, data)?, &data.targets))
}

/// Mean per-example metric; never touches `params`.
pub fn evaluate(params: &ModelParams, spec: &ModelSpec, data: &Dataset, metric: Metric) -> Result<f64, TrainError> {
    let m = evaluate_metrics(params, spec, data)?;
    Ok(match metric {
        Metric::Mse => m.mse,
        Metric::Mae => m.mae,
    })
}

/// `100 * model_mse / random_mse`.
pub fn normalized_score(model_mse: f64, random_mse: f64) -> Result<f64, TrainError> {
    if !(random_mse > 0.0) {
        return Err(TrainError::InvalidConfig(format!(
            "random baseline error must be positive, got {random_mse}"
        )));
    }
    Ok(100.0 * model_mse / random_mse)
}

pub const BASELINE_INITS: usize = 10;

/// Mean MSE of [`BASELINE_INITS`] untrained instances of `reference` on `data`.
pub fn random_baseline_mse<R: Rng + ?Sized>(
    reference: &ModelSpec,
    data: &Dataset,
    rng: &mut R,
) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for _ in 0..BASELINE_INITS {
        let p = init_params(reference, rng)?;
        total += evaluate(&p, reference, data, Metric::Mse)?;
    }
    Ok(total / BASELINE_INITS as f64)
}

/// Median of finite and infinite values alike; NaN sorts last.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
