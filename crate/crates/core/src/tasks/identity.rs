//! Scalar identity task: reproduce the input.

use rand::Rng;

use super::dataset::{Dataset, Regime};
use super::TaskError;
use crate::tensor::Tensor;

fn check(lo: f64, hi: f64, count: usize) -> Result<(), TaskError> {
    if !(lo < hi) || count == 0 {
        return Err(TaskError::InvalidConfig(format!(
            "need lo < hi and a positive count, got [{lo}, {hi}] x {count}"
        )));
    }
    Ok(())
}

/// Evenly spaced evaluation grid over `[lo, hi]`, endpoints included.
pub fn identity_dataset(lo: f64, hi: f64, count: usize) -> Result<Dataset, TaskError> {
    check(lo, hi, count)?;
    let xs: Vec<f64> = if count == 1 {
        vec![lo]
    } else {
        let step = (hi - lo) / (count - 1) as f64;
        (0..count)
            .map(|i| if i == count - 1 { hi } else { lo + step * i as f64 })
            .collect()
    };
    Ok(Dataset {
        inputs: xs.iter().map(|&x| Tensor::vector(vec![x])).collect(),
        targets: xs,
        regime: Regime::Extrapolation,
    })
}

/// Uniform training draws on `[lo, hi)`.
pub fn identity_training_batch<R: Rng + ?Sized>(
    lo: f64,
    hi: f64,
    count: usize,
    rng: &mut R,
) -> Result<Dataset, TaskError> {
    check(lo, hi, count)?;
    let xs: Vec<f64> = (0..count).map(|_| rng.gen_range(lo..hi)).collect();
    Ok(Dataset {
        inputs: xs.iter().map(|&x| Tensor::vector(vec![x])).collect(),
        targets: xs,
        regime: Regime::Train,
    })
}
