//! Finite-difference gradient suite over every layer and cell.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{init_params, model_forward, HeadKind, ModelInput, ModelSpec};
use super::nalu::DEFAULT_EPSILON;
use super::params::{bind_frozen, flatten, ParamTree};
use super::{AblationVariant, CellKind, MlpSpec};
use crate::autodiff::{grad_check_report, ActivationKind, Tape};
use crate::seed;
use crate::tensor::Tensor;

pub const GRADIENT_TOLERANCE: f64 = 1e-5;
pub const GRADIENT_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub layer: String,
    pub instances: usize,
    pub max_rel_error: f64,
    /// Instances whose check could not be evaluated (non-finite loss).
    pub errors: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy)]
enum Family {
    Mlp(ActivationKind),
    Nac,
    Nalu { tied: bool },
    Ablation(AblationVariant),
    Cell(CellKind),
    Language { head: HeadKind, summed: bool },
}

impl Family {
    fn all() -> Vec<Family> {
        let mut v: Vec<Family> = ActivationKind::ALL.iter().map(|&a| Family::Mlp(a)).collect();
        v.push(Family::Nac);
        v.push(Family::Nalu { tied: true });
        v.push(Family::Nalu { tied: false });
        v.extend(AblationVariant::ALL.iter().map(|&a| Family::Ablation(a)));
        v.extend(CellKind::ALL.iter().map(|&c| Family::Cell(c)));
        for head in [HeadKind::Linear, HeadKind::Nac, HeadKind::Nalu] {
            v.push(Family::Language { head, summed: false });
        }
        v.push(Family::Language {
            head: HeadKind::Linear,
            summed: true,
        });
        v
    }

    fn name(self) -> String {
        match self {
            Family::Mlp(a) => format!("mlp_{}", a.name()),
            Family::Nac => "nac".into(),
            Family::Nalu { tied: true } => "nalu".into(),
            Family::Nalu { tied: false } => "nalu_untied".into(),
            Family::Ablation(a) => format!("ablation_{}", a.name()),
            Family::Cell(c) => format!("cell_{}", c.name()),
            Family::Language { head, summed } => {
                format!("language_{}{}", head.name(), if summed { "_summed" } else { "" })
            }
        }
    }

    /// LSTM states can sit near zero, where a log-space head is steep.
    fn step(self) -> f64 {
        match self {
            Family::Language { head: HeadKind::Nalu, .. } => 1e-7,
            _ => GRADIENT_STEP,
        }
    }

    /// Inputs for log-space layers stay away from zero.
    fn positive_inputs(self) -> bool {
        matches!(
            self,
            Family::Nalu { .. } | Family::Cell(CellKind::RecurrentNalu)
        )
    }

    fn spec<R: Rng>(self, rng: &mut R) -> ModelSpec {
        let input = rng.gen_range(1..=4);
        let out = rng.gen_range(1..=3);
        match self {
            Family::Mlp(a) => ModelSpec::Mlp(MlpSpec::new(vec![input, rng.gen_range(1..=3), out], a)),
            Family::Nac => ModelSpec::NacStack { widths: vec![input, out] },
            Family::Nalu { tied } => ModelSpec::NaluStack {
                widths: vec![input, out],
                epsilon: DEFAULT_EPSILON,
                tied,
            },
            Family::Ablation(variant) => ModelSpec::AblationStack {
                variant,
                widths: vec![input, out],
            },
            Family::Cell(cell) => ModelSpec::Recurrent {
                cell,
                input,
                hidden: rng.gen_range(1..=3),
                head: HeadKind::Linear,
            },
            Family::Language { head, summed } => ModelSpec::Language {
                vocab: rng.gen_range(2..=5),
                embed: rng.gen_range(1..=3),
                hidden: rng.gen_range(1..=3),
                head,
                summed_state: summed,
            },
        }
    }
}

fn random_input<R: Rng>(spec: &ModelSpec, positive: bool, batch: usize, rng: &mut R) -> ModelInput {
    let draw = |n: usize, rng: &mut R| -> Tensor {
        Tensor::from_fn(&[batch, n], |_| {
            if positive {
                rng.gen_range(0.2..1.5)
            } else {
                rng.gen_range(-1.0..1.0)
            }
        })
    };
    match spec {
        ModelSpec::Recurrent { input, .. } => {
            let steps = rng.gen_range(1..=3);
            ModelInput::Sequence((0..steps).map(|_| draw(*input, rng)).collect())
        }
        ModelSpec::Language { vocab, .. } => {
            let steps = rng.gen_range(1..=3);
            let v = *vocab;
            ModelInput::Sequence(
                (0..steps)
                    .map(|_| {
                        let ids: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..v)).collect();
                        Tensor::from_fn(&[batch, v], |i| if ids[i / v] == i % v { 1.0 } else { 0.0 })
                    })
                    .collect(),
            )
        }
        other => ModelInput::Batch(draw(other.input_width(), rng)),
    }
}

/// Runs `instances` random checks per layer family; each passes when its
/// worst relative error stays below [`GRADIENT_TOLERANCE`].
pub fn gradient_suite(seed_value: u64, instances: usize) -> Vec<SuiteEntry> {
    Family::all()
        .into_iter()
        .map(|family| {
            let name = family.name();
            let mut rng = seed::stream(seed_value, &format!("gradcheck/{name}"));
            let mut worst: f64 = 0.0;
            let mut errors = 0;
            for _ in 0..instances {
                let spec = family.spec(&mut rng);
                let mut params = match init_params(&spec, &mut rng) {
                    Ok(p) => p,
                    Err(_) => {
                        errors += 1;
                        continue;
                    }
                };
                if family.positive_inputs() || matches!(family, Family::Language { head: HeadKind::Nalu, .. }) {
                    // keeps log-space products within finite-difference range
                    params.visit_mut("", &mut |_, t| *t = t.map(|v| 0.25 * v));
                }
                let batch = rng.gen_range(1..=3);
                let input = random_input(&spec, family.positive_inputs(), batch, &mut rng);
                let mut scratch = Tape::new();
                let bound = bind_frozen(&params, &mut scratch);
                let Ok(y) = model_forward(&mut scratch, &spec, &bound, &input) else {
                    errors += 1;
                    continue;
                };
                let target = Tensor::from_fn(scratch.value(y).shape(), |_| rng.gen_range(-1.0..1.0));
                let flat: Vec<Tensor> = flatten(&params).into_iter().map(|(_, t)| t).collect();
                let report = grad_check_report(
                    |t, v| {
                        let mut i = 0;
                        let bound = params.map_named("", &mut |_, _| {
                            i += 1;
                            v[i - 1]
                        });
                        let out = model_forward(t, &spec, &bound, &input).map_err(|e| e.into_autodiff())?;
                        let tv = t.constant(target.clone());
                        let d = t.sub(out, tv)?;
                        let sq = t.square(d)?;
                        t.mean(sq)
                    },
                    &flat,
                    family.step(),
                );
                match report {
                    Ok(r) => worst = worst.max(r.max_rel_error),
                    Err(_) => errors += 1,
                }
            }
            SuiteEntry {
                layer: name,
                instances,
                max_rel_error: worst,
                errors,
                passed: errors == 0 && worst < GRADIENT_TOLERANCE,
            }
        })
        .collect()
}
