//! Central finite-difference check of reverse-mode gradients.

use thiserror::Error;

use super::tape::{Tape, Var};
use crate::error::AutodiffError;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GradCheckError {
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("non-finite loss while probing parameter {param} entry {index}")]
    NonFinite { param: usize, index: usize },
    #[error(transparent)]
    Build(#[from] AutodiffError),
}

/// Per-entry comparison detail, mostly useful when a check fails.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

fn eval_loss<F>(build: &F, params: &[Tensor]) -> Result<(Tape, Vec<Var>, Var), AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = build(&mut tape, &vars)?;
    Ok((tape, vars, loss))
}

/// Returns the largest `|analytic - numeric| / max(1, |analytic|, |numeric|)`
/// over every parameter entry.
pub fn grad_check<F>(build: F, params: &[Tensor], step: f64) -> Result<f64, GradCheckError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    grad_check_report(build, params, step).map(|r| r.max_rel_error)
}

pub fn grad_check_report<F>(
    build: F,
    params: &[Tensor],
    step: f64,
) -> Result<GradCheckReport, GradCheckError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    if !(step > 0.0) {
        return Err(GradCheckError::InvalidStep(step));
    }
    let (tape, vars, loss) = eval_loss(&build, params)?;
    if !tape.value(loss).all_finite() {
        return Err(GradCheckError::NonFinite { param: 0, index: 0 });
    }
    let grads = tape.backward(loss)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: 0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut probe = params.to_vec();
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var);
        for idx in 0..params[pi].len() {
            let orig = params[pi].data()[idx];
            let mut at = |v: f64| -> Result<f64, GradCheckError> {
                probe[pi].data_mut()[idx] = v;
                let (t, _, l) = eval_loss(&build, &probe)?;
                let value = t.value(l).item();
                if value.is_finite() {
                    Ok(value)
                } else {
                    Err(GradCheckError::NonFinite {
                        param: pi,
                        index: idx,
                    })
                }
            };
            let plus = at(orig + step)?;
            let minus = at(orig - step)?;
            probe[pi].data_mut()[idx] = orig;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.data()[idx];
            let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            if err > report.max_rel_error {
                report = GradCheckReport {
                    max_rel_error: err,
                    worst_param: pi,
                    worst_index: idx,
                    analytic: a,
                    numeric,
                };
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let p = Tensor::vector(vec![0.3, -1.2, 2.5]);
        let err = grad_check(
            |t, v| {
                let sq = t.square(v[0])?;
                let s = t.sum(sq)?;
                t.scale(s, 0.5)
            },
            &[p],
            1e-4,
        )
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn rejects_nonpositive_step() {
        let p = Tensor::scalar(1.0);
        let r = grad_check(|t, v| t.sum(v[0]), &[p], 0.0);
        assert_eq!(r, Err(GradCheckError::InvalidStep(0.0)));
    }

    #[test]
    fn reports_offending_parameter_on_non_finite_probe() {
        // exp overflows just above ln(f64::MAX) ~= 709.7827
        let a = Tensor::scalar(0.5);
        let b = Tensor::vector(vec![1.0, 709.78]);
        let r = grad_check(
            |t, v| {
                let e = t.exp(v[1])?;
                let s = t.sum(e)?;
                let w = t.sum(v[0])?;
                t.add(s, w)
            },
            &[a, b],
            1e-2,
        );
        assert_eq!(r, Err(GradCheckError::NonFinite { param: 1, index: 1 }));
    }
}
