//! Acceptance thresholds for `--check`. A threshold is only evaluated when
//! the grid produced the rows it needs.

use serde::Serialize;

use nalu_core::tasks::Regime;
use nalu_core::training::{median, Experiment, RunResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy)]
enum Stat {
    Median,
    Mean,
    Min,
}

#[derive(Debug, Clone, Copy)]
enum Field {
    Score,
    Mae,
}

#[derive(Debug, Clone, Copy)]
enum Bound {
    Below(f64),
    AtMost(f64),
    Above(f64),
}

struct Rule {
    model: &'static str,
    op: &'static str,
    regime: Regime,
    field: Field,
    stat: Stat,
    bound: Bound,
}

const fn rule(model: &'static str, op: &'static str, regime: Regime, field: Field, stat: Stat, bound: Bound) -> Rule {
    Rule {
        model,
        op,
        regime,
        field,
        stat,
        bound,
    }
}

fn rules(experiment: Experiment) -> Vec<Rule> {
    use Bound::*;
    use Field::*;
    use Regime::*;
    use Stat::*;
    match experiment {
        Experiment::Identity => vec![
            rule("none", "identity", Extrapolation, Mae, Mean, Below(0.01)),
            rule("tanh", "identity", Extrapolation, Score, Mean, Above(85.0)),
            rule("sigmoid", "identity", Extrapolation, Score, Mean, Above(85.0)),
            rule("hardtanh", "identity", Extrapolation, Score, Mean, Above(85.0)),
        ],
        Experiment::Static => vec![
            rule("nac", "add", Interpolation, Score, Median, Below(0.5)),
            rule("nac", "add", Extrapolation, Score, Median, Below(0.5)),
            rule("nac", "sub", Interpolation, Score, Median, Below(0.5)),
            rule("nac", "sub", Extrapolation, Score, Median, Below(0.5)),
            rule("nalu", "mul", Extrapolation, Score, Median, Below(2.0)),
            rule("nalu", "square", Extrapolation, Score, Median, Below(2.0)),
            rule("nalu", "sqrt", Extrapolation, Score, Median, Below(2.0)),
            rule("nalu", "div", Interpolation, Score, Min, AtMost(15.0)),
            rule("relu6", "add", Extrapolation, Score, Median, Above(10.0)),
            rule("relu6", "add", Interpolation, Score, Median, Below(5.0)),
        ],
        Experiment::Recurrent => vec![
            rule("nac", "add", Extrapolation, Score, Median, Below(1.0)),
            rule("nac", "sub", Extrapolation, Score, Median, Below(1.0)),
            rule("lstm", "add", Extrapolation, Score, Median, Above(50.0)),
            rule("lstm", "sub", Extrapolation, Score, Median, Above(50.0)),
        ],
        Experiment::Language => vec![
            rule("lstm_nalu", "language", Test, Mae, Mean, Below(5.0)),
            rule("lstm_summed", "language", Test, Mae, Mean, Above(10.0)),
        ],
    }
}

/// Summary statistic over the matching rows; NaN (failed runs) propagates.
fn statistic(values: &[f64], stat: Stat) -> f64 {
    match stat {
        Stat::Median => median(values).unwrap_or(f64::NAN),
        Stat::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Stat::Min => values.iter().copied().fold(f64::INFINITY, |a, b| if b.is_nan() { a } else { a.min(b) }),
    }
}

pub fn evaluate_checks(experiment: Experiment, results: &[RunResult]) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    for r in rules(experiment) {
        let values: Vec<f64> = results
            .iter()
            .filter(|x| x.model == r.model && x.op == r.op && x.regime == r.regime)
            .map(|x| match r.field {
                Field::Score => x.normalized_score,
                Field::Mae => x.raw_mae,
            })
            .collect();
        if values.is_empty() {
            continue;
        }
        let v = statistic(&values, r.stat);
        let (passed, relation) = match r.bound {
            Bound::Below(t) => (v < t, format!("< {t}")),
            Bound::AtMost(t) => (v <= t, format!("<= {t}")),
            Bound::Above(t) => (v > t, format!("> {t}")),
        };
        let stat = match r.stat {
            Stat::Median => "median",
            Stat::Mean => "mean",
            Stat::Min => "best",
        };
        let field = match (r.field, experiment) {
            (Field::Mae, _) => "MAE",
            (Field::Score, Experiment::Identity) => "%error",
            (Field::Score, _) => "score",
        };
        out.push(CheckOutcome {
            name: format!("{}/{}/{}", r.model, r.op, r.regime.name()),
            passed,
            value: v,
            detail: format!("{stat} {field} {v:.4} over {} runs (needs {relation})", values.len()),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: &str, op: &str, regime: Regime, score: f64) -> RunResult {
        RunResult {
            model: model.into(),
            task: "static".into(),
            op: op.into(),
            regime,
            seed: 0,
            raw_mse: 0.0,
            raw_mae: 0.0,
            normalized_score: score,
            steps: 1,
            wall_ms: None,
            status: "ok".into(),
        }
    }

    #[test]
    fn only_covered_rules_run() {
        let rs = vec![
            row("nac", "add", Regime::Extrapolation, 0.0),
            row("nac", "add", Regime::Extrapolation, 0.2),
            row("nac", "add", Regime::Extrapolation, 7.0),
        ];
        let c = evaluate_checks(Experiment::Static, &rs);
        assert_eq!(c.len(), 1);
        assert!(c[0].passed);
        assert_eq!(c[0].value, 0.2);
    }

    #[test]
    fn best_of_seeds_and_failures() {
        let rs = vec![
            row("nalu", "div", Regime::Interpolation, 40.0),
            row("nalu", "div", Regime::Interpolation, 12.0),
            row("nalu", "mul", Regime::Extrapolation, f64::NAN),
        ];
        let c = evaluate_checks(Experiment::Static, &rs);
        let div = c.iter().find(|c| c.name.starts_with("nalu/div")).unwrap();
        assert!(div.passed);
        let mul = c.iter().find(|c| c.name.starts_with("nalu/mul")).unwrap();
        assert!(!mul.passed);
    }
}
