//! One row per (model, task, op, regime, seed) plus CSV and JSON-lines I/O.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use super::TrainError;
use crate::tasks::Regime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub model: String,
    pub task: String,
    pub op: String,
    pub regime: Regime,
    pub seed: u64,
    pub raw_mse: f64,
    pub raw_mae: f64,
    pub normalized_score: f64,
    pub steps: usize,
    /// Wall time; left empty in files meant to be compared byte for byte.
    pub wall_ms: Option<u64>,
    /// `ok`, `diverged` or `failed`.
    pub status: String,
}

/// RFC 4180 CSV with a header row. `with_wall_time = false` blanks the
/// timing column so repeated runs produce identical files.
pub fn write_results_csv<W: Write>(out: W, results: &[RunResult], with_wall_time: bool) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        if with_wall_time {
            w.serialize(r)?;
        } else {
            w.serialize(RunResult {
                wall_ms: None,
                ..r.clone()
            })?;
        }
    }
    if results.is_empty() {
        w.write_record([
            "model",
            "task",
            "op",
            "regime",
            "seed",
            "raw_mse",
            "raw_mae",
            "normalized_score",
            "steps",
            "wall_ms",
            "status",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<RunResult>, TrainError> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// One JSON object per line. Non-finite numbers are written as `null`.
pub fn write_results_jsonl<W: Write>(mut out: W, results: &[RunResult]) -> Result<(), TrainError> {
    for r in results {
        let line = serde_json::to_string(r).map_err(|e| TrainError::Config(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(score: f64) -> RunResult {
        RunResult {
            model: "nac".into(),
            task: "static".into(),
            op: "add".into(),
            regime: Regime::Extrapolation,
            seed: 3,
            raw_mse: 1e-9,
            raw_mae: 0.1 + 0.2,
            normalized_score: score,
            steps: 500,
            wall_ms: Some(12),
            status: "ok".into(),
        }
    }

    #[test]
    fn csv_round_trip_keeps_full_precision() {
        let rows = vec![row(0.123456789012345), row(f64::INFINITY)];
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &rows, true).unwrap();
        let back = read_results_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);

        let mut blank = Vec::new();
        write_results_csv(&mut blank, &rows, false).unwrap();
        let back = read_results_csv(blank.as_slice()).unwrap();
        assert_eq!(back[0].wall_ms, None);
        let header = String::from_utf8(blank).unwrap();
        assert!(header.starts_with(
            "model,task,op,regime,seed,raw_mse,raw_mae,normalized_score,steps,wall_ms,status"
        ));
    }

    #[test]
    fn jsonl_has_one_line_per_row() {
        let mut buf = Vec::new();
        write_results_jsonl(&mut buf, &[row(1.0), row(2.0)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"regime\":\"extrapolation\""));
    }
}
