//! Paper-style score tables and plot-ready CSV series built from
//! [`RunResult`] rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::tasks::Regime;
use crate::training::{median, RawCurve, RunResult};

pub const MISSING: &str = "—";
pub const OVERFLOW: &str = ">999";

/// One decimal place; anything above 999 (including +inf) is `>999`.
pub fn format_score(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x > 999.0 {
        return OVERFLOW.into();
    }
    let r = (x * 10.0).round() / 10.0;
    // avoid "-0.0"
    format!("{:.1}", if r == 0.0 { 0.0 } else { r })
}

/// Per-model medians of `normalized_score`, op rows by model columns, one
/// block per regime. `None` marks a cell with no finite-or-infinite data.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub title: String,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub regimes: Vec<Regime>,
    /// Indexed `[regime][row][column]`.
    pub cells: Vec<Vec<Vec<Option<f64>>>>,
}

impl ScoreTable {
    pub fn cell(&self, regime: Regime, row: &str, column: &str) -> Option<f64> {
        let k = self.regimes.iter().position(|r| *r == regime)?;
        let i = self.rows.iter().position(|r| r == row)?;
        let j = self.columns.iter().position(|c| c == column)?;
        self.cells[k][i][j]
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().flatten().map(Vec::len).sum()
    }

    pub fn render(&self) -> String {
        let label_w = self
            .rows
            .iter()
            .map(|r| r.chars().count())
            .chain(self.regimes.iter().map(|r| r.name().len()))
            .max()
            .unwrap_or(0);
        let col_w: Vec<usize> = self.columns.iter().map(|c| c.chars().count().max(6)).collect();
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
        }
        for (k, regime) in self.regimes.iter().enumerate() {
            let _ = write!(out, "{:<label_w$}", regime.name());
            for (c, w) in self.columns.iter().zip(&col_w) {
                let _ = write!(out, "  {c:>w$}");
            }
            out.push('\n');
            for (i, row) in self.rows.iter().enumerate() {
                let _ = write!(out, "{row:<label_w$}");
                for (j, w) in col_w.iter().enumerate() {
                    let text = self.cells[k][i][j].map_or_else(|| MISSING.to_string(), format_score);
                    let pad = w.saturating_sub(text.chars().count());
                    let _ = write!(out, "  {}{text}", " ".repeat(pad));
                }
                out.push('\n');
            }
            if k + 1 < self.regimes.len() {
                out.push('\n');
            }
        }
        out
    }
}

fn first_seen<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for v in values {
        if !out.iter().any(|o| o == v) {
            out.push(v.to_string());
        }
    }
    out
}

fn regimes_for(results: &[RunResult]) -> Vec<Regime> {
    if !results.is_empty() && results.iter().all(|r| r.task == "language") {
        vec![Regime::Train, Regime::Validation, Regime::Test]
    } else {
        vec![Regime::Interpolation, Regime::Extrapolation]
    }
}

/// Builds the table and its text rendering. NaN scores (failed runs) are
/// left out of the medians.
pub fn render_table(results: &[RunResult]) -> (ScoreTable, String) {
    let rows = first_seen(results.iter().map(|r| r.op.as_str()));
    let columns = first_seen(results.iter().map(|r| r.model.as_str()));
    let regimes = regimes_for(results);
    let mut cells = Vec::with_capacity(regimes.len());
    for regime in &regimes {
        let mut block = Vec::with_capacity(rows.len());
        for row in &rows {
            let line = columns
                .iter()
                .map(|col| {
                    let scores: Vec<f64> = results
                        .iter()
                        .filter(|r| r.regime == *regime && r.op == *row && r.model == *col)
                        .map(|r| r.normalized_score)
                        .filter(|s| !s.is_nan())
                        .collect();
                    median(&scores)
                })
                .collect();
            block.push(line);
        }
        cells.push(block);
    }
    let title = first_seen(results.iter().map(|r| r.task.as_str())).join(", ");
    let table = ScoreTable {
        title,
        rows,
        columns,
        regimes,
        cells,
    };
    let text = table.render();
    (table, text)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        for (j, (c, w)) in cells.iter().zip(&widths).enumerate() {
            let pad = w - c.chars().count();
            if j == 0 {
                let _ = write!(out, "{c}{}", " ".repeat(pad));
            } else {
                let _ = write!(out, "  {}{c}", " ".repeat(pad));
            }
        }
        out.push('\n');
    };
    line(header.to_vec(), &mut out);
    for r in rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

/// Train / validation / test MAE per selected language model.
pub fn language_table(results: &[RunResult]) -> String {
    let language: Vec<&RunResult> = results.iter().filter(|r| r.task == "language").collect();
    let models = first_seen(language.iter().map(|r| r.model.as_str()));
    let rows: Vec<Vec<String>> = models
        .iter()
        .map(|m| {
            let mut row = vec![m.clone()];
            for regime in [Regime::Train, Regime::Validation, Regime::Test] {
                let maes: Vec<f64> = language
                    .iter()
                    .filter(|r| r.model == *m && r.regime == regime)
                    .map(|r| r.raw_mae)
                    .collect();
                row.push(mean(&maes).map_or_else(|| MISSING.to_string(), |v| format!("{v:.2}")));
            }
            row
        })
        .collect();
    aligned(&["model", "train MAE", "validation MAE", "test MAE"], &rows)
}

/// Mean percent error per activation, and mean raw MAE on the extrapolation grid.
pub fn identity_table(results: &[RunResult]) -> String {
    let identity: Vec<&RunResult> = results.iter().filter(|r| r.task == "identity").collect();
    let models = first_seen(identity.iter().map(|r| r.model.as_str()));
    let rows: Vec<Vec<String>> = models
        .iter()
        .map(|m| {
            let pick = |regime: Regime, f: fn(&RunResult) -> f64| -> Vec<f64> {
                identity
                    .iter()
                    .filter(|r| r.model == *m && r.regime == regime)
                    .map(|r| f(r))
                    .filter(|v| !v.is_nan())
                    .collect()
            };
            let cell = |v: Option<f64>| v.map_or_else(|| MISSING.to_string(), format_score);
            vec![
                m.clone(),
                cell(mean(&pick(Regime::Interpolation, |r| r.normalized_score))),
                cell(mean(&pick(Regime::Extrapolation, |r| r.normalized_score))),
                mean(&pick(Regime::Extrapolation, |r| r.raw_mae)).map_or_else(|| MISSING.to_string(), |v| format!("{v:.4e}")),
            ]
        })
        .collect();
    aligned(&["activation", "interp %err", "extrap %err", "extrap MAE"], &rows)
}

/// Every table that applies to `results`, one per task kind.
pub fn render_report(results: &[RunResult]) -> String {
    let mut out = String::new();
    for task in first_seen(results.iter().map(|r| r.task.as_str())) {
        let subset: Vec<RunResult> = results.iter().filter(|r| r.task == task).cloned().collect();
        if !out.is_empty() {
            out.push('\n');
        }
        match task.as_str() {
            "language" => {
                let _ = writeln!(out, "language (selected by validation MSE)");
                out.push_str(&language_table(&subset));
            }
            "identity" => {
                let _ = writeln!(out, "identity");
                out.push_str(&identity_table(&subset));
            }
            _ => out.push_str(&render_table(&subset).1),
        }
    }
    out
}

/// Aggregate of one series: `(x, mean, std, runs)` per distinct x.
pub fn summarize_series(curves: &[&RawCurve]) -> Vec<(f64, f64, f64, usize)> {
    let mut by_x: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for c in curves {
        for &(x, y) in &c.points {
            // order-preserving key for finite and infinite x
            let bits = x.to_bits();
            let key = if x.is_sign_negative() { !bits } else { bits | (1 << 63) };
            by_x.entry(key).or_insert_with(|| (x, Vec::new())).1.push(y);
        }
    }
    by_x
        .into_values()
        .map(|(x, ys)| {
            let n = ys.len() as f64;
            let m = ys.iter().sum::<f64>() / n;
            let var = ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / n;
            (x, m, var.sqrt(), ys.len())
        })
        .collect()
}

fn file_stem(series: &str) -> String {
    series
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Writes `<series>.csv` under `dir` for every series, with columns
/// `<x_label>,mean,std,runs`. Nothing is written for an empty list.
pub fn export_curves(curves: &[RawCurve], dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut groups: BTreeMap<&str, Vec<&RawCurve>> = BTreeMap::new();
    for c in curves {
        groups.entry(c.series.as_str()).or_default().push(c);
    }
    if groups.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (series, members) in groups {
        let path = dir.join(format!("{}.csv", file_stem(series)));
        let mut w = csv::Writer::from_path(&path).map_err(io::Error::other)?;
        w.write_record([members[0].x_label.as_str(), "mean", "std", "runs"])
            .map_err(io::Error::other)?;
        for (x, m, s, n) in summarize_series(&members) {
            w.write_record([x.to_string(), m.to_string(), s.to_string(), n.to_string()])
                .map_err(io::Error::other)?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
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
            raw_mse: score,
            raw_mae: score,
            normalized_score: score,
            steps: 1,
            wall_ms: None,
            status: "ok".into(),
        }
    }

    #[test]
    fn single_cell() {
        let (t, text) = render_table(&[row("tanh", "add", Regime::Extrapolation, 43.3)]);
        assert_eq!(t.cell(Regime::Extrapolation, "add", "tanh"), Some(43.3));
        assert_eq!(format_score(43.3), "43.3");
        assert!(text.contains("43.3"));
        // the interpolation block has no data
        assert_eq!(t.cell(Regime::Interpolation, "add", "tanh"), None);
        assert!(text.contains(MISSING));
    }

    #[test]
    fn overflow_and_rounding() {
        assert_eq!(format_score(1234.5), ">999");
        assert_eq!(format_score(f64::INFINITY), ">999");
        assert_eq!(format_score(999.0), "999.0");
        assert_eq!(format_score(0.04), "0.0");
        assert_eq!(format_score(0.25), "0.3");
    }

    #[test]
    fn medians_skip_failed_runs() {
        let rs = vec![
            row("nac", "add", Regime::Interpolation, 0.1),
            row("nac", "add", Regime::Interpolation, 0.3),
            row("nac", "add", Regime::Interpolation, 100.0),
            row("nac", "add", Regime::Interpolation, f64::NAN),
        ];
        let (t, _) = render_table(&rs);
        assert_eq!(t.cell(Regime::Interpolation, "add", "nac"), Some(0.3));
    }

    #[test]
    fn series_statistics() {
        let c = |run, ys: [f64; 2]| RawCurve {
            series: "s".into(),
            x_label: "x".into(),
            run,
            points: vec![(-1.0, ys[0]), (2.0, ys[1])],
        };
        let (a, b) = (c(0, [1.0, 4.0]), c(1, [3.0, 4.0]));
        let s = summarize_series(&[&a, &b]);
        assert_eq!(s, vec![(-1.0, 2.0, 1.0, 2), (2.0, 4.0, 0.0, 2)]);
    }
}
