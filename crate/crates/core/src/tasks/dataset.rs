use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::layers::ModelInput;
use crate::tensor::Tensor;

/// Which slice of a task an example or a score belongs to. `Validation`
/// and `Test` label the held-out number-phrase splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Train,
    Interpolation,
    Extrapolation,
    Validation,
    Test,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Train => "train",
            Regime::Interpolation => "interpolation",
            Regime::Extrapolation => "extrapolation",
            Regime::Validation => "validation",
            Regime::Test => "test",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Regime::Train),
            "interpolation" | "interp" | "i" => Ok(Regime::Interpolation),
            "extrapolation" | "extrap" | "e" => Ok(Regime::Extrapolation),
            "validation" | "val" => Ok(Regime::Validation),
            "test" => Ok(Regime::Test),
            _ => Err(format!("unknown regime `{s}`")),
        }
    }
}

/// Examples with scalar targets. Each input is a vector (static) or a
/// `[steps, width]` matrix (sequence).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Tensor>,
    pub targets: Vec<f64>,
    pub regime: Regime,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn is_sequence(&self) -> bool {
        self.inputs.first().is_some_and(|x| x.rank() == 2)
    }

    /// Model input for examples `start..end`, batched along rows.
    pub fn model_input(&self, start: usize, end: usize) -> ModelInput {
        let chunk = &self.inputs[start..end];
        if chunk[0].rank() == 2 {
            let (steps, width) = chunk[0].dims2();
            let seq = (0..steps)
                .map(|t| {
                    Tensor::from_fn(&[chunk.len(), width], |i| chunk[i / width].row(t)[i % width])
                })
                .collect();
            ModelInput::Sequence(seq)
        } else {
            let rows: Vec<&Tensor> = chunk.iter().collect();
            ModelInput::Batch(Tensor::stack_rows(&rows).expect("equal-width static inputs"))
        }
    }

    /// `[end - start, 1]` target column.
    pub fn target_column(&self, start: usize, end: usize) -> Tensor {
        Tensor::new(vec![end - start, 1], self.targets[start..end].to_vec()).expect("column shape")
    }

    /// One CSV row per example: the flattened input followed by the target.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let width = self.inputs.first().map_or(0, Tensor::len);
        let mut header: Vec<String> = (0..width).map(|i| format!("x{i}")).collect();
        header.push("target".into());
        w.write_record(&header)?;
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            let mut rec: Vec<String> = x.data().iter().map(f64::to_string).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_batches_are_step_major() {
        let d = Dataset {
            inputs: vec![
                Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
                Tensor::new(vec![2, 2], vec![5.0, 6.0, 7.0, 8.0]).unwrap(),
            ],
            targets: vec![0.0, 1.0],
            regime: Regime::Train,
        };
        match d.model_input(0, 2) {
            ModelInput::Sequence(steps) => {
                assert_eq!(steps[0].data(), &[1.0, 2.0, 5.0, 6.0]);
                assert_eq!(steps[1].data(), &[3.0, 4.0, 7.0, 8.0]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(d.target_column(1, 2).data(), &[1.0]);
    }

    #[test]
    fn csv_has_one_row_per_example() {
        let d = Dataset {
            inputs: vec![Tensor::vector(vec![0.5, 1.5]); 3],
            targets: vec![2.0; 3],
            regime: Regime::Interpolation,
        };
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().nth(1).unwrap(), "0.5,1.5,2");
    }
}
