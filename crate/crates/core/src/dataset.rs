//! Labelled sample sets.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One sample per row of `inputs`, with an integer class label each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Matrix,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(inputs: Matrix, labels: Vec<usize>) -> Result<Self> {
        Error::check_len(inputs.rows(), labels.len())?;
        Ok(Self { inputs, labels })
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.inputs.cols()
    }

    /// Training targets for a net with `n_outputs` outputs: the label itself
    /// for a single output, one-hot otherwise.
    pub fn targets(&self, n_outputs: usize) -> Result<Matrix> {
        let mut t = Matrix::zeros(self.len(), n_outputs);
        for (i, &label) in self.labels.iter().enumerate() {
            if n_outputs == 1 {
                if label > 1 {
                    return Err(Error::invalid("single-output targets need labels 0 or 1"));
                }
                t[(i, 0)] = label as f64;
            } else if label < n_outputs {
                t[(i, label)] = 1.0;
            } else {
                return Err(Error::invalid("label exceeds the number of outputs"));
            }
        }
        Ok(t)
    }

    /// The first `n` samples (all of them if `n` exceeds the length).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset { inputs: self.inputs.select_rows(0..n), labels: self.labels[..n].to_vec() }
    }

    /// Same labels with replaced inputs (e.g. after a projection).
    pub fn with_inputs(&self, inputs: Matrix) -> Result<Dataset> {
        Dataset::new(inputs, self.labels.clone())
    }
}

/// The four-row XOR truth table.
pub fn xor_dataset() -> Dataset {
    let inputs = Matrix::from_vec(4, 2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]).expect("4x2");
    Dataset { inputs, labels: vec![0, 1, 1, 0] }
}
