//! Classifiers for the comparison: boosted trees plus two linear baselines.

pub mod compare;
pub mod cv;
pub mod gbdt;
pub mod linear;

pub use compare::{run_comparison, ComparisonReport, ComparisonRow};
pub use cv::{cv_grid_search, CvReport};
pub use gbdt::{train_gbdt, GbdtModel, GbdtParams};
pub use linear::{train_perceptron, train_ridge, LinearModel};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub trait Classifier {
    fn n_features(&self) -> usize;

    /// Label for one row; callers check the width.
    fn classify_row(&self, x: &[f64]) -> u8;

    fn classify(&self, x: &Matrix) -> Result<Vec<u8>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        Ok(x.rows_iter().map(|row| self.classify_row(row)).collect())
    }
}

/// Fraction of rows whose predicted label equals `y`.
pub fn evaluate_accuracy(model: &impl Classifier, x: &Matrix, y: &[u8]) -> Result<f64> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let predicted = model.classify(x)?;
    let hits = predicted.iter().zip(y).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / y.len() as f64)
}
