//! Linear baselines: a perceptron and ridge regression on ±1 targets.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

use super::Classifier;

/// `w·x + b`, classified as label 1 when non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

impl Classifier for LinearModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn classify_row(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) >= 0.0)
    }
}

fn check(x: &Matrix, len: usize) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::EmptyInput);
    }
    if len != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: len,
        });
    }
    Ok(())
}

fn signed(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Classic mistake-driven perceptron; rows are visited in a fresh seeded
/// order each epoch and training stops after the first clean epoch.
pub fn train_perceptron(x: &Matrix, y: &[u8], epochs: usize, seed: u64) -> Result<LinearModel> {
    check(x, y.len())?;
    let mut model = LinearModel {
        weights: vec![0.0; x.ncols()],
        bias: 0.0,
    };
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut rng = rng::seeded(seed);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut mistakes = 0;
        for &i in &order {
            let t = signed(y[i]);
            let row = x.row(i);
            if t * model.score(row) <= 0.0 {
                mistakes += 1;
                for (w, v) in model.weights.iter_mut().zip(row) {
                    *w += t * v;
                }
                model.bias += t;
            }
        }
        if mistakes == 0 {
            break;
        }
    }
    Ok(model)
}

/// Ridge regression with an unpenalized intercept, solved through the
/// centered normal equations `(XᵀX + λI) w = Xᵀt`.
pub fn fit_ridge(x: &Matrix, targets: &[f64], penalty: f64) -> Result<LinearModel> {
    check(x, targets.len())?;
    if !(penalty >= 0.0 && penalty.is_finite()) {
        return Err(Error::InvalidParams(format!("penalty must be non-negative, got {penalty}")));
    }
    let (n, d) = (x.nrows(), x.ncols());
    let design = DMatrix::from_row_slice(n, d, x.as_slice());
    let col_means: Vec<f64> = design.column_iter().map(|c| c.mean()).collect();
    let mut centered = design;
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-col_means[j]);
    }
    let t = DVector::from_column_slice(targets);
    let t_mean = t.mean();
    let tc = t.add_scalar(-t_mean);

    let gram = centered.transpose() * &centered + DMatrix::identity(d, d) * penalty;
    let rhs = centered.transpose() * tc;
    let chol = gram.clone().cholesky().ok_or(Error::Singular)?;
    let diag = chol.l_dirty().diagonal();
    let largest = diag.max();
    if diag.min() <= largest * 1e-8 {
        return Err(Error::Singular);
    }
    let w = chol.solve(&rhs);
    let bias = t_mean - w.iter().zip(&col_means).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel {
        weights: w.iter().copied().collect(),
        bias,
    })
}

/// Ridge on ±1-coded labels; a non-negative score predicts label 1.
pub fn train_ridge(x: &Matrix, y: &[u8], penalty: f64) -> Result<LinearModel> {
    let targets: Vec<f64> = y.iter().map(|&l| signed(l)).collect();
    fit_ridge(x, &targets, penalty)
}
