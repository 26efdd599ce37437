//! Stratified k-fold grid search over [`GbdtParams`].

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

use super::gbdt::{train_gbdt, GbdtParams};
use super::Classifier;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub params: GbdtParams,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub rows: Vec<CvRow>,
    pub chosen: GbdtParams,
    pub chosen_index: usize,
    pub folds: usize,
    pub seed: u64,
}

impl CvReport {
    pub fn best_mean(&self) -> f64 {
        self.rows[self.chosen_index].mean_accuracy
    }
}

/// Validation indices per fold. Each label's rows are shuffled and dealt
/// round-robin, so every fold's label counts differ by at most one.
pub fn stratified_folds(y: &[u8], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidParams(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = rng::seeded(seed);
    let mut out = vec![Vec::new(); folds];
    for label in [0u8, 1] {
        let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
        if rows.len() < folds {
            return Err(Error::FoldMissingLabel {
                fold: rows.len(),
                label,
            });
        }
        rows.shuffle(&mut rng);
        for (k, row) in rows.into_iter().enumerate() {
            out[k % folds].push(row);
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

/// Cheaper parameters sort first: fewer rounds, then shallower, then slower.
fn cost_order(a: &GbdtParams, b: &GbdtParams) -> Ordering {
    a.rounds
        .cmp(&b.rounds)
        .then(a.max_depth.cmp(&b.max_depth))
        .then(a.learning_rate.total_cmp(&b.learning_rate))
}

/// Index of the best row: highest mean accuracy, ties to the cheapest parameters.
pub fn choose(rows: &[CvRow]) -> usize {
    let mut best = 0;
    for (i, row) in rows.iter().enumerate().skip(1) {
        let incumbent = &rows[best];
        let better = match row.mean_accuracy.total_cmp(&incumbent.mean_accuracy) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => cost_order(&row.params, &incumbent.params) == Ordering::Less,
        };
        if better {
            best = i;
        }
    }
    best
}

/// Evaluates every grid point on the same folds.
///
/// Grid points differing only in `rounds` share one fit: the model for `r`
/// rounds is the first `r` trees of the longest fit. Fits run in parallel
/// and are collected in a fixed order, so results do not depend on the
/// thread count.
pub fn cv_grid_search(
    x: &Matrix,
    y: &[u8],
    grid: &[GbdtParams],
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("grid is empty".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    for p in grid {
        p.validate()?;
    }
    let fold_rows = stratified_folds(y, folds, seed)?;
    let splits: Vec<(Matrix, Vec<u8>, Matrix, Vec<u8>)> = fold_rows
        .iter()
        .map(|valid| {
            let mut in_valid = vec![false; y.len()];
            for &i in valid {
                in_valid[i] = true;
            }
            let train: Vec<usize> = (0..y.len()).filter(|&i| !in_valid[i]).collect();
            (
                x.select_rows(&train),
                train.iter().map(|&i| y[i]).collect(),
                x.select_rows(valid),
                valid.iter().map(|&i| y[i]).collect(),
            )
        })
        .collect();

    // Groups of grid indices sharing everything but `rounds`.
    let mut groups: Vec<(GbdtParams, Vec<usize>)> = Vec::new();
    for (i, p) in grid.iter().enumerate() {
        let key = GbdtParams { rounds: 1, ..*p };
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(i),
            None => groups.push((key, vec![i])),
        }
    }

    let jobs: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..folds).map(move |f| (g, f)))
        .collect();
    let results: Vec<Vec<(usize, f64)>> = jobs
        .par_iter()
        .map(|&(g, f)| -> Result<Vec<(usize, f64)>> {
            let (key, members) = &groups[g];
            let max_rounds = members.iter().map(|&i| grid[i].rounds).max().unwrap_or(1);
            let (xt, yt, xv, yv) = &splits[f];
            let model = train_gbdt(xt, yt, &GbdtParams { rounds: max_rounds, ..*key })?;
            members
                .iter()
                .map(|&i| {
                    let predicted = model.truncated(grid[i].rounds).classify(xv)?;
                    Ok((i, accuracy_of(&predicted, yv)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut per_point = vec![vec![0.0; folds]; grid.len()];
    for (&(_, f), scores) in jobs.iter().zip(&results) {
        for &(i, acc) in scores {
            per_point[i][f] = acc;
        }
    }
    let rows: Vec<CvRow> = grid
        .iter()
        .zip(per_point)
        .map(|(p, fold_accuracies)| CvRow {
            params: *p,
            mean_accuracy: fold_accuracies.iter().sum::<f64>() / folds as f64,
            fold_accuracies,
        })
        .collect();
    let chosen_index = choose(&rows);
    Ok(CvReport {
        chosen: rows[chosen_index].params,
        chosen_index,
        rows,
        folds,
        seed,
    })
}

fn accuracy_of(predicted: &[u8], truth: &[u8]) -> f64 {
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}
