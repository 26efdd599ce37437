//! Raw-dimension versus rectangle-feature comparison.
//!
//! Both arms are tuned by the same cross-validated grid search on the
//! learner training rows, refit on all of them with the chosen parameters,
//! and scored on the held-out learner test rows. The raw arm only sees the
//! dimensions that appear in at least one accepted model.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{build_feature_matrix, used_dimensions, FeatureMode};
use crate::matrix::Matrix;
use crate::polygon::PolygonModel;
use crate::rng::derive_seed;
use crate::split::SplitSet;

use super::cv::cv_grid_search;
use super::gbdt::{train_gbdt, GbdtParams};
use super::evaluate_accuracy;

pub const REPORT_VERSION: u32 = 1;

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub dataset: String,
    /// `M′`
    pub m_prime: usize,
    /// `M − M′`
    pub test_count: usize,
    /// `D′`
    pub d_prime: usize,
    pub data_accuracy: f64,
    /// `N`
    pub n_models: usize,
    pub feature_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub chosen: GbdtParams,
    pub cv_mean_accuracy: f64,
    pub test_accuracy: f64,
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub v: u32,
    pub dataset_hash: String,
    pub seed: u64,
    pub feature_mode: FeatureMode,
    pub folds: usize,
    pub grid_size: usize,
    pub used_dimensions: Vec<usize>,
    pub model_ids: Vec<String>,
    pub raw: ArmSummary,
    pub features: ArmSummary,
    pub row: ComparisonRow,
}

#[derive(Debug, Clone)]
pub struct ComparisonConfig {
    pub mode: FeatureMode,
    pub grid: Vec<GbdtParams>,
    pub folds: usize,
    pub seed: u64,
}

fn run_arm(
    train_x: &Matrix,
    train_y: &[u8],
    test_x: &Matrix,
    test_y: &[u8],
    cfg: &ComparisonConfig,
) -> Result<ArmSummary> {
    // Both arms share the fold seed and labels, hence identical folds.
    let cv = cv_grid_search(train_x, train_y, &cfg.grid, cfg.folds, derive_seed(cfg.seed, "cv"))?;
    let model = train_gbdt(train_x, train_y, &cv.chosen)?;
    Ok(ArmSummary {
        chosen: cv.chosen,
        cv_mean_accuracy: cv.best_mean(),
        test_accuracy: evaluate_accuracy(&model, test_x, test_y)?,
        loss_curve: model.loss_curve,
    })
}

pub fn run_comparison(
    ds: &Dataset,
    split: &SplitSet,
    models: &[PolygonModel],
    cfg: &ComparisonConfig,
) -> Result<ComparisonReport> {
    if models.is_empty() {
        return Err(Error::NoModels);
    }
    if split.learner_train.is_empty() || split.learner_test.is_empty() {
        return Err(Error::EmptyInput);
    }
    split.validate(ds.len())?;
    let used = used_dimensions(models);
    let labels = |rows: &[usize]| -> Vec<u8> { rows.iter().map(|&i| ds.labels()[i]).collect() };
    let train_y = labels(&split.learner_train);
    let test_y = labels(&split.learner_test);

    let raw = run_arm(
        &ds.features().select(&split.learner_train, used.as_slice()),
        &train_y,
        &ds.features().select(&split.learner_test, used.as_slice()),
        &test_y,
        cfg,
    )?;
    let features = run_arm(
        &build_feature_matrix(ds, &split.learner_train, models, cfg.mode)?.values,
        &train_y,
        &build_feature_matrix(ds, &split.learner_test, models, cfg.mode)?.values,
        &test_y,
        cfg,
    )?;

    let row = ComparisonRow {
        dataset: ds.name().to_owned(),
        m_prime: split.learner_train.len(),
        test_count: split.learner_test.len(),
        d_prime: used.len(),
        data_accuracy: raw.test_accuracy,
        n_models: models.len(),
        feature_accuracy: features.test_accuracy,
    };
    Ok(ComparisonReport {
        v: REPORT_VERSION,
        dataset_hash: ds.content_hash(),
        seed: cfg.seed,
        feature_mode: cfg.mode,
        folds: cfg.folds,
        grid_size: cfg.grid.len(),
        used_dimensions: used.as_slice().to_vec(),
        model_ids: models.iter().map(|m| m.id.clone()).collect(),
        raw,
        features,
        row,
    })
}

const HEADER: [&str; 7] = ["Name", "M'", "M-M'", "D'", "Data", "N", "Features"];

fn cells(row: &ComparisonRow) -> [String; 7] {
    [
        row.dataset.clone(),
        row.m_prime.to_string(),
        row.test_count.to_string(),
        row.d_prime.to_string(),
        format!("{:.3}", row.data_accuracy),
        row.n_models.to_string(),
        format!("{:.3}", row.feature_accuracy),
    ]
}

/// Aligned plain-text table, names left-aligned and numbers right-aligned.
pub fn render_table(rows: &[ComparisonRow]) -> String {
    let body: Vec<[String; 7]> = rows.iter().map(cells).collect();
    let mut widths = HEADER.map(str::len);
    for r in &body {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cols: [&str; 7]| -> String {
        let mut s = format!("{:<w$}", cols[0], w = widths[0]);
        for (k, c) in cols.iter().enumerate().skip(1) {
            let _ = write!(s, " | {:>w$}", c, w = widths[k]);
        }
        s.push('\n');
        s
    };
    let mut out = line(HEADER);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&rule.join("-+-"));
    out.push('\n');
    for r in &body {
        out.push_str(&line(std::array::from_fn(|k| r[k].as_str())));
    }
    out
}

pub fn render_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("name,m_prime,test_count,d_prime,data_accuracy,n_models,feature_accuracy\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{},{:.6}",
            r.dataset, r.m_prime, r.test_count, r.d_prime, r.data_accuracy, r.n_models, r.feature_accuracy
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row() -> ComparisonRow {
        ComparisonRow {
            dataset: "Mad.".into(),
            m_prime: 2000,
            test_count: 600,
            d_prime: 73,
            data_accuracy: 0.65,
            n_models: 320,
            feature_accuracy: 0.655,
        }
    }

    #[test]
    fn table_has_the_comparison_columns() {
        let table = render_table(&[sample_row()]);
        let mut lines = table.lines();
        let header: Vec<&str> = lines.next().unwrap().split('|').map(str::trim).collect();
        assert_eq!(header, HEADER);
        lines.next();
        let row: Vec<&str> = lines.next().unwrap().split('|').map(str::trim).collect();
        assert_eq!(row, ["Mad.", "2000", "600", "73", "0.650", "320", "0.655"]);
    }

    #[test]
    fn csv_rows() {
        let csv = render_csv(&[sample_row()]);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "Mad.,2000,600,73,0.650000,320,0.655000"
        );
    }
}
