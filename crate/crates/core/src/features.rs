//! Accepted rectangle models as feature columns.
//!
//! Each model contributes one column whose entry is the model's test
//! accuracy when the sample falls inside one of its rectangles and zero
//! otherwise. The signed variant negates the weight when the containing
//! rectangle predicts label 0.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::polygon::PolygonModel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// Indicator of containment times the model accuracy.
    #[default]
    Literal,
    /// As `Literal`, negated for rectangles predicting label 0.
    Signed,
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(FeatureMode::Literal),
            "signed" => Ok(FeatureMode::Signed),
            other => Err(Error::InvalidParams(format!("unknown feature mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureMode::Literal => "literal",
            FeatureMode::Signed => "signed",
        })
    }
}

fn weight(model: &PolygonModel) -> Result<f64> {
    model.accuracy.ok_or_else(|| Error::Unscored(model.id.clone()))
}

fn value_at(model: &PolygonModel, weight: f64, u: f64, v: f64, mode: FeatureMode) -> f64 {
    match model.locate(u, v) {
        None => 0.0,
        Some(k) => match mode {
            FeatureMode::Literal => weight,
            FeatureMode::Signed if model.rectangles()[k].label == 1 => weight,
            FeatureMode::Signed => -weight,
        },
    }
}

/// Feature value of dataset row `row` under `model`.
pub fn feature_value(ds: &Dataset, row: usize, model: &PolygonModel, mode: FeatureMode) -> Result<f64> {
    let w = weight(model)?;
    let (u, v) = model.project_row(ds, row);
    Ok(value_at(model, w, u, v, mode))
}

/// Samples × models matrix with column ids and the labels of the sampled rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub sample_ids: Vec<usize>,
    pub column_ids: Vec<String>,
    pub values: Matrix,
    pub labels: Vec<u8>,
}

impl FeatureMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// CSV with a `sample` column, one column per model id, then `label`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec!["sample".to_owned()];
        header.extend(self.column_ids.iter().cloned());
        header.push("label".to_owned());
        writer.write_record(&header)?;
        for (i, row) in self.values.rows_iter().enumerate() {
            let mut record = vec![self.sample_ids[i].to_string()];
            record.extend(row.iter().map(|v| format!("{v:?}")));
            record.push(self.labels[i].to_string());
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
        if header.len() < 3 || header[0] != "sample" || header[header.len() - 1] != "label" {
            return Err(Error::Schema(format!(
                "{}: expected `sample,<model ids>,label` header",
                path.display()
            )));
        }
        let column_ids = header[1..header.len() - 1].to_vec();
        let n = column_ids.len();
        let mut sample_ids = Vec::new();
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record?;
            let bad = |value: &str| Error::BadValue {
                row: r + 1,
                column: "feature".into(),
                value: value.to_owned(),
                kind: "number",
            };
            sample_ids.push(record[0].parse().map_err(|_| bad(&record[0]))?);
            for field in record.iter().skip(1).take(n) {
                data.push(field.parse::<f64>().map_err(|_| bad(field))?);
            }
            let label = &record[n + 1];
            labels.push(match label {
                "0" => 0,
                "1" => 1,
                other => return Err(bad(other)),
            });
        }
        Ok(Self {
            values: Matrix::from_vec(sample_ids.len(), n, data)?,
            sample_ids,
            column_ids,
            labels,
        })
    }
}

/// Builds the feature matrix for `indices`, one column per model in order.
/// Rows are computed in parallel; each entry depends only on its own row and
/// column, so the result equals the sequential computation.
pub fn build_feature_matrix(
    ds: &Dataset,
    indices: &[usize],
    models: &[PolygonModel],
    mode: FeatureMode,
) -> Result<FeatureMatrix> {
    if models.is_empty() {
        return Err(Error::NoModels);
    }
    let weights = models.iter().map(weight).collect::<Result<Vec<f64>>>()?;
    for m in models {
        m.pair.check(ds.dims())?;
    }
    let n = models.len();
    let mut values = Matrix::zeros(indices.len(), n);
    let data: Vec<f64> = indices
        .par_iter()
        .flat_map_iter(|&row| {
            models.iter().zip(&weights).map(move |(m, &w)| {
                let (u, v) = m.project_row(ds, row);
                value_at(m, w, u, v, mode)
            })
        })
        .collect();
    for (i, chunk) in data.chunks(n).enumerate() {
        values.row_mut(i).copy_from_slice(chunk);
    }
    Ok(FeatureMatrix {
        sample_ids: indices.to_vec(),
        column_ids: models.iter().map(|m| m.id.clone()).collect(),
        values,
        labels: indices.iter().map(|&i| ds.labels()[i]).collect(),
    })
}

/// Sorted set of dimensions used by at least one model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsedDimensions(Vec<usize>);

impl UsedDimensions {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn used_dimensions(models: &[PolygonModel]) -> UsedDimensions {
    let set: BTreeSet<usize> = models
        .iter()
        .flat_map(|m| [m.pair.dim_a(), m.pair.dim_b()])
        .collect();
    UsedDimensions(set.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Column, ColumnKind};
    use crate::pairing::DimensionPair;
    use crate::polygon::{Provenance, Rectangle};
    use crate::split::NormStats;

    const IDENTITY: NormStats = NormStats {
        mean: [0.0, 0.0],
        std: [1.0, 1.0],
    };

    fn scored(id: &str, pair: (usize, usize), rects: Vec<Rectangle>, acc: f64) -> PolygonModel {
        let mut m = PolygonModel::new(
            id,
            Provenance::Synthetic,
            DimensionPair::new(pair.0, pair.1).unwrap(),
            IDENTITY,
            rects,
        )
        .unwrap();
        m.accuracy = Some(acc);
        m
    }

    fn two_points() -> Dataset {
        Dataset::new(
            "f",
            vec![
                Column::new("a", ColumnKind::Continuous),
                Column::new("b", ColumnKind::Continuous),
            ],
            Matrix::from_rows(&[vec![0.5, 0.5], vec![4.0, 4.0]]).unwrap(),
            vec![1, 0],
        )
        .unwrap()
    }

    #[test]
    fn values_in_both_modes() {
        let ds = two_points();
        let pos = scored("p", (0, 1), vec![Rectangle::new(0.0, 1.0, 0.0, 1.0, 1, 0).unwrap()], 0.75);
        let neg = scored("n", (0, 1), vec![Rectangle::new(0.0, 1.0, 0.0, 1.0, 0, 0).unwrap()], 0.6);
        assert_eq!(feature_value(&ds, 0, &pos, FeatureMode::Literal).unwrap(), 0.75);
        assert_eq!(feature_value(&ds, 1, &pos, FeatureMode::Literal).unwrap(), 0.0);
        assert_eq!(feature_value(&ds, 1, &pos, FeatureMode::Signed).unwrap(), 0.0);
        assert_eq!(feature_value(&ds, 0, &neg, FeatureMode::Signed).unwrap(), -0.6);
        assert_eq!(feature_value(&ds, 0, &neg, FeatureMode::Literal).unwrap(), 0.6);
        let mut unscored = pos.clone();
        unscored.accuracy = None;
        assert!(matches!(
            feature_value(&ds, 0, &unscored, FeatureMode::Literal),
            Err(Error::Unscored(_))
        ));
    }

    #[test]
    fn single_column_matrix() {
        let ds = two_points();
        let m = scored("only", (0, 1), vec![Rectangle::new(0.0, 1.0, 0.0, 1.0, 1, 0).unwrap()], 0.8);
        let fm = build_feature_matrix(&ds, &[0, 1], &[m], FeatureMode::Literal).unwrap();
        assert_eq!(fm.values.as_slice(), &[0.8, 0.0]);
        assert_eq!(fm.column_ids, vec!["only".to_string()]);
        assert_eq!(fm.labels, vec![1, 0]);
        assert!(matches!(
            build_feature_matrix(&ds, &[0], &[], FeatureMode::Literal),
            Err(Error::NoModels)
        ));
    }

    #[test]
    fn used_dimension_union() {
        let r = || vec![Rectangle::new(0.0, 1.0, 0.0, 1.0, 1, 0).unwrap()];
        let models = vec![scored("a", (0, 3), r(), 0.7), scored("b", (3, 7), r(), 0.7)];
        let used = used_dimensions(&models);
        assert_eq!(used.as_slice(), &[0, 3, 7]);
        assert_eq!(used.len(), 3);
        assert_eq!(used_dimensions(&models[1..]).as_slice(), &[3, 7]);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = two_points();
        let m = scored("m-1", (0, 1), vec![Rectangle::new(0.0, 1.0, 0.0, 1.0, 0, 0).unwrap()], 0.65);
        let fm = build_feature_matrix(&ds, &[1, 0], &[m], FeatureMode::Signed).unwrap();
        let path = dir.path().join("f.csv");
        fm.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "sample,m-1,label");
        assert_eq!(FeatureMatrix::read_csv(&path).unwrap(), fm);
    }
}
