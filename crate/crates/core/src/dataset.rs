//! Labeled binary-classification datasets: CSV ingestion, class balancing and
//! a synthetic two-cluster generator.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Nominal,
    Integer,
    Continuous,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Nominal => "nominal",
            ColumnKind::Integer => "integer",
            ColumnKind::Continuous => "continuous",
        }
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nominal" | "nom" => Ok(ColumnKind::Nominal),
            "integer" | "int" => Ok(ColumnKind::Integer),
            "continuous" | "cont" => Ok(ColumnKind::Continuous),
            other => Err(Error::Schema(format!("unknown column kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// `M` samples over `D` numeric columns with binary labels.
///
/// Nominal columns hold integer codes assigned in first-appearance order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    columns: Vec<Column>,
    features: Matrix,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<Column>,
        features: Matrix,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if columns.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 columns, got {}",
                columns.len()
            )));
        }
        if features.ncols() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                got: features.ncols(),
            });
        }
        if features.nrows() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidDataset(format!("label {bad} is not 0 or 1")));
        }
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        Ok(Self {
            name: name.into(),
            columns,
            features,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Number of samples, `M`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of dimensions, `D`.
    pub fn dims(&self) -> usize {
        self.columns.len()
    }

    pub fn value(&self, row: usize, dim: usize) -> f64 {
        self.features.get(row, dim)
    }

    pub fn row(&self, row: usize) -> &[f64] {
        self.features.row(row)
    }

    pub fn label_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Content hash over columns, values and labels (the name is excluded).
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for column in &self.columns {
            hasher.update(column.name.as_bytes());
            hasher.update([0u8]);
            hasher.update(column.kind.as_str().as_bytes());
            hasher.update([0u8]);
        }
        hasher.update((self.len() as u64).to_le_bytes());
        for v in self.features.as_slice() {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hasher.update(&self.labels);
        hex::encode(hasher.finalize())
    }

    fn with_rows(&self, order: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            columns: self.columns.clone(),
            features: self.features.select_rows(order),
            labels: order.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Writes the dataset as CSV with a trailing `label` column holding 0/1.
    pub fn write_csv(&self, path: &Path, label_column: &str) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        header.push(label_column);
        writer.write_record(&header)?;
        for (i, row) in self.features.rows_iter().enumerate() {
            let mut record: Vec<String> = row
                .iter()
                .zip(&self.columns)
                .map(|(v, c)| match c.kind {
                    ColumnKind::Continuous => format!("{v:?}"),
                    _ => format!("{}", *v as i64),
                })
                .collect();
            record.push(self.labels[i].to_string());
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Reads a `column_name,kind` sidecar. Blank lines and `#` comments are skipped.
pub fn load_schema(path: &Path) -> Result<Vec<Column>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_schema(&text)
}

pub fn parse_schema(text: &str) -> Result<Vec<Column>> {
    let mut columns = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, kind) = line
            .split_once(',')
            .ok_or_else(|| Error::Schema(format!("line {}: expected `name,kind`", n + 1)))?;
        columns.push(Column::new(name.trim(), kind.parse()?));
    }
    if columns.is_empty() {
        return Err(Error::Schema("no columns declared".into()));
    }
    Ok(columns)
}

pub fn write_schema(path: &Path, columns: &[Column]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for c in columns {
        writeln!(file, "{},{}", c.name, c.kind).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Loads a CSV file whose header lists the schema's columns plus `label_column`.
///
/// A schema entry naming the label column is ignored.
pub fn load_csv(path: &Path, schema: &[Column], label_column: &str) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();

    let columns: Vec<Column> = schema
        .iter()
        .filter(|c| c.name != label_column)
        .cloned()
        .collect();
    let label_pos = header.iter().position(|h| h == label_column);
    let feature_header: Vec<&String> = header.iter().filter(|h| *h != label_column).collect();
    let names_match = feature_header.len() == columns.len()
        && feature_header.iter().zip(&columns).all(|(h, c)| **h == c.name);
    let Some(label_pos) = label_pos.filter(|_| names_match) else {
        let mut expected: Vec<String> = columns.iter().map(|c| c.name.clone()).collect();
        expected.push(label_column.to_owned());
        return Err(Error::HeaderMismatch {
            expected,
            found: header,
        });
    };

    let mut nominal_codes: Vec<HashMap<String, usize>> = vec![HashMap::new(); columns.len()];
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let mut col = 0;
        for (pos, field) in record.iter().enumerate() {
            if pos == label_pos {
                raw_labels.push(field.to_owned());
                continue;
            }
            let column = &columns[col];
            let bad = |kind| Error::BadValue {
                row: r + 1,
                column: column.name.clone(),
                value: field.to_owned(),
                kind,
            };
            let v = match column.kind {
                ColumnKind::Nominal => {
                    let codes = &mut nominal_codes[col];
                    let next = codes.len();
                    *codes.entry(field.to_owned()).or_insert(next) as f64
                }
                ColumnKind::Integer => field.parse::<i64>().map_err(|_| bad("integer"))? as f64,
                ColumnKind::Continuous => field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad("continuous"))?,
            };
            values.push(v);
            col += 1;
        }
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }

    let distinct: BTreeSet<&str> = raw_labels.iter().map(String::as_str).collect();
    if distinct.len() != 2 {
        return Err(Error::LabelCardinality {
            column: label_column.to_owned(),
            count: distinct.len(),
        });
    }
    let zero = *distinct.iter().next().expect("two labels");
    let labels = raw_labels.iter().map(|l| u8::from(l != zero)).collect();

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let features = Matrix::from_vec(raw_labels.len(), columns.len(), values)?;
    Dataset::new(name, columns, features, labels)
}

/// Down-samples the majority label to the minority count, then shuffles.
pub fn balance_classes(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let mut by_label: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_label[l as usize].push(i);
    }
    for (label, rows) in by_label.iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::MissingLabel(label as u8));
        }
    }
    let mut rng = rng::seeded(seed);
    let keep = by_label[0].len().min(by_label[1].len());
    let mut order = Vec::with_capacity(2 * keep);
    for rows in &mut by_label {
        rows.shuffle(&mut rng);
        order.extend_from_slice(&rows[..keep]);
    }
    order.shuffle(&mut rng);
    Ok(ds.with_rows(&order))
}

/// Two Gaussian classes mirrored through the origin on the first
/// `d_informative` dimensions; the remaining dimensions are standard normal
/// noise independent of the label.
pub fn synth_clusters(
    d_total: usize,
    d_informative: usize,
    n_per_class: usize,
    cluster_spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if d_informative < 2 || d_informative > d_total {
        return Err(Error::InvalidDataset(format!(
            "need 2 <= informative ({d_informative}) <= total ({d_total})"
        )));
    }
    if n_per_class == 0 {
        return Err(Error::InvalidDataset("n_per_class must be at least 1".into()));
    }
    if !(cluster_spread >= 0.0 && cluster_spread.is_finite()) {
        return Err(Error::InvalidDataset(format!(
            "cluster spread must be finite and non-negative, got {cluster_spread}"
        )));
    }

    let mut rng = rng::seeded(seed);
    let signs: Vec<f64> = (0..d_informative)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let m = 2 * n_per_class;
    let mut rows = Vec::with_capacity(m);
    for label in [0u8, 1] {
        let mirror = if label == 1 { 1.0 } else { -1.0 };
        for _ in 0..n_per_class {
            let row: Vec<f64> = (0..d_total)
                .map(|d| {
                    let z: f64 = noise.sample(&mut rng);
                    if d < d_informative {
                        mirror * signs[d] + cluster_spread * z
                    } else {
                        z
                    }
                })
                .collect();
            rows.push((row, label));
        }
    }
    rows.shuffle(&mut rng);

    let columns = (0..d_total)
        .map(|d| Column::new(format!("x{d}"), ColumnKind::Continuous))
        .collect();
    let labels = rows.iter().map(|(_, l)| *l).collect();
    let data = rows.into_iter().flat_map(|(r, _)| r).collect();
    Dataset::new(
        "synthetic",
        columns,
        Matrix::from_vec(m, d_total, data)?,
        labels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    fn two_continuous() -> Vec<Column> {
        vec![
            Column::new("a", ColumnKind::Continuous),
            Column::new("b", ColumnKind::Continuous),
        ]
    }

    #[test]
    fn loads_smallest_well_formed_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "tiny.csv", "a,b,y\n1,2,b\n3,4,a\n5.5,6,a\n7,8,b\n");
        let ds = load_csv(&path, &two_continuous(), "y").unwrap();
        assert_eq!(ds.dims(), 2);
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.labels(), &[1, 0, 0, 1]);
        assert_eq!(ds.value(2, 0), 5.5);
    }

    #[test]
    fn credit_shaped_file_has_ten_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let mut schema = String::new();
        let mut header = Vec::new();
        for i in 0..6 {
            schema.push_str(&format!("i{i},integer\n"));
            header.push(format!("i{i}"));
        }
        for i in 0..4 {
            schema.push_str(&format!("c{i},continuous\n"));
            header.push(format!("c{i}"));
        }
        schema.push_str("SeriousDlqin2yrs,integer\n");
        header.insert(0, "SeriousDlqin2yrs".into());
        let mut body = header.join(",") + "\n";
        body.push_str("1,0,1,2,3,4,5,0.5,1.5,2.5,3.5\n0,1,1,1,1,1,1,0.1,0.2,0.3,0.4\n");
        let schema = parse_schema(&schema).unwrap();
        let path = write(&dir, "credit.csv", &body);
        let ds = load_csv(&path, &schema, "SeriousDlqin2yrs").unwrap();
        assert_eq!(ds.dims(), 10);
        assert_eq!(ds.labels(), &[1, 0]);
    }

    #[test]
    fn fractional_integer_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "bad.csv", "a,b,y\n1,3.5,x\n2,4,z\n");
        let schema = vec![
            Column::new("a", ColumnKind::Integer),
            Column::new("b", ColumnKind::Integer),
        ];
        let err = load_csv(&path, &schema, "y").unwrap_err();
        assert!(matches!(err, Error::BadValue { ref column, .. } if column == "b"), "{err}");
    }

    #[test]
    fn nominal_columns_are_coded_by_first_appearance() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "nom.csv", "make,age,y\nford,1,0\naudi,2,1\nford,3,1\nbmw,4,0\n");
        let schema = vec![
            Column::new("make", ColumnKind::Nominal),
            Column::new("age", ColumnKind::Integer),
        ];
        let ds = load_csv(&path, &schema, "y").unwrap();
        let codes: Vec<f64> = (0..4).map(|r| ds.value(r, 0)).collect();
        assert_eq!(codes, vec![0.0, 1.0, 0.0, 2.0]);
    }

    #[test]
    fn ingestion_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.csv");
        assert!(matches!(
            load_csv(&missing, &two_continuous(), "y"),
            Err(Error::Io { .. })
        ));

        let empty = write(&dir, "empty.csv", "");
        assert!(matches!(
            load_csv(&empty, &two_continuous(), "y"),
            Err(Error::EmptyFile { .. })
        ));

        let header = write(&dir, "hdr.csv", "a,c,y\n1,2,0\n");
        assert!(matches!(
            load_csv(&header, &two_continuous(), "y"),
            Err(Error::HeaderMismatch { .. })
        ));

        let three = write(&dir, "three.csv", "a,b,y\n1,2,p\n1,2,q\n1,2,r\n");
        assert!(matches!(
            load_csv(&three, &two_continuous(), "y"),
            Err(Error::LabelCardinality { count: 3, .. })
        ));

        let text = write(&dir, "text.csv", "a,b,y\n1,abc,p\n1,2,q\n");
        assert!(matches!(
            load_csv(&text, &two_continuous(), "y"),
            Err(Error::BadValue { .. })
        ));
    }

    fn labeled(labels: Vec<u8>) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..labels.len()).map(|i| vec![i as f64, 0.5]).collect();
        Dataset::new(
            "t",
            two_continuous(),
            Matrix::from_rows(&rows).unwrap(),
            labels,
        )
        .unwrap()
    }

    fn row_multiset(ds: &Dataset) -> Vec<(u64, u8)> {
        let mut rows: Vec<(u64, u8)> = (0..ds.len())
            .map(|i| (ds.value(i, 0).to_bits(), ds.labels()[i]))
            .collect();
        rows.sort_unstable();
        rows
    }

    #[test]
    fn balancing_downsamples_majority() {
        let ds = labeled([vec![1; 60], vec![0; 40]].concat());
        let balanced = balance_classes(&ds, 3).unwrap();
        assert_eq!(balanced.label_counts(), [40, 40]);
        let original = row_multiset(&ds);
        for row in row_multiset(&balanced) {
            assert!(original.binary_search(&row).is_ok());
        }
    }

    #[test]
    fn balancing_balanced_input_keeps_every_row() {
        let ds = labeled([vec![1; 50], vec![0; 50]].concat());
        let balanced = balance_classes(&ds, 11).unwrap();
        assert_eq!(row_multiset(&balanced), row_multiset(&ds));
    }

    #[test]
    fn balancing_is_deterministic_and_needs_both_labels() {
        let ds = labeled([vec![1; 30], vec![0; 12]].concat());
        assert_eq!(balance_classes(&ds, 5).unwrap(), balance_classes(&ds, 5).unwrap());
        assert!(matches!(
            balance_classes(&labeled(vec![1; 5]), 0),
            Err(Error::MissingLabel(0))
        ));
    }

    #[test]
    fn synth_zero_spread_collapses_to_two_points() {
        let ds = synth_clusters(2, 2, 50, 0.0, 1).unwrap();
        let mut points: Vec<(u64, u64, u8)> = (0..ds.len())
            .map(|i| (ds.value(i, 0).to_bits(), ds.value(i, 1).to_bits(), ds.labels()[i]))
            .collect();
        points.sort_unstable();
        points.dedup();
        assert_eq!(points.len(), 2);
        assert_ne!(points[0].2, points[1].2);
    }

    #[test]
    fn synth_counts_and_determinism() {
        let ds = synth_clusters(10, 2, 1000, 0.5, 7).unwrap();
        assert_eq!(ds.len(), 2000);
        assert_eq!(ds.dims(), 10);
        assert_eq!(ds.label_counts(), [1000, 1000]);
        let again = synth_clusters(10, 2, 1000, 0.5, 7).unwrap();
        assert_eq!(ds.content_hash(), again.content_hash());
        assert_eq!(
            serde_json::to_vec(&ds).unwrap(),
            serde_json::to_vec(&again).unwrap()
        );
        assert!(synth_clusters(3, 1, 10, 0.5, 0).is_err());
        assert!(synth_clusters(3, 4, 10, 0.5, 0).is_err());
        assert!(synth_clusters(3, 2, 0, 0.5, 0).is_err());
    }

    #[test]
    fn csv_round_trip_preserves_hash() {
        let dir = tempfile::tempdir().unwrap();
        let ds = synth_clusters(4, 2, 20, 0.3, 2).unwrap();
        let csv_path = dir.path().join("d.csv");
        let schema_path = dir.path().join("d.schema");
        ds.write_csv(&csv_path, "label").unwrap();
        write_schema(&schema_path, ds.columns()).unwrap();
        let back = load_csv(&csv_path, &load_schema(&schema_path).unwrap(), "label").unwrap();
        assert_eq!(back.content_hash(), ds.content_hash());
    }
}
