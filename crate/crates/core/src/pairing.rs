//! Dimension pairs ranked by absolute Pearson correlation.

use std::fmt;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::split::{mean_std, SplitSet};

/// Two column indices with `dim_a < dim_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct DimensionPair {
    dim_a: usize,
    dim_b: usize,
}

#[derive(Deserialize)]
struct RawPair {
    dim_a: usize,
    dim_b: usize,
}

impl TryFrom<RawPair> for DimensionPair {
    type Error = Error;

    fn try_from(raw: RawPair) -> Result<Self> {
        DimensionPair::new(raw.dim_a, raw.dim_b)
    }
}

impl DimensionPair {
    pub fn new(dim_a: usize, dim_b: usize) -> Result<Self> {
        if dim_a >= dim_b {
            return Err(Error::InvalidDataset(format!(
                "pair ({dim_a}, {dim_b}) must satisfy dim_a < dim_b"
            )));
        }
        Ok(Self { dim_a, dim_b })
    }

    pub fn dim_a(self) -> usize {
        self.dim_a
    }

    pub fn dim_b(self) -> usize {
        self.dim_b
    }

    pub fn check(self, dims: usize) -> Result<()> {
        if self.dim_b >= dims {
            return Err(Error::DimensionOutOfRange {
                index: self.dim_b,
                dims,
            });
        }
        Ok(())
    }
}

impl fmt::Display for DimensionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.dim_a, self.dim_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub pair: DimensionPair,
    pub rho: f64,
}

/// Pearson correlation of every usable unordered dimension pair, stored once
/// per pair in `(dim_a, dim_b)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    entries: Vec<PairCorrelation>,
}

impl CorrelationTable {
    pub fn from_entries(mut entries: Vec<PairCorrelation>) -> Self {
        entries.sort_by_key(|e| e.pair);
        Self { entries }
    }

    pub fn entries(&self) -> &[PairCorrelation] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, pair: DimensionPair) -> Option<f64> {
        self.entries
            .binary_search_by_key(&pair, |e| e.pair)
            .ok()
            .map(|i| self.entries[i].rho)
    }

    /// Entries ordered by ascending `|ρ|`, ties by pair.
    pub fn ranked(&self) -> Vec<PairCorrelation> {
        let mut ranked = self.entries.clone();
        ranked.sort_by(|a, b| a.rho.abs().total_cmp(&b.rho.abs()).then(a.pair.cmp(&b.pair)));
        ranked
    }
}

/// Pearson ρ over the annotation training rows. Dimensions constant on
/// those rows are left out.
pub fn correlation_table(ds: &Dataset, split: &SplitSet) -> Result<CorrelationTable> {
    let rows = &split.annotation_train;
    let centered: Vec<(usize, Vec<f64>, f64)> = (0..ds.dims())
        .filter_map(|d| {
            let values: Vec<f64> = rows.iter().map(|&i| ds.value(i, d)).collect();
            let (mean, _) = mean_std(&values)?;
            let dev: Vec<f64> = values.iter().map(|v| v - mean).collect();
            let norm = dev.iter().map(|x| x * x).sum::<f64>().sqrt();
            Some((d, dev, norm))
        })
        .collect();
    if centered.len() < 2 {
        return Err(Error::TooFewDimensions(centered.len()));
    }

    let mut entries = Vec::with_capacity(centered.len() * (centered.len() - 1) / 2);
    for (i, (da, xa, na)) in centered.iter().enumerate() {
        for (db, xb, nb) in &centered[i + 1..] {
            let dot: f64 = xa.iter().zip(xb).map(|(a, b)| a * b).sum();
            entries.push(PairCorrelation {
                pair: DimensionPair::new(*da, *db)?,
                rho: (dot / (na * nb)).clamp(-1.0, 1.0),
            });
        }
    }
    Ok(CorrelationTable::from_entries(entries))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectMode {
    /// The `k` pairs with smallest `|ρ|`.
    Rank,
    /// `k` pairs drawn uniformly without replacement from the lowest-`|ρ|` quartile.
    Sample,
}

impl std::str::FromStr for SelectMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank" => Ok(SelectMode::Rank),
            "sample" => Ok(SelectMode::Sample),
            other => Err(Error::InvalidParams(format!("unknown pair mode `{other}`"))),
        }
    }
}

pub fn select_pairs(
    table: &CorrelationTable,
    k: usize,
    mode: SelectMode,
    seed: u64,
) -> Result<Vec<DimensionPair>> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    let ranked = table.ranked();
    match mode {
        SelectMode::Rank => Ok(ranked.iter().take(k).map(|e| e.pair).collect()),
        SelectMode::Sample => {
            let quartile = ranked.len().div_ceil(4);
            let n = k.min(quartile);
            let mut rng = rng::seeded(seed);
            let mut picks = index::sample(&mut rng, quartile, n).into_vec();
            picks.sort_unstable();
            Ok(picks.into_iter().map(|i| ranked[i].pair).collect())
        }
    }
}
