//! Stratified annotation/learner splits and per-pair z-score normalization.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::pairing::DimensionPair;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub annotation_train: usize,
    pub annotation_valid: usize,
    pub annotation_test: usize,
    /// `M′`, the learner's training row count.
    pub learner_train: usize,
}

impl SplitSizes {
    pub fn new(a_train: usize, a_valid: usize, a_test: usize, m_prime: usize) -> Self {
        Self {
            annotation_train: a_train,
            annotation_valid: a_valid,
            annotation_test: a_test,
            learner_train: m_prime,
        }
    }

    /// 100/100/200 annotation rows and `M′ = min(2000, M/2)`.
    pub fn default_for(m: usize) -> Self {
        Self::new(100, 100, 200, (m / 2).min(2000))
    }

    fn annotation_total(&self) -> usize {
        self.annotation_train + self.annotation_valid + self.annotation_test
    }
}

/// Index lists into a [`Dataset`].
///
/// `learner_train` and `learner_test` partition the rows. The three
/// annotation lists are pairwise disjoint subsets of `learner_train`, so no
/// annotator ever sees a row the final comparison is scored on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSet {
    pub annotation_train: Vec<usize>,
    pub annotation_valid: Vec<usize>,
    pub annotation_test: Vec<usize>,
    pub learner_train: Vec<usize>,
    pub learner_test: Vec<usize>,
}

impl SplitSet {
    /// Checks the index invariants against a dataset of `m` rows.
    pub fn validate(&self, m: usize) -> Result<()> {
        let mut owner = vec![0u8; m];
        let mut mark = |list: &[usize], bit: u8, name: &str| -> Result<()> {
            for &i in list {
                let slot = owner.get_mut(i).ok_or_else(|| {
                    Error::InvalidSizes(format!("{name} index {i} out of range for {m} rows"))
                })?;
                if *slot & bit != 0 || (bit < 8 && *slot & 0b0111 != 0) {
                    return Err(Error::InvalidSizes(format!("{name} index {i} repeated")));
                }
                *slot |= bit;
            }
            Ok(())
        };
        mark(&self.annotation_train, 0b0001, "annotation_train")?;
        mark(&self.annotation_valid, 0b0010, "annotation_valid")?;
        mark(&self.annotation_test, 0b0100, "annotation_test")?;
        mark(&self.learner_train, 0b1000, "learner_train")?;
        mark(&self.learner_test, 0b1_0000, "learner_test")?;
        for (i, &bits) in owner.iter().enumerate() {
            let annotated = bits & 0b0111 != 0;
            let train = bits & 0b1000 != 0;
            let test = bits & 0b1_0000 != 0;
            if train && test {
                return Err(Error::InvalidSizes(format!("row {i} in both learner splits")));
            }
            if annotated && !train {
                return Err(Error::InvalidSizes(format!(
                    "annotation row {i} outside learner_train"
                )));
            }
        }
        Ok(())
    }
}

/// Splits `ds` with every list stratified to within one sample of 50/50.
pub fn make_splits(ds: &Dataset, sizes: SplitSizes, seed: u64) -> Result<SplitSet> {
    let m = ds.len();
    let parts = [
        sizes.annotation_train,
        sizes.annotation_valid,
        sizes.annotation_test,
        sizes.learner_train,
    ];
    if parts.contains(&0) {
        return Err(Error::InvalidSizes("every split size must be at least 1".into()));
    }
    if sizes.annotation_total() > sizes.learner_train {
        return Err(Error::InvalidSizes(format!(
            "annotation splits ({}) exceed learner_train ({})",
            sizes.annotation_total(),
            sizes.learner_train
        )));
    }
    if sizes.learner_train > m {
        return Err(Error::InvalidSizes(format!(
            "learner_train ({}) exceeds dataset size ({m})",
            sizes.learner_train
        )));
    }

    let mut rng = rng::seeded(seed);
    let mut pools: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in ds.labels().iter().enumerate() {
        pools[l as usize].push(i);
    }
    for pool in &mut pools {
        pool.shuffle(&mut rng);
    }

    let learner_test = draw_stratified(&mut pools, m - sizes.learner_train)?;
    let mut learner_train: Vec<usize> = pools.iter().flatten().copied().collect();
    learner_train.sort_unstable();
    let annotation_train = draw_stratified(&mut pools, sizes.annotation_train)?;
    let annotation_valid = draw_stratified(&mut pools, sizes.annotation_valid)?;
    let annotation_test = draw_stratified(&mut pools, sizes.annotation_test)?;

    Ok(SplitSet {
        annotation_train,
        annotation_valid,
        annotation_test,
        learner_train,
        learner_test,
    })
}

/// Takes `n` rows split evenly across labels; an odd row comes from the
/// larger pool (label 0 on ties).
fn draw_stratified(pools: &mut [Vec<usize>; 2], n: usize) -> Result<Vec<usize>> {
    let extra_label = usize::from(pools[1].len() > pools[0].len());
    let mut taken = Vec::with_capacity(n);
    for (label, pool) in pools.iter_mut().enumerate() {
        let want = n / 2 + usize::from(n % 2 == 1 && label == extra_label);
        if pool.len() < want {
            return Err(Error::StratumTooSmall {
                label: label as u8,
                needed: want,
                available: pool.len(),
            });
        }
        taken.extend(pool.drain(pool.len() - want..));
    }
    taken.sort_unstable();
    Ok(taken)
}

/// Mean and population standard deviation of both pair members, measured on
/// the annotation training rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

impl NormStats {
    pub fn apply(&self, a: f64, b: f64) -> (f64, f64) {
        (
            (a - self.mean[0]) / self.std[0],
            (b - self.mean[1]) / self.std[1],
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self
            .mean
            .iter()
            .chain(&self.std)
            .all(|v| v.is_finite())
            && self.std.iter().all(|&s| s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDataset(format!("invalid normalization stats {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub u: f64,
    pub v: f64,
    pub label: u8,
}

/// Population mean and standard deviation of `values`; `None` when all equal.
pub(crate) fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    let first = *values.first()?;
    if values.iter().all(|&v| v == first) {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub fn norm_stats(ds: &Dataset, split: &SplitSet, pair: DimensionPair) -> Result<NormStats> {
    pair.check(ds.dims())?;
    let mut mean = [0.0; 2];
    let mut std = [0.0; 2];
    for (k, dim) in [pair.dim_a(), pair.dim_b()].into_iter().enumerate() {
        let values: Vec<f64> = split
            .annotation_train
            .iter()
            .map(|&i| ds.value(i, dim))
            .collect();
        let (m, s) = mean_std(&values).ok_or(Error::ZeroVariance(dim))?;
        mean[k] = m;
        std[k] = s;
    }
    Ok(NormStats { mean, std })
}

/// Normalized coordinates of the given rows under `stats`.
pub fn project(
    ds: &Dataset,
    pair: DimensionPair,
    stats: &NormStats,
    indices: &[usize],
) -> Vec<LabeledPoint> {
    indices
        .iter()
        .map(|&i| {
            let (u, v) = stats.apply(ds.value(i, pair.dim_a()), ds.value(i, pair.dim_b()));
            LabeledPoint {
                u,
                v,
                label: ds.labels()[i],
            }
        })
        .collect()
}

/// Z-scores the annotation training rows on `pair`, returning the points and
/// the stats that map any other row into the same coordinates.
pub fn normalize_pair(
    ds: &Dataset,
    split: &SplitSet,
    pair: DimensionPair,
) -> Result<(Vec<LabeledPoint>, NormStats)> {
    let stats = norm_stats(ds, split, pair)?;
    Ok((project(ds, pair, &stats, &split.annotation_train), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_clusters, Column, ColumnKind};
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    fn balanced(m: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..m).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let labels = (0..m).map(|i| (i % 2) as u8).collect();
        Dataset::new(
            "b",
            vec![
                Column::new("a", ColumnKind::Integer),
                Column::new("b", ColumnKind::Integer),
            ],
            Matrix::from_rows(&rows).unwrap(),
            labels,
        )
        .unwrap()
    }

    fn label_balance(ds: &Dataset, list: &[usize]) -> i64 {
        let ones = list.iter().filter(|&&i| ds.labels()[i] == 1).count() as i64;
        ones - (list.len() as i64 - ones)
    }

    #[test]
    fn sizes_from_arithmetic() {
        let ds = balanced(4000);
        let split = make_splits(&ds, SplitSizes::new(100, 100, 200, 2000), 1).unwrap();
        assert_eq!(split.learner_test.len(), 2000);
        assert_eq!(split.learner_train.len(), 2000);
        assert_eq!(split.annotation_train.len(), 100);
        assert_eq!(split.annotation_valid.len(), 100);
        assert_eq!(split.annotation_test.len(), 200);
        split.validate(ds.len()).unwrap();
    }

    #[test]
    fn madelon_shape_leaves_600_test_rows() {
        let ds = balanced(2600);
        let split = make_splits(&ds, SplitSizes::new(100, 100, 200, 2000), 9).unwrap();
        assert_eq!(split.learner_test.len(), 600);
    }

    #[test]
    fn oversized_requests_fail() {
        let ds = balanced(100);
        assert!(matches!(
            make_splits(&ds, SplitSizes::new(10, 10, 10, 101), 0),
            Err(Error::InvalidSizes(_))
        ));
        assert!(matches!(
            make_splits(&ds, SplitSizes::new(40, 40, 40, 90), 0),
            Err(Error::InvalidSizes(_))
        ));
        assert!(make_splits(&ds, SplitSizes::new(0, 10, 10, 50), 0).is_err());
    }

    #[test]
    fn small_stratum_fails() {
        let mut labels = vec![0u8; 20];
        labels[0] = 1;
        labels[1] = 1;
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 1.0]).collect();
        let ds = Dataset::new(
            "s",
            vec![
                Column::new("a", ColumnKind::Integer),
                Column::new("b", ColumnKind::Integer),
            ],
            Matrix::from_rows(&rows).unwrap(),
            labels,
        )
        .unwrap();
        assert!(matches!(
            make_splits(&ds, SplitSizes::new(2, 2, 2, 10), 0),
            Err(Error::StratumTooSmall { label: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn splits_are_disjoint_stratified_and_deterministic(
            half in 60usize..300,
            a in 1usize..20, b in 1usize..20, c in 1usize..40,
            extra in 0usize..100,
            seed in any::<u64>(),
        ) {
            let ds = balanced(2 * half);
            let m_prime = (a + b + c + extra).min(2 * half);
            prop_assume!(a + b + c <= m_prime);
            let sizes = SplitSizes::new(a, b, c, m_prime);
            let split = make_splits(&ds, sizes, seed).unwrap();
            split.validate(ds.len()).unwrap();
            for list in [&split.annotation_train, &split.annotation_valid,
                         &split.annotation_test, &split.learner_train, &split.learner_test] {
                prop_assert!(label_balance(&ds, list).abs() <= 1);
            }
            prop_assert_eq!(split.learner_test.len(), ds.len() - m_prime);
            prop_assert_eq!(&split, &make_splits(&ds, sizes, seed).unwrap());
        }

        #[test]
        fn normalized_training_rows_are_standardized(seed in any::<u64>()) {
            let ds = synth_clusters(4, 2, 200, 0.7, seed).unwrap();
            let split = make_splits(&ds, SplitSizes::new(100, 50, 50, 300), seed).unwrap();
            let pair = DimensionPair::new(0, 3).unwrap();
            let (points, _) = normalize_pair(&ds, &split, pair).unwrap();
            let us: Vec<f64> = points.iter().map(|p| p.u).collect();
            let vs: Vec<f64> = points.iter().map(|p| p.v).collect();
            for axis in [us, vs] {
                let n = axis.len() as f64;
                let mean = axis.iter().sum::<f64>() / n;
                let std = (axis.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((std - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn population_z_scores_by_hand() {
        // {1,2,3}: mean 2, population std sqrt(2/3) = 0.8165
        let rows = vec![vec![1.0, 5.0], vec![2.0, 6.0], vec![3.0, 9.0], vec![9.0, 9.0]];
        let ds = Dataset::new(
            "h",
            vec![
                Column::new("a", ColumnKind::Continuous),
                Column::new("b", ColumnKind::Continuous),
            ],
            Matrix::from_rows(&rows).unwrap(),
            vec![0, 1, 0, 1],
        )
        .unwrap();
        let split = SplitSet {
            annotation_train: vec![0, 1, 2],
            annotation_valid: vec![],
            annotation_test: vec![],
            learner_train: vec![0, 1, 2],
            learner_test: vec![3],
        };
        let (points, stats) = normalize_pair(&ds, &split, DimensionPair::new(0, 1).unwrap()).unwrap();
        assert!((stats.mean[0] - 2.0).abs() < 1e-15);
        assert!((stats.std[0] - 0.816_496_580_927_726).abs() < 1e-12);
        let us: Vec<f64> = points.iter().map(|p| p.u).collect();
        let expected = [-1.224_744_871_391_589, 0.0, 1.224_744_871_391_589];
        for (u, e) in us.iter().zip(expected) {
            assert!((u - e).abs() < 1e-12, "{u} vs {e}");
        }
        assert_eq!(stats.apply(stats.mean[0], stats.mean[1]), (0.0, 0.0));
    }

    #[test]
    fn constant_column_is_zero_variance() {
        let rows = vec![vec![4.0, 1.0], vec![4.0, 2.0], vec![4.0, 3.0]];
        let ds = Dataset::new(
            "c",
            vec![
                Column::new("a", ColumnKind::Continuous),
                Column::new("b", ColumnKind::Continuous),
            ],
            Matrix::from_rows(&rows).unwrap(),
            vec![0, 1, 0],
        )
        .unwrap();
        let split = SplitSet {
            annotation_train: vec![0, 1, 2],
            annotation_valid: vec![],
            annotation_test: vec![],
            learner_train: vec![0, 1, 2],
            learner_test: vec![],
        };
        assert!(matches!(
            normalize_pair(&ds, &split, DimensionPair::new(0, 1).unwrap()),
            Err(Error::ZeroVariance(0))
        ));
    }
}
