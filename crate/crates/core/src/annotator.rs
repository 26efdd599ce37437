//! A programmatic stand-in for a human annotator.
//!
//! The annotator sees what a person would: the normalized training points of
//! one dimension pair, plus a validation accuracy readout for whatever it has
//! drawn so far. It works greedily on a lattice over the training points:
//! every lattice-aligned box is a candidate, labeled by the majority of the
//! not-yet-covered training points inside it. Boxes whose majority share is
//! below the target accuracy are skipped, and the box with the largest
//! net gain (correct minus wrong among newly covered points) is drawn next.
//! Drawing stops once the readout reaches the target accuracy, the rectangle
//! budget is spent, or no box gains anything.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::pairing::DimensionPair;
use crate::polygon::{score_points, PolygonModel, Provenance, Rectangle};
use crate::rng;
use crate::split::{normalize_pair, project, LabeledPoint, SplitSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorBudget {
    pub max_rectangles: usize,
    pub grid_resolution: usize,
    pub target_accuracy: f64,
}

impl Default for AnnotatorBudget {
    fn default() -> Self {
        Self {
            max_rectangles: 8,
            grid_resolution: 16,
            target_accuracy: 0.7,
        }
    }
}

impl AnnotatorBudget {
    pub fn validate(&self) -> Result<()> {
        if self.max_rectangles == 0 || self.grid_resolution == 0 {
            return Err(Error::InvalidParams(
                "max_rectangles and grid_resolution must be positive".into(),
            ));
        }
        if !(self.target_accuracy > 0.5 && self.target_accuracy <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "target_accuracy must lie in (0.5, 1], got {}",
                self.target_accuracy
            )));
        }
        Ok(())
    }
}

/// Candidate boxes span at most this many lattice lines per axis; finer
/// lattices are walked with a coarser stride.
const MAX_LINES: usize = 17;

struct Lattice {
    /// Cell boundaries; cell `k` holds `edges[k] <= x < edges[k + 1]`.
    edges: Vec<f64>,
    /// Lattice line indices candidates may start or end on.
    lines: Vec<usize>,
}

impl Lattice {
    fn new(values: impl Iterator<Item = f64> + Clone, cells: usize) -> Result<Self> {
        let lo = values.clone().fold(f64::INFINITY, f64::min);
        let hi = values.fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return Err(Error::DegeneratePair);
        }
        let pad = 0.5 * (hi - lo) / cells as f64;
        let (lo, hi) = (lo - pad, hi + pad);
        let step = (hi - lo) / cells as f64;
        let mut edges: Vec<f64> = (0..=cells).map(|k| lo + k as f64 * step).collect();
        edges[cells] = hi;
        let stride = cells.div_ceil(MAX_LINES - 1).max(1);
        let mut lines: Vec<usize> = (0..=cells).step_by(stride).collect();
        if *lines.last().expect("non-empty") != cells {
            lines.push(cells);
        }
        Ok(Self { edges, lines })
    }

    fn cells(&self) -> usize {
        self.edges.len() - 1
    }

    fn cell_of(&self, x: f64) -> usize {
        let interior = &self.edges[1..self.cells()];
        interior.partition_point(|&e| e <= x)
    }

    /// Closed interval containing exactly cells `start..end`. Boxes touching
    /// the lattice border extend one full lattice width beyond it.
    fn span(&self, start: usize, end: usize) -> (f64, f64) {
        let width = self.edges[self.cells()] - self.edges[0];
        let lo = if start == 0 {
            self.edges[0] - width
        } else {
            self.edges[start]
        };
        let hi = if end == self.cells() {
            self.edges[end] + width
        } else {
            self.edges[end].next_down()
        };
        (lo, hi)
    }
}

/// Per-label 2-D prefix sums of point counts over lattice cells.
struct CellCounts {
    rows: usize,
    sums: [Vec<i64>; 2],
}

impl CellCounts {
    fn new(cells_u: usize, cells_v: usize, points: &[(usize, usize, u8)]) -> Self {
        let rows = cells_v + 1;
        let mut sums = [vec![0i64; (cells_u + 1) * rows], vec![0i64; (cells_u + 1) * rows]];
        for &(cu, cv, label) in points {
            sums[label as usize][(cu + 1) * rows + cv + 1] += 1;
        }
        for grid in &mut sums {
            for i in 1..=cells_u {
                for j in 1..=cells_v {
                    grid[i * rows + j] +=
                        grid[(i - 1) * rows + j] + grid[i * rows + j - 1] - grid[(i - 1) * rows + j - 1];
                }
            }
        }
        Self { rows, sums }
    }

    fn count(&self, label: usize, u: (usize, usize), v: (usize, usize)) -> i64 {
        let g = &self.sums[label];
        let r = self.rows;
        g[u.1 * r + v.1] - g[u.0 * r + v.1] - g[u.1 * r + v.0] + g[u.0 * r + v.0]
    }
}

/// (gain, cell area, label, u span, v span); ties are drawn uniformly.
type Candidate = (i64, usize, u8, (usize, usize), (usize, usize));

/// Greedily draws rectangles on `points`. `readout` returns the current
/// validation accuracy of the drawn rectangles, or `None` without coverage.
pub fn propose_rectangles(
    points: &[LabeledPoint],
    budget: &AnnotatorBudget,
    seed: u64,
    mut readout: impl FnMut(&[Rectangle]) -> Result<Option<f64>>,
) -> Result<Vec<Rectangle>> {
    budget.validate()?;
    let lattice_u = Lattice::new(points.iter().map(|p| p.u), budget.grid_resolution)?;
    let lattice_v = Lattice::new(points.iter().map(|p| p.v), budget.grid_resolution)?;
    let located: Vec<(usize, usize, u8)> = points
        .iter()
        .map(|p| (lattice_u.cell_of(p.u), lattice_v.cell_of(p.v), p.label))
        .collect();
    let min_purity = budget.target_accuracy;
    let mut covered = vec![false; points.len()];
    let mut rng = rng::seeded(seed);
    let mut drawn: Vec<Rectangle> = Vec::new();

    while drawn.len() < budget.max_rectangles {
        let open: Vec<(usize, usize, u8)> = located
            .iter()
            .zip(&covered)
            .filter(|(_, &c)| !c)
            .map(|(p, _)| *p)
            .collect();
        let counts = CellCounts::new(lattice_u.cells(), lattice_v.cells(), &open);

        let mut best: Option<Candidate> = None;
        let mut ties = 0u32;
        for (a, &u0) in lattice_u.lines.iter().enumerate() {
            for &u1 in &lattice_u.lines[a + 1..] {
                for (b, &v0) in lattice_v.lines.iter().enumerate() {
                    for &v1 in &lattice_v.lines[b + 1..] {
                        let zeros = counts.count(0, (u0, u1), (v0, v1));
                        let ones = counts.count(1, (u0, u1), (v0, v1));
                        let gain = (ones - zeros).abs();
                        let majority = ones.max(zeros) as f64;
                        if gain == 0 || majority < min_purity * (ones + zeros) as f64 {
                            continue;
                        }
                        let label = u8::from(ones > zeros);
                        let area = (u1 - u0) * (v1 - v0);
                        let candidate = (gain, area, label, (u0, u1), (v0, v1));
                        match &best {
                            Some(b) if (gain, area) < (b.0, b.1) => {}
                            Some(b) if (gain, area) == (b.0, b.1) => {
                                ties += 1;
                                if rng.random_ratio(1, ties) {
                                    best = Some(candidate);
                                }
                            }
                            _ => {
                                ties = 1;
                                best = Some(candidate);
                            }
                        }
                    }
                }
            }
        }
        let Some((_, _, label, (u0, u1), (v0, v1))) = best else {
            break;
        };
        let (u_min, u_max) = lattice_u.span(u0, u1);
        let (v_min, v_max) = lattice_v.span(v0, v1);
        let rect = Rectangle::new(u_min, u_max, v_min, v_max, label, drawn.len() as u32)?;
        for (p, c) in points.iter().zip(covered.iter_mut()) {
            if !*c && rect.contains(p.u, p.v) {
                *c = true;
            }
        }
        drawn.push(rect);
        if readout(&drawn)?.is_some_and(|acc| acc >= budget.target_accuracy) {
            break;
        }
    }

    if drawn.is_empty() {
        return Err(Error::DegeneratePair);
    }
    Ok(drawn)
}

fn synthetic_id(pair: DimensionPair, seed: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update((pair.dim_a() as u64).to_le_bytes());
    hasher.update((pair.dim_b() as u64).to_le_bytes());
    hasher.update(seed.to_le_bytes());
    let digest = hex::encode(hasher.finalize());
    format!("syn-{}-{}-{}", pair.dim_a(), pair.dim_b(), &digest[..10])
}

/// Draws an unscored model on `pair`, using the annotation validation split
/// as the accuracy readout.
pub fn propose_model(
    ds: &Dataset,
    split: &SplitSet,
    pair: DimensionPair,
    budget: &AnnotatorBudget,
    seed: u64,
) -> Result<PolygonModel> {
    let (points, stats) = normalize_pair(ds, split, pair)?;
    let valid = project(ds, pair, &stats, &split.annotation_valid);
    let rectangles = propose_rectangles(&points, budget, seed, |rects| {
        Ok(score_points(rects, &valid).accuracy())
    })?;
    PolygonModel::new(
        synthetic_id(pair, seed),
        Provenance::Synthetic,
        pair,
        stats,
        rectangles,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth_clusters;
    use crate::polygon::{accept_model, model_accuracy, Gate};
    use crate::split::{make_splits, SplitSizes};

    fn cluster_setup(spread: f64, seed: u64) -> (Dataset, SplitSet) {
        let ds = synth_clusters(4, 2, 300, spread, seed).unwrap();
        let split = make_splits(&ds, SplitSizes::new(100, 100, 200, 500), seed).unwrap();
        (ds, split)
    }

    #[test]
    fn separated_clusters_need_one_or_two_boxes() {
        let (ds, split) = cluster_setup(0.1, 3);
        let pair = DimensionPair::new(0, 1).unwrap();
        let model = propose_model(&ds, &split, pair, &AnnotatorBudget::default(), 5).unwrap();
        assert!((1..=2).contains(&model.rectangles().len()), "{:?}", model.rectangles());
        let acc = model_accuracy(&model, &ds, &split.annotation_valid).unwrap();
        assert!(acc > 0.9, "validation accuracy {acc}");
    }

    #[test]
    fn budget_of_one_draws_one_box() {
        let (ds, split) = cluster_setup(0.8, 4);
        let budget = AnnotatorBudget {
            max_rectangles: 1,
            target_accuracy: 1.0,
            ..AnnotatorBudget::default()
        };
        let model = propose_model(&ds, &split, DimensionPair::new(0, 2).unwrap(), &budget, 1).unwrap();
        assert_eq!(model.rectangles().len(), 1);
    }

    #[test]
    fn proposals_are_deterministic() {
        let (ds, split) = cluster_setup(0.6, 8);
        let pair = DimensionPair::new(1, 3).unwrap();
        let a = propose_model(&ds, &split, pair, &AnnotatorBudget::default(), 99).unwrap();
        let b = propose_model(&ds, &split, pair, &AnnotatorBudget::default(), 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn greedy_steps_never_lose_training_correctness() {
        let (ds, split) = cluster_setup(1.2, 6);
        let pair = DimensionPair::new(0, 3).unwrap();
        let (points, _) = normalize_pair(&ds, &split, pair).unwrap();
        let budget = AnnotatorBudget {
            max_rectangles: 6,
            target_accuracy: 1.0,
            ..AnnotatorBudget::default()
        };
        let rects = propose_rectangles(&points, &budget, 2, |_| Ok(None)).unwrap();
        assert!(rects.len() <= 6);
        let mut last = i64::MIN;
        for k in 1..=rects.len() {
            let s = score_points(&rects[..k], &points);
            let net = s.correct as i64 - (s.covered - s.correct) as i64;
            assert!(net > last);
            last = net;
        }
    }

    #[test]
    fn noise_pairs_are_mostly_rejected() {
        let mut rejected = 0;
        for seed in 0..100u64 {
            // Dimensions 2 and 3 carry no label information.
            let (ds, split) = cluster_setup(0.5, 1000 + seed);
            let pair = DimensionPair::new(2, 3).unwrap();
            let mut model = propose_model(&ds, &split, pair, &AnnotatorBudget::default(), seed).unwrap();
            if !accept_model(&mut model, &ds, &split, Gate::default()) {
                rejected += 1;
            }
        }
        assert!(rejected > 50, "only {rejected}/100 noise models rejected");
    }

    #[test]
    fn degenerate_points_fail() {
        let points = vec![LabeledPoint { u: 1.0, v: 1.0, label: 0 }; 5];
        assert!(matches!(
            propose_rectangles(&points, &AnnotatorBudget::default(), 0, |_| Ok(None)),
            Err(Error::DegeneratePair)
        ));
        let bad = AnnotatorBudget {
            target_accuracy: 0.5,
            ..AnnotatorBudget::default()
        };
        assert!(bad.validate().is_err());
    }
}
