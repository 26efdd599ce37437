//! Rectangle models drawn on a normalized dimension pair, and their
//! coverage-restricted accuracy.
//!
//! A sample is assigned to the containing rectangle with the smallest
//! `draw_order`, so every covered sample counts exactly once and accuracy is
//! always a fraction in `[0, 1]`. Samples outside every rectangle do not
//! contribute to the accuracy at all.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::pairing::DimensionPair;
use crate::split::{project, LabeledPoint, NormStats, SplitSet};

/// Axis-aligned closed region in normalized coordinates predicting one label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub label: u8,
    pub draw_order: u32,
}

impl Rectangle {
    pub fn new(u_min: f64, u_max: f64, v_min: f64, v_max: f64, label: u8, draw_order: u32) -> Result<Self> {
        let rect = Self {
            u_min,
            u_max,
            v_min,
            v_max,
            label,
            draw_order,
        };
        rect.validate().map_err(|(_, msg)| Error::InvalidRectangle(msg))?;
        Ok(rect)
    }

    /// Checks the invariants, naming the offending field on failure.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        for (field, value) in [
            ("u_min", self.u_min),
            ("u_max", self.u_max),
            ("v_min", self.v_min),
            ("v_max", self.v_max),
        ] {
            if !value.is_finite() {
                return Err((field, format!("{field} must be finite, got {value}")));
            }
        }
        if self.u_min >= self.u_max {
            return Err((
                "u_min",
                format!("u_min ({}) must be less than u_max ({})", self.u_min, self.u_max),
            ));
        }
        if self.v_min >= self.v_max {
            return Err((
                "v_min",
                format!("v_min ({}) must be less than v_max ({})", self.v_min, self.v_max),
            ));
        }
        if self.label > 1 {
            return Err(("label", format!("label must be 0 or 1, got {}", self.label)));
        }
        Ok(())
    }

    /// Closed-boundary containment.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        self.u_min <= u && u <= self.u_max && self.v_min <= v && v <= self.v_max
    }

    pub fn area(&self) -> f64 {
        (self.u_max - self.u_min) * (self.v_max - self.v_min)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Human { worker_id: String },
    Synthetic,
}

/// One annotator's rectangles on one dimension pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonModel {
    pub id: String,
    pub provenance: Provenance,
    pub pair: DimensionPair,
    pub stats: NormStats,
    rectangles: Vec<Rectangle>,
    /// Accuracy on the annotation validation split, set on acceptance.
    pub validation_accuracy: Option<f64>,
    /// Accuracy on the annotation test split, set on acceptance; the feature weight.
    pub accuracy: Option<f64>,
}

impl PolygonModel {
    pub fn new(
        id: impl Into<String>,
        provenance: Provenance,
        pair: DimensionPair,
        stats: NormStats,
        mut rectangles: Vec<Rectangle>,
    ) -> Result<Self> {
        if rectangles.is_empty() {
            return Err(Error::EmptyModel);
        }
        for r in &rectangles {
            r.validate().map_err(|(_, msg)| Error::InvalidRectangle(msg))?;
        }
        rectangles.sort_by_key(|r| r.draw_order);
        if rectangles.windows(2).any(|w| w[0].draw_order == w[1].draw_order) {
            return Err(Error::InvalidRectangle("draw_order values must be unique".into()));
        }
        stats.validate()?;
        Ok(Self {
            id: id.into(),
            provenance,
            pair,
            stats,
            rectangles,
            validation_accuracy: None,
            accuracy: None,
        })
    }

    /// Rectangles in ascending draw order.
    pub fn rectangles(&self) -> &[Rectangle] {
        &self.rectangles
    }

    /// Re-checks invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = PolygonModel::new(
            self.id.clone(),
            self.provenance.clone(),
            self.pair,
            self.stats,
            self.rectangles.clone(),
        )?;
        if rebuilt.rectangles != self.rectangles {
            return Err(Error::InvalidRectangle("rectangles not in draw order".into()));
        }
        for acc in [self.validation_accuracy, self.accuracy].into_iter().flatten() {
            if !(0.0..=1.0).contains(&acc) {
                return Err(Error::InvalidParams(format!("accuracy {acc} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Normalized coordinates of dataset row `row`.
    pub fn project_row(&self, ds: &Dataset, row: usize) -> (f64, f64) {
        self.stats
            .apply(ds.value(row, self.pair.dim_a()), ds.value(row, self.pair.dim_b()))
    }

    /// Position (in draw order) of the first rectangle containing `(u, v)`.
    pub fn locate(&self, u: f64, v: f64) -> Option<usize> {
        first_containing(&self.rectangles, u, v)
    }
}

fn first_containing(sorted: &[Rectangle], u: f64, v: f64) -> Option<usize> {
    sorted.iter().position(|r| r.contains(u, v))
}

pub fn contains(rect: &Rectangle, u: f64, v: f64) -> bool {
    rect.contains(u, v)
}

/// Per-sample rectangle assignment; `assigned[k]` is the draw-order position
/// of the rectangle holding `indices[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleAssignment {
    pub indices: Vec<usize>,
    pub assigned: Vec<Option<usize>>,
}

pub fn assign(model: &PolygonModel, ds: &Dataset, indices: &[usize]) -> SampleAssignment {
    let assigned = indices
        .iter()
        .map(|&i| {
            let (u, v) = model.project_row(ds, i);
            model.locate(u, v)
        })
        .collect();
    SampleAssignment {
        indices: indices.to_vec(),
        assigned,
    }
}

/// Counts behind a coverage-restricted accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Score {
    pub correct: usize,
    pub covered: usize,
    pub total: usize,
}

impl Score {
    /// `None` when nothing is covered.
    pub fn accuracy(&self) -> Option<f64> {
        (self.covered > 0).then(|| self.correct as f64 / self.covered as f64)
    }

    pub fn covered_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.covered as f64 / self.total as f64
        }
    }
}

/// Scores rectangles (in any order) against already-normalized points.
pub fn score_points(rectangles: &[Rectangle], points: &[LabeledPoint]) -> Score {
    let mut sorted = rectangles.to_vec();
    sorted.sort_by_key(|r| r.draw_order);
    let mut score = Score {
        total: points.len(),
        ..Score::default()
    };
    for p in points {
        if let Some(k) = first_containing(&sorted, p.u, p.v) {
            score.covered += 1;
            score.correct += usize::from(sorted[k].label == p.label);
        }
    }
    score
}

pub fn score_model(model: &PolygonModel, ds: &Dataset, indices: &[usize]) -> Score {
    let points = project(ds, model.pair, &model.stats, indices);
    score_points(&model.rectangles, &points)
}

/// Fraction of covered samples whose label matches their rectangle's label.
pub fn model_accuracy(model: &PolygonModel, ds: &Dataset, indices: &[usize]) -> Result<f64> {
    score_model(model, ds, indices).accuracy().ok_or(Error::NoCoverage)
}

/// Acceptance thresholds: validation accuracy must be strictly above
/// `threshold` and the covered fraction at least `min_coverage`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub threshold: f64,
    pub min_coverage: f64,
}

impl Default for Gate {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            min_coverage: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NoCoverage,
    BelowThreshold,
    InsufficientCoverage,
    /// Passed validation but covers nothing in the annotation test split,
    /// leaving the feature weight undefined.
    NoTestCoverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Accepted {
        validation_accuracy: f64,
        test_accuracy: f64,
        covered_fraction: f64,
    },
    Rejected {
        reason: RejectReason,
        validation_accuracy: Option<f64>,
        covered_fraction: f64,
    },
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted { .. })
    }
}

/// Applies the gate on the annotation validation split without touching the model.
pub fn judge(model: &PolygonModel, ds: &Dataset, split: &SplitSet, gate: Gate) -> Verdict {
    let valid = score_model(model, ds, &split.annotation_valid);
    let covered_fraction = valid.covered_fraction();
    let reject = |reason, validation_accuracy| Verdict::Rejected {
        reason,
        validation_accuracy,
        covered_fraction,
    };
    let Some(validation_accuracy) = valid.accuracy() else {
        return reject(RejectReason::NoCoverage, None);
    };
    if validation_accuracy <= gate.threshold {
        return reject(RejectReason::BelowThreshold, Some(validation_accuracy));
    }
    if covered_fraction < gate.min_coverage {
        return reject(RejectReason::InsufficientCoverage, Some(validation_accuracy));
    }
    match score_model(model, ds, &split.annotation_test).accuracy() {
        Some(test_accuracy) => Verdict::Accepted {
            validation_accuracy,
            test_accuracy,
            covered_fraction,
        },
        None => reject(RejectReason::NoTestCoverage, Some(validation_accuracy)),
    }
}

/// Runs the gate and, on success, stores both accuracies on the model.
pub fn accept_model(model: &mut PolygonModel, ds: &Dataset, split: &SplitSet, gate: Gate) -> bool {
    let verdict = judge(model, ds, split, gate);
    if let Verdict::Accepted {
        validation_accuracy,
        test_accuracy,
        ..
    } = verdict
    {
        model.validation_accuracy = Some(validation_accuracy);
        model.accuracy = Some(test_accuracy);
        true
    } else {
        false
    }
}
