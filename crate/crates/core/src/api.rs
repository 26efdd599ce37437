//! JSON bodies exchanged between the annotation service and its clients.

use serde::{Deserialize, Serialize};

use crate::polygon::{RejectReason, Rectangle};
use crate::split::LabeledPoint;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairInfo {
    pub dim_a: usize,
    pub dim_b: usize,
    pub name_a: String,
    pub name_b: String,
}

/// Everything a client needs to draw: the pair and its normalized
/// annotation-training points. Nothing from the validation or test splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDescriptor {
    pub session_id: String,
    pub dataset: String,
    pub pair: PairInfo,
    pub points: Vec<LabeledPoint>,
    pub threshold: f64,
    pub min_coverage: f64,
}

/// A drawn rectangle; its draw order is its position in the submitted list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectangleSpec {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub label: u8,
}

impl From<&Rectangle> for RectangleSpec {
    fn from(r: &Rectangle) -> Self {
        Self {
            u_min: r.u_min,
            u_max: r.u_max,
            v_min: r.v_min,
            v_max: r.v_max,
            label: r.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangleList {
    pub rectangles: Vec<RectangleSpec>,
}

impl RectangleList {
    pub fn from_rectangles(rects: &[Rectangle]) -> Self {
        Self {
            rectangles: rects.iter().map(RectangleSpec::from).collect(),
        }
    }

    /// Converts to rectangles, numbering draw order by position.
    pub fn to_rectangles(&self) -> Result<Vec<Rectangle>, FieldError> {
        self.rectangles
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let rect = Rectangle {
                    u_min: s.u_min,
                    u_max: s.u_max,
                    v_min: s.v_min,
                    v_max: s.v_max,
                    label: s.label,
                    draw_order: k as u32,
                };
                rect.validate().map(|()| rect).map_err(|(field, message)| FieldError {
                    error: message,
                    field: format!("rectangles[{k}].{field}"),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub error: String,
    pub field: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoCoverage {
    #[serde(rename = "no-coverage")]
    NoCoverage,
}

/// A validation accuracy, or the string `"no-coverage"` when nothing drawn
/// covers a validation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Readout {
    Accuracy(f64),
    Status(NoCoverage),
}

impl Readout {
    pub fn from_accuracy(acc: Option<f64>) -> Self {
        acc.map_or(Readout::Status(NoCoverage::NoCoverage), Readout::Accuracy)
    }

    pub fn accuracy(&self) -> Option<f64> {
        match self {
            Readout::Accuracy(a) => Some(*a),
            Readout::Status(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreResponse {
    pub validation_accuracy: Readout,
    pub covered_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase", deny_unknown_fields)]
pub enum SubmitResponse {
    Accepted {
        code: String,
        model_id: String,
        validation_accuracy: f64,
    },
    Rejected {
        reason: RejectReason,
        validation_accuracy: Readout,
        covered_fraction: f64,
        threshold: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyResponse {
    pub valid: bool,
    pub model_id: Option<String>,
    pub already_used: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}
