//! Human-guided feature engineering on tabular binary-classification data.
//!
//! Annotators (people in a browser, or [`annotator`] standing in for them)
//! draw labeled axis-aligned rectangles on scatterplots of low-correlation
//! dimension pairs. Each accepted set of rectangles becomes one feature
//! column, and gradient-boosted trees trained on those columns are compared
//! against trees trained on the raw dimensions the annotators looked at.

pub mod annotator;
pub mod api;
pub mod dataset;
pub mod error;
pub mod features;
pub mod learner;
pub mod matrix;
pub mod pairing;
pub mod polygon;
pub mod rng;
pub mod split;
pub mod store;

pub use dataset::{ColumnKind, Dataset};
pub use error::{Error, Result};
pub use features::{FeatureMatrix, FeatureMode, UsedDimensions};
pub use matrix::Matrix;
pub use pairing::{CorrelationTable, DimensionPair, SelectMode};
pub use polygon::{PolygonModel, Provenance, Rectangle};
pub use split::{NormStats, SplitSet, SplitSizes};
