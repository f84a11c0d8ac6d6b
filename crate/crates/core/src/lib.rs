//! Nested cross-validation for binary deterioration prognosis on small
//! tabular cohorts.
//!
//! The pipeline reads a schema-checked table ([`tabular`]), derives the two
//! baseline cohorts ([`cohort`]), and estimates out-of-fold performance of
//! six classifiers ([`models`]) with leave-3-rows-out outer folds around a
//! stratified 5-fold grid search ([`nestedcv`], [`tuning`]). Preprocessing
//! ([`preprocess`]) is refitted on every training part. All randomness comes
//! from one master seed ([`seed`]).

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the maths.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cohort;
pub mod importance;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod nestedcv;
pub mod preprocess;
pub mod seed;
pub mod synth;
pub mod tabular;
pub mod tuning;

pub use linalg::Matrix;
pub use metrics::MetricsSummary;
pub use models::{Algorithm, Classifier, HyperParams, Learner, ProbabilityModel};
pub use seed::Seed;
pub use tabular::{Schema, TabularDataset};
