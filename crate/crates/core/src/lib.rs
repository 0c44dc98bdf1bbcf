//! Measure contextual entrainment in language models and how it scales.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`probe`] builds (query, context, gold, distractor) probes for four
//!    context conditions from relation files.
//! 2. [`backend`] obtains next-token logits with and without context from an
//!    HTTP endpoint, a deterministic mock, or recorded data.
//! 3. [`metrics`] turns logits into per-probe shifts and per-model means.
//! 4. [`scaling`] fits `|E| = a·N^b` across model sizes with t-based intervals.
//! 5. [`analysis`] and [`report`] derive gap trajectories and the Δ heatmap,
//!    then write a hashed report directory.
//!
//! [`reproduce`] re-runs the published-table checks from [`fixtures`].

pub mod analysis;
pub mod backend;
pub mod condition;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod pipeline;
pub mod probe;
pub mod relation;
pub mod report;
pub mod reproduce;
pub mod scaling;
pub mod stats;

pub use condition::ContextCondition;
pub use error::{AnalysisError, DataError, FitError, ReportError, ValidationError};
pub use metrics::{ConditionAggregate, EntrainmentRecord, Metric};
pub use scaling::{fit_power_law, PowerLawFit, SeriesPoint};
