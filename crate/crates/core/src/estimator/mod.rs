//! Worst-path estimation from path measurements.
//!
//! - [`solve_delta`]: smallest deviation bound `D` consistent with the data.
//! - [`solve_bound`]: accuracy constant `k` of a measured path set.
//! - [`solve_worst`]: longest path under weights fitting every measurement
//!   window.
//! - [`iterative_basis`]: grows a measured set until `k` drops below a target.
//! - [`estimate_wcett`]: the end-to-end run with top-K extraction.

mod bound;
mod delta;
mod iterative;
mod pipeline;
mod worst;

use thiserror::Error;

use crate::dag::DagError;
use crate::milp::MilpError;
use crate::platform::PlatformError;
use crate::spanner::SpannerError;

pub use bound::{solve_bound, unmeasured_path_witness, AccuracyConstant};
pub use delta::{solve_delta, RepeatabilityEstimate};
pub use iterative::{iterative_basis, BasisRefinement, IterationRecord};
pub use pipeline::{estimate_wcett, EstimateOptions, EstimateReport, MeasurementSource, RankedPath};
pub use worst::{solve_worst, worst_path_model, WorstPath};

/// Slack added to the repeatability optimum before it bounds the windows.
pub const WINDOW_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("no measurements given")]
    NoMeasurements,
    #[error("measurement windows are infeasible at D = {d} (minimum is {minimum})")]
    InfeasibleWindows { d: f64, minimum: f64 },
    #[error("every path is infeasible or eliminated")]
    NoFeasiblePath,
    #[error("{0}")]
    BadParameter(String),
    #[error("solver produced an inconsistent result: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Spanner(#[from] SpannerError),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Dag(#[from] DagError),
}
