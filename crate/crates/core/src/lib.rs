//! Measurement-based worst-case execution path analysis for loop-free programs.
//!
//! A program is modeled as a DAG whose source-to-sink paths are the possible
//! executions. A handful of paths are timed on a (simulated) platform. A
//! sequence of linear and binary-integer programs then recovers the longest
//! paths consistent with those timings together with an error band.
//!
//! Module map:
//!
//! - [`dag`]: graph model and path vectors, with series-edge merging.
//! - [`milp`]: dense bounded simplex and best-first branch-and-bound.
//! - [`platform`]: synthetic timing platform and measurement sets.
//! - [`spanner`]: 2-barycentric path bases and the basis-path baseline.
//! - [`estimator`]: the repeatability, accuracy and worst-path programs
//!   plus the end-to-end pipeline.

pub mod dag;
pub mod estimator;
pub mod milp;
pub mod platform;
pub mod spanner;

pub(crate) mod flow;

use serde::{Deserialize, Serialize};

/// Optimization direction shared by path queries and linear models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Max,
    Min,
}

pub use dag::{EdgeId, EdgeWeights, PathVec, ProgramDag};
pub use platform::{MeasurementSet, PlatformModel};
