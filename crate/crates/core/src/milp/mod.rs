//! Linear programming and binary MILP.
//!
//! [`solve_lp`] runs a bounded-variable simplex on the relaxation;
//! [`solve_milp`] wraps it in best-first branch-and-bound over the binaries.

mod branch;
mod lp_format;
mod model;
mod simplex;

use std::rc::Rc;

use thiserror::Error;

pub use lp_format::write_lp;
pub use model::{Constraint, MilpModel, Objective, Relation, Var, VarKind, Variable};

use simplex::{LpData, Outcome, Tableau};

/// Feasibility tolerance for reported solutions.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Distance from 0/1 below which a binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const DEFAULT_BINARY_CAP: usize = 2000;
pub const DEFAULT_NODE_LIMIT: usize = 200_000;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("simplex failed: {0}")]
    NumericFailure(String),
    #[error("branch-and-bound hit its node limit ({nodes} nodes) without a feasible solution")]
    Timeout { nodes: usize },
    #[error("model has {count} binaries, cap is {cap}")]
    TooManyBinaries { count: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Objective in the model's sense; NaN unless `status` is optimal.
    pub objective: f64,
    /// One value per variable, binaries exactly 0 or 1 for MILP solves.
    pub values: Vec<f64>,
    /// False when branch-and-bound stopped early with an incumbent.
    pub proven: bool,
    pub nodes: usize,
    pub lp_iterations: usize,
}

impl MilpSolution {
    pub fn value(&self, v: Var) -> f64 {
        self.values[v.index()]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    fn without_point(status: SolveStatus, n: usize, nodes: usize, lp_iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: vec![f64::NAN; n],
            proven: true,
            nodes,
            lp_iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MilpOptions {
    pub binary_cap: usize,
    pub node_limit: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            binary_cap: DEFAULT_BINARY_CAP,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

fn iteration_cap(data: &LpData) -> usize {
    50 * (data.n + data.m).max(1)
}

/// Solves the LP relaxation (binaries become continuous on [0, 1]).
pub fn solve_lp(model: &MilpModel) -> Result<MilpSolution, MilpError> {
    model.validate()?;
    let n = model.num_vars();
    let Some(data) = LpData::from_model(model) else {
        return Ok(MilpSolution::without_point(SolveStatus::Infeasible, n, 0, 0));
    };
    let data = Rc::new(data);
    let mut cap = iteration_cap(&data);
    let mut tab = Tableau::new(data);
    let outcome = tab
        .primal(&mut cap)
        .map_err(|_| MilpError::NumericFailure(format!("no convergence after {} pivots", tab.iterations)))?;
    Ok(match outcome {
        Outcome::Optimal => MilpSolution {
            status: SolveStatus::Optimal,
            objective: tab.objective(),
            values: tab.values().to_vec(),
            proven: true,
            nodes: 0,
            lp_iterations: tab.iterations,
        },
        Outcome::Infeasible => MilpSolution::without_point(SolveStatus::Infeasible, n, 0, tab.iterations),
        Outcome::Unbounded => MilpSolution::without_point(SolveStatus::Unbounded, n, 0, tab.iterations),
    })
}

pub fn solve_milp(model: &MilpModel) -> Result<MilpSolution, MilpError> {
    solve_milp_with(model, &MilpOptions::default())
}

pub fn solve_milp_with(model: &MilpModel, options: &MilpOptions) -> Result<MilpSolution, MilpError> {
    model.validate()?;
    let count = model.num_binaries();
    if count > options.binary_cap {
        return Err(MilpError::TooManyBinaries {
            count,
            cap: options.binary_cap,
        });
    }
    if count == 0 {
        return solve_lp(model);
    }
    branch::branch_and_bound(model, options)
}
