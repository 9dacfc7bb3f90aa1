use crate::dag::{EdgeWeights, ProgramDag};
use crate::milp::{self, MilpModel, Relation};
use crate::platform::MeasurementSet;
use crate::Sense;

use super::EstimatorError;

/// Smallest `D` such that nonnegative edge weights reproduce every
/// measurement to within `D`, with the weights that achieve it.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatabilityEstimate {
    pub d: f64,
    pub fitted_weights: EdgeWeights,
}

/// `min μ` subject to `l_i − μ ≤ Σ_{e∈x_i} w_e ≤ l_i + μ`, `w, μ ≥ 0`.
pub fn solve_delta(dag: &ProgramDag, measurements: &MeasurementSet) -> Result<RepeatabilityEstimate, EstimatorError> {
    if measurements.is_empty() {
        return Err(EstimatorError::NoMeasurements);
    }
    let mut model = MilpModel::new();
    let w: Vec<_> = (0..dag.edge_count())
        .map(|e| model.add_continuous(format!("w{e}"), 0.0, f64::INFINITY))
        .collect();
    let mu = model.add_continuous("mu", 0.0, f64::INFINITY);
    for (i, m) in measurements.iter().enumerate() {
        let sum = || m.path.edges().iter().map(|&e| (w[e], 1.0));
        model.add_constraint(format!("above{i}"), sum().chain([(mu, 1.0)]), Relation::Ge, m.length);
        model.add_constraint(format!("below{i}"), sum().chain([(mu, -1.0)]), Relation::Le, m.length);
    }
    model.set_objective(Sense::Min, [(mu, 1.0)]);
    let sol = milp::solve_lp(&model)?;
    if !sol.is_optimal() {
        // w = 0, μ = max |l_i| is always feasible and μ ≥ 0 bounds it.
        return Err(EstimatorError::Inconsistent(format!("repeatability LP reported {:?}", sol.status)));
    }
    Ok(RepeatabilityEstimate {
        d: sol.objective.max(0.0),
        fitted_weights: EdgeWeights::new(w.iter().map(|&v| sol.value(v).max(0.0)).collect()),
    })
}
