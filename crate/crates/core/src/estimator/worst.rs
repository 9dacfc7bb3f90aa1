use crate::dag::{EdgeId, EdgeWeights, PathVec, ProgramDag};
use crate::flow;
use crate::milp::{self, MilpModel, Relation, SolveStatus, Var};
use crate::platform::MeasurementSet;
use crate::Sense;

use super::{solve_delta, EstimatorError};

#[derive(Debug, Clone, PartialEq)]
pub struct WorstPath {
    pub path: PathVec,
    /// `T = Σ p_e`, the path's length under the fitted weights.
    pub predicted: f64,
    pub weights: EdgeWeights,
    pub proven: bool,
    pub nodes: usize,
}

struct WorstModel {
    model: MilpModel,
    w: Vec<Var>,
    b: Vec<Var>,
}

fn build(dag: &ProgramDag, measurements: &MeasurementSet, d: f64, cuts: &[Vec<EdgeId>]) -> WorstModel {
    let n = dag.edge_count();
    // Any weight on a measured path is at most l_i + D, so a selected edge is
    // never clipped below its weight by this M.
    let big_m = measurements.iter().map(|m| m.length).fold(0.0, f64::max) + d + 1.0;

    let mut model = MilpModel::new();
    let w: Vec<_> = (0..n)
        .map(|e| model.add_continuous(format!("w{e}"), 0.0, f64::INFINITY))
        .collect();
    let b = flow::add_path_selectors(&mut model, dag);
    let p: Vec<_> = (0..n)
        .map(|e| model.add_continuous(format!("p{e}"), 0.0, f64::INFINITY))
        .collect();
    for (i, m) in measurements.iter().enumerate() {
        model.add_range(
            format!("window{i}"),
            m.path.edges().iter().map(|&e| (w[e], 1.0)),
            m.length - d,
            m.length + d,
        );
    }
    for e in 0..n {
        model.add_constraint(format!("pw{e}"), [(p[e], 1.0), (w[e], -1.0)], Relation::Le, 0.0);
        model.add_constraint(format!("pb{e}"), [(p[e], 1.0), (b[e], -big_m)], Relation::Le, 0.0);
    }
    for (i, cut) in cuts.iter().enumerate() {
        flow::add_cut(&mut model, &b, cut, format!("cut{i}"));
    }
    model.set_objective(Sense::Max, p.iter().map(|&v| (v, 1.0)));
    WorstModel { model, w, b }
}

/// The program [`solve_worst`] solves, for inspection or export.
pub fn worst_path_model(dag: &ProgramDag, measurements: &MeasurementSet, d: f64, cuts: &[Vec<EdgeId>]) -> MilpModel {
    build(dag, measurements, d, cuts).model
}

/// Longest path over all nonnegative weights that keep every measured path
/// within `D` of its measurement.
///
/// Binaries `b_e` select one s-t path and `p_e` equals `w_e` on it and zero
/// elsewhere, through `p_e ≤ w_e` and `p_e ≤ M·b_e`. Each set in `cuts`
/// forbids paths containing all of its edges.
pub fn solve_worst(
    dag: &ProgramDag,
    measurements: &MeasurementSet,
    d: f64,
    cuts: &[Vec<EdgeId>],
) -> Result<WorstPath, EstimatorError> {
    if measurements.is_empty() {
        return Err(EstimatorError::NoMeasurements);
    }
    if !(d >= 0.0) {
        return Err(EstimatorError::BadParameter(format!("D must be >= 0, got {d}")));
    }
    let WorstModel { model, w, b } = build(dag, measurements, d, cuts);
    let sol = milp::solve_milp(&model)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Unbounded => {
            return Err(EstimatorError::Inconsistent("worst-path program is unbounded".into()));
        }
        SolveStatus::Infeasible => {
            let minimum = solve_delta(dag, measurements)?.d;
            return Err(if d < minimum - 1e-9 {
                EstimatorError::InfeasibleWindows { d, minimum }
            } else {
                EstimatorError::NoFeasiblePath
            });
        }
    }
    let path = flow::selected_path(dag, &sol, &b)
        .ok_or_else(|| EstimatorError::Inconsistent("selected edges do not form a path".into()))?;
    Ok(WorstPath {
        path,
        predicted: sol.objective,
        weights: EdgeWeights::new(w.iter().map(|&v| sol.value(v)).collect()),
        proven: sol.proven,
        nodes: sol.nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::diamond_chain;

    #[test]
    fn two_paths_exactly_measured() {
        let dag = diamond_chain(1);
        let top = dag.path(vec![0, 2]).unwrap();
        let bottom = dag.path(vec![1, 3]).unwrap();
        let mut m = MeasurementSet::new();
        m.insert(top, 10.0);
        m.insert(bottom.clone(), 20.0);
        let r = solve_worst(&dag, &m, 0.0, &[]).unwrap();
        assert_eq!(r.path, bottom);
        assert!((r.predicted - 20.0).abs() < 1e-6);
        assert!(r.proven);
    }

    #[test]
    fn window_below_minimum_is_reported() {
        let dag = diamond_chain(1);
        let p = dag.path(vec![0, 2]).unwrap();
        let mut m = MeasurementSet::new();
        m.push_raw(p.clone(), 10.0);
        m.push_raw(p, 14.0);
        assert!(matches!(
            solve_worst(&dag, &m, 1.0, &[]),
            Err(EstimatorError::InfeasibleWindows { .. })
        ));
        assert!(solve_worst(&dag, &m, 2.0 + 1e-9, &[]).is_ok());
    }

    #[test]
    fn cuts_remove_paths() {
        let dag = diamond_chain(1);
        let mut m = MeasurementSet::new();
        m.insert(dag.path(vec![0, 2]).unwrap(), 10.0);
        m.insert(dag.path(vec![1, 3]).unwrap(), 20.0);
        let r = solve_worst(&dag, &m, 0.0, &[vec![1, 3]]).unwrap();
        assert_eq!(r.path.edges(), &[0, 2]);
        assert!(matches!(
            solve_worst(&dag, &m, 0.0, &[vec![1, 3], vec![0]]),
            Err(EstimatorError::NoFeasiblePath)
        ));
    }
}
