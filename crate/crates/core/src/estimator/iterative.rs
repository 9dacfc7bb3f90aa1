use std::time::Instant;

use log::info;

use crate::dag::{EdgeId, FeasibilityOracle, PathVec, ProgramDag};

use super::{solve_bound, EstimatorError};

/// Slack on the target when comparing `k ≤ A`.
const TARGET_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Accuracy constant of the set at the start of this iteration.
    pub k: f64,
    pub seconds: f64,
    pub added: Option<PathVec>,
    pub cut: Option<Vec<EdgeId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisRefinement {
    pub paths: Vec<PathVec>,
    pub k: f64,
    pub proven: bool,
    pub iterations: Vec<IterationRecord>,
    /// Cores of infeasible witnesses, excluded from later programs.
    pub cuts: Vec<Vec<EdgeId>>,
}

/// Adds witness paths to `initial` until its accuracy constant is at most
/// `accuracy`. Infeasible witnesses are excluded through their unsat core
/// instead of being added.
pub fn iterative_basis(
    dag: &ProgramDag,
    accuracy: f64,
    initial: Vec<PathVec>,
    oracle: &impl FeasibilityOracle,
) -> Result<BasisRefinement, EstimatorError> {
    if !(accuracy >= 1.0) {
        return Err(EstimatorError::BadParameter(format!("accuracy must be >= 1, got {accuracy}")));
    }
    let mut paths = initial;
    let mut cuts: Vec<Vec<EdgeId>> = Vec::new();
    let mut iterations = Vec::new();
    let mut proven = true;
    loop {
        let start = Instant::now();
        let bound = solve_bound(dag, &paths, &cuts)?;
        proven &= bound.proven;
        let mut record = IterationRecord {
            k: bound.k,
            seconds: 0.0,
            added: None,
            cut: None,
        };
        info!("iteration {}: {} paths, k = {}", iterations.len(), paths.len(), bound.k);
        if bound.k <= accuracy + TARGET_TOL {
            record.seconds = start.elapsed().as_secs_f64();
            iterations.push(record);
            return Ok(BasisRefinement {
                paths,
                k: bound.k,
                proven,
                iterations,
                cuts,
            });
        }
        let witness = bound.witness_path;
        match oracle.check(&witness) {
            Ok(()) => {
                if paths.contains(&witness) {
                    return Err(EstimatorError::Inconsistent(format!(
                        "accuracy witness {witness:?} is already measured"
                    )));
                }
                record.added = Some(witness.clone());
                paths.push(witness);
            }
            Err(core) => {
                if core.is_empty() || cuts.contains(&core) {
                    return Err(EstimatorError::Inconsistent(format!(
                        "feasibility oracle returned an unusable core {core:?}"
                    )));
                }
                record.cut = Some(core.clone());
                cuts.push(core);
            }
        }
        record.seconds = start.elapsed().as_secs_f64();
        iterations.push(record);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::diamond_chain;
    use crate::spanner::compute_spanner;

    #[test]
    fn accuracy_one_collects_every_path() {
        let dag = diamond_chain(3);
        let seed = compute_spanner(&dag).paths().to_vec();
        let r = iterative_basis(&dag, 1.0, seed, &dag).unwrap();
        let mut got = r.paths.clone();
        got.sort();
        assert_eq!(got, dag.enumerate_paths(false).unwrap());
        for pair in r.iterations.windows(2) {
            assert!(pair[1].k <= pair[0].k + 1e-6);
        }
    }

    #[test]
    fn loose_target_keeps_the_seed() {
        let dag = diamond_chain(3);
        let seed = compute_spanner(&dag).paths().to_vec();
        let r = iterative_basis(&dag, 100.0, seed.clone(), &dag).unwrap();
        assert_eq!(r.paths, seed);
        assert_eq!(r.iterations.len(), 1);
    }

    #[test]
    fn infeasible_witnesses_become_cuts() {
        let mut f = diamond_chain(2).to_file_repr();
        f.exclusions = vec![vec![1, 5]];
        let dag = ProgramDag::from_file_repr(f).unwrap();
        let r = iterative_basis(&dag, 1.0, Vec::new(), &dag).unwrap();
        let mut got = r.paths.clone();
        got.sort();
        assert_eq!(got, dag.enumerate_paths(true).unwrap());
        assert_eq!(r.cuts, vec![vec![1, 5]]);
    }

    #[test]
    fn rejects_accuracy_below_one() {
        let dag = diamond_chain(1);
        assert!(iterative_basis(&dag, 0.5, Vec::new(), &dag).is_err());
    }
}
