//! Best-first branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;

use log::debug;

use super::model::{MilpModel, VarKind};
use super::simplex::{LpData, Outcome, Tableau};
use super::{iteration_cap, MilpError, MilpOptions, MilpSolution, SolveStatus, FEASIBILITY_TOL, INTEGRALITY_TOL};

struct Node {
    /// Parent relaxation value, internal (maximizing) sign.
    bound: f64,
    id: usize,
    parent: Rc<Tableau>,
    /// Every binary fixed on the way from the root, last one is new.
    fixes: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    data: Rc<LpData>,
    cap: usize,
    lp_iterations: usize,
}

impl Search<'_> {
    fn fresh(&mut self, fixes: &[(usize, f64)]) -> Result<(Outcome, Tableau), MilpError> {
        let mut tab = Tableau::new(self.data.clone());
        for &(k, v) in fixes {
            tab.set_bounds(k, v, v);
        }
        let mut cap = self.cap;
        let out = tab.primal(&mut cap);
        self.lp_iterations += tab.iterations;
        match out {
            Ok(o) => Ok((o, tab)),
            Err(_) => Err(MilpError::NumericFailure(format!(
                "relaxation did not converge within {} pivots",
                self.cap
            ))),
        }
    }

    /// Re-optimizes `parent` after fixing `fixes.last()`; falls back to a
    /// cold solve when the warm start misbehaves.
    fn child(&mut self, parent: &Tableau, fixes: &[(usize, f64)]) -> Result<(Outcome, Tableau), MilpError> {
        let mut tab = parent.clone();
        let start = tab.iterations;
        for &(k, v) in fixes.last().into_iter() {
            tab.set_bounds(k, v, v);
        }
        let mut cap = self.cap;
        let warm = match tab.dual(&mut cap) {
            Ok(Outcome::Infeasible) => Some(Outcome::Infeasible),
            Ok(_) => tab.primal(&mut cap).ok(),
            Err(_) => None,
        };
        self.lp_iterations += tab.iterations - start;
        match warm {
            Some(Outcome::Unbounded) | None => self.fresh(fixes),
            Some(o) => Ok((o, tab)),
        }
    }

    /// Solution with binaries rounded exactly, continuous part re-solved.
    fn polish(&mut self, tab: &Tableau, binaries: &[usize]) -> Result<Option<(f64, Vec<f64>)>, MilpError> {
        let x = tab.values();
        let fixes: Vec<(usize, f64)> = binaries.iter().map(|&k| (k, x[k].round())).collect();
        let mut fixed = tab.clone();
        for &(k, v) in &fixes {
            fixed.set_bounds(k, v, v);
        }
        let mut cap = self.cap;
        let start = fixed.iterations;
        let warm = match fixed.dual(&mut cap) {
            Ok(Outcome::Optimal) => fixed.primal(&mut cap).ok(),
            _ => None,
        };
        self.lp_iterations += fixed.iterations - start;
        let fixed = match warm {
            Some(Outcome::Optimal) => fixed,
            _ => match self.fresh(&fixes)? {
                (Outcome::Optimal, t) => t,
                _ => return Ok(None),
            },
        };
        let mut values = fixed.values().to_vec();
        for &(k, v) in &fixes {
            values[k] = v;
        }
        if self.model.max_violation(&values) > FEASIBILITY_TOL {
            return Ok(None);
        }
        Ok(Some((fixed.objective(), values)))
    }
}

pub(super) fn branch_and_bound(model: &MilpModel, options: &MilpOptions) -> Result<MilpSolution, MilpError> {
    let n = model.num_vars();
    let Some(data) = LpData::from_model(model) else {
        return Ok(MilpSolution::without_point(SolveStatus::Infeasible, n, 0, 0));
    };
    let sign = data.sign;
    let binaries: Vec<usize> = model
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(k, _)| k)
        .collect();
    let data = Rc::new(data);
    let mut search = Search {
        model,
        cap: iteration_cap(&data),
        data,
        lp_iterations: 0,
    };

    let (root_outcome, root) = search.fresh(&[])?;
    match root_outcome {
        Outcome::Optimal => {}
        Outcome::Infeasible => {
            return Ok(MilpSolution::without_point(SolveStatus::Infeasible, n, 1, search.lp_iterations))
        }
        Outcome::Unbounded => {
            return Ok(MilpSolution::without_point(SolveStatus::Unbounded, n, 1, search.lp_iterations))
        }
    }

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut nodes = 0usize;
    let mut pending: Option<(Vec<(usize, f64)>, Outcome, Tableau)> = Some((Vec::new(), root_outcome, root));
    let mut exhausted = true;

    loop {
        let (fixes, outcome, tab) = match pending.take() {
            Some(p) => p,
            None => {
                let Some(node) = heap.pop() else { break };
                let node: Node = node;
                if let Some((best, _)) = &incumbent {
                    if prunable(node.bound, *best) {
                        continue;
                    }
                }
                if nodes >= options.node_limit {
                    exhausted = false;
                    break;
                }
                let (o, t) = search.child(&node.parent, &node.fixes)?;
                (node.fixes, o, t)
            }
        };
        nodes += 1;
        if outcome != Outcome::Optimal {
            continue;
        }
        let z = sign * tab.objective();
        if let Some((best, _)) = &incumbent {
            if prunable(z, *best) {
                continue;
            }
        }
        let x = tab.values();
        let fractional = binaries
            .iter()
            .copied()
            .find(|&k| (x[k] - x[k].round()).abs() > INTEGRALITY_TOL);
        match fractional {
            None => {
                if let Some((obj, values)) = search.polish(&tab, &binaries)? {
                    let zi = sign * obj;
                    if incumbent.as_ref().is_none_or(|(best, _)| zi > *best) {
                        debug!("incumbent {obj} at node {nodes}");
                        incumbent = Some((zi, values));
                    }
                }
            }
            Some(k) => {
                let parent = Rc::new(tab);
                for v in [1.0, 0.0] {
                    let mut child_fixes = fixes.clone();
                    child_fixes.push((k, v));
                    heap.push(Node {
                        bound: z,
                        id: next_id,
                        parent: parent.clone(),
                        fixes: child_fixes,
                    });
                    next_id += 1;
                }
            }
        }
    }

    match incumbent {
        Some((z, values)) => Ok(MilpSolution {
            status: SolveStatus::Optimal,
            objective: sign * z,
            values,
            proven: exhausted,
            nodes,
            lp_iterations: search.lp_iterations,
        }),
        None if exhausted => Ok(MilpSolution::without_point(
            SolveStatus::Infeasible,
            n,
            nodes,
            search.lp_iterations,
        )),
        None => Err(MilpError::Timeout { nodes }),
    }
}

fn prunable(bound: f64, best: f64) -> bool {
    bound <= best + 1e-9 * best.abs().max(1.0)
}
