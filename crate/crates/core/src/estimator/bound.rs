use nalgebra::{DMatrix, DVector};

use crate::dag::{EdgeId, EdgeWeights, PathVec, ProgramDag};
use crate::flow;
use crate::milp::{self, MilpModel, MilpSolution, Relation, SolveStatus, Var};
use crate::spanner::compute_spanner;
use crate::Sense;

use super::EstimatorError;

const INDEPENDENCE_TOL: f64 = 1e-9;
const ESCAPE_TOL: f64 = 1e-6;

/// Accuracy constant of a measured path set.
///
/// `k` is the largest `|len(x)|` over allowed paths `x` and weights keeping
/// every measured path's length in `[-1, 1]`. It is infinite when some
/// allowed path lies outside the span of the measured ones.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyConstant {
    pub k: f64,
    pub witness_path: PathVec,
    /// Weights under which `witness_path` has length `k` (or, when `k` is
    /// infinite, a positive length while every measured path has length 0).
    pub witness_weights: EdgeWeights,
    pub proven: bool,
}

impl AccuracyConstant {
    pub fn is_bounded(&self) -> bool {
        self.k.is_finite()
    }
}

/// Greedy Gram-Schmidt: indices of a maximal independent subset and an
/// orthonormal basis of their span.
fn independent_subset(paths: &[PathVec], edges: usize) -> (Vec<usize>, Vec<DVector<f64>>) {
    let mut keep = Vec::new();
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        let r = residual(&ortho, &DVector::from_vec(p.incidence_f64()));
        let norm = r.norm();
        if norm > INDEPENDENCE_TOL * (p.len() as f64).sqrt().max(1.0) {
            keep.push(i);
            ortho.push(r / norm);
        }
    }
    debug_assert!(ortho.iter().all(|q| q.len() == edges));
    (keep, ortho)
}

fn residual(ortho: &[DVector<f64>], v: &DVector<f64>) -> DVector<f64> {
    let mut r = v.clone();
    // Two passes keep the projection accurate.
    for _ in 0..2 {
        for q in ortho {
            let c = q.dot(&r);
            r.axpy(-c, q, 1.0);
        }
    }
    r
}

/// Per-edge magnitude bound on weights that lie in the span of `basis` and
/// keep each basis path's length within `[-1, 1]`.
fn weight_bounds(basis: &[&PathVec], edges: usize) -> Vec<f64> {
    if basis.is_empty() {
        return vec![0.0; edges];
    }
    let b = DMatrix::from_fn(basis.len(), edges, |i, e| if basis[i].contains(e) { 1.0 } else { 0.0 });
    let gram_inv: DMatrix<f64> = (&b * b.transpose())
        .try_inverse()
        .expect("independent paths give a nonsingular Gram matrix");
    let g = b.transpose() * gram_inv;
    (0..edges)
        .map(|e| {
            let s: f64 = g.row(e).iter().map(|x: &f64| x.abs()).sum();
            if s < 1e-12 {
                0.0
            } else {
                s * (1.0 + 1e-6) + 1e-9
            }
        })
        .collect()
}

struct Extraction {
    model: MilpModel,
    w: Vec<Var>,
    b: Vec<Var>,
    p: Vec<Var>,
}

/// Path selectors plus `p_e = b_e·w_e` for `|w_e| ≤ bound[e]`.
fn extraction_model(dag: &ProgramDag, bound: &[f64], cuts: &[Vec<EdgeId>]) -> Extraction {
    let n = dag.edge_count();
    let mut model = MilpModel::new();
    let w: Vec<Var> = (0..n)
        .map(|e| model.add_continuous(format!("w{e}"), -bound[e], bound[e]))
        .collect();
    let b = flow::add_path_selectors(&mut model, dag);
    let p: Vec<Var> = (0..n)
        .map(|e| model.add_continuous(format!("p{e}"), -bound[e], bound[e]))
        .collect();
    for e in 0..n {
        let m = bound[e];
        if m == 0.0 {
            continue;
        }
        // b = 1 forces p = w; b = 0 forces p = 0.
        model.add_constraint(format!("pw_hi{e}"), [(p[e], 1.0), (w[e], -1.0), (b[e], m)], Relation::Le, m);
        model.add_constraint(format!("pw_lo{e}"), [(p[e], 1.0), (w[e], -1.0), (b[e], -m)], Relation::Ge, -m);
        model.add_constraint(format!("pb_hi{e}"), [(p[e], 1.0), (b[e], -m)], Relation::Le, 0.0);
        model.add_constraint(format!("pb_lo{e}"), [(p[e], 1.0), (b[e], m)], Relation::Ge, 0.0);
    }
    for (i, cut) in cuts.iter().enumerate() {
        flow::add_cut(&mut model, &b, cut, format!("cut{i}"));
    }
    Extraction { model, w, b, p }
}

fn path_of(dag: &ProgramDag, sol: &MilpSolution, b: &[Var]) -> Result<PathVec, EstimatorError> {
    flow::selected_path(dag, sol, b)
        .ok_or_else(|| EstimatorError::Inconsistent("selected edges do not form a path".into()))
}

fn weights_of(sol: &MilpSolution, w: &[Var], scale: f64) -> EdgeWeights {
    EdgeWeights::new(w.iter().map(|&v| scale * sol.value(v)).collect())
}

/// Accuracy constant of `measured` over all paths not removed by `cuts`.
///
/// The program is solved for `max len` and `max −len`; `k` is the larger.
/// Only the span of the measured paths matters, so weights are bounded per
/// edge by the largest entry any in-span weight vector can reach, which
/// keeps the product linearization exact.
pub fn solve_bound(
    dag: &ProgramDag,
    measured: &[PathVec],
    cuts: &[Vec<EdgeId>],
) -> Result<AccuracyConstant, EstimatorError> {
    let n = dag.edge_count();
    let (keep, ortho) = independent_subset(measured, n);

    if keep.len() < dag.path_space_dim() {
        if cuts.is_empty() {
            let spanner = compute_spanner(dag);
            for p in spanner.paths() {
                let r = residual(&ortho, &DVector::from_vec(p.incidence_f64()));
                if r.norm() > ESCAPE_TOL {
                    return Ok(AccuracyConstant {
                        k: f64::INFINITY,
                        witness_path: p.clone(),
                        witness_weights: EdgeWeights::new(r.iter().copied().collect()),
                        proven: true,
                    });
                }
            }
            return Err(EstimatorError::Inconsistent("rank deficit without an escaping basis path".into()));
        }
        // Some uncut path may still escape the span: look for weights
        // orthogonal to every measured path that give one a positive length.
        let mut ex = extraction_model(dag, &vec![1.0; n], cuts);
        for &i in &keep {
            ex.model.add_constraint(
                format!("ortho{i}"),
                measured[i].edges().iter().map(|&e| (ex.w[e], 1.0)),
                Relation::Eq,
                0.0,
            );
        }
        ex.model.set_objective(Sense::Max, ex.p.iter().map(|&v| (v, 1.0)));
        let sol = milp::solve_milp(&ex.model)?;
        match sol.status {
            SolveStatus::Optimal if sol.objective > ESCAPE_TOL => {
                return Ok(AccuracyConstant {
                    k: f64::INFINITY,
                    witness_path: path_of(dag, &sol, &ex.b)?,
                    witness_weights: weights_of(&sol, &ex.w, 1.0),
                    proven: sol.proven,
                });
            }
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Err(EstimatorError::NoFeasiblePath),
            SolveStatus::Unbounded => {
                return Err(EstimatorError::Inconsistent("bounded escape program is unbounded".into()));
            }
        }
    }

    let basis: Vec<&PathVec> = keep.iter().map(|&i| &measured[i]).collect();
    let bound = weight_bounds(&basis, n);
    let mut ex = extraction_model(dag, &bound, cuts);
    for (i, x) in measured.iter().enumerate() {
        ex.model
            .add_range(format!("meas{i}"), x.edges().iter().map(|&e| (ex.w[e], 1.0)), -1.0, 1.0);
    }
    let mut best: Option<AccuracyConstant> = None;
    let mut proven = true;
    for sign in [1.0, -1.0] {
        ex.model.set_objective(Sense::Max, ex.p.iter().map(|&v| (v, sign)));
        let sol = milp::solve_milp(&ex.model)?;
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Err(EstimatorError::NoFeasiblePath),
            SolveStatus::Unbounded => {
                return Err(EstimatorError::Inconsistent("accuracy program is unbounded".into()));
            }
        }
        proven &= sol.proven;
        if best.as_ref().is_none_or(|b| sol.objective > b.k) {
            best = Some(AccuracyConstant {
                k: sol.objective,
                witness_path: path_of(dag, &sol, &ex.b)?,
                witness_weights: weights_of(&sol, &ex.w, sign),
                proven: true,
            });
        }
    }
    let mut best = best.expect("two solves ran");
    best.proven = proven;
    Ok(best)
}

/// Weights showing that an unmeasured path `pi` breaks `k = 1`: its first
/// edge gets `1 + 1/|E|`, every edge leaving a vertex of `pi` without being
/// on `pi` gets `−1/|E|`, the rest 0. Every other path then has length in
/// `[-1, 1]` while `pi` has length `1 + 1/|E|`.
pub fn unmeasured_path_witness(dag: &ProgramDag, pi: &PathVec) -> EdgeWeights {
    let n = dag.edge_count();
    let eps = 1.0 / n as f64;
    let mut w = vec![0.0; n];
    for &e in pi.edges() {
        for &f in dag.out_edges(dag.tail(e)) {
            if !pi.contains(f) {
                w[f] = -eps;
            }
        }
    }
    w[pi.edges()[0]] = 1.0 + eps;
    EdgeWeights::new(w)
}
