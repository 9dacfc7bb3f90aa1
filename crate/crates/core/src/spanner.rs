//! Barycentric path spanners and the basis-path baseline estimator.
//!
//! Paths live in a space of dimension `|E| − |V| + 2`. Coordinates are the
//! flow leaving `s` followed by the value on each chord of a fixed in-tree
//! (each vertex keeps its lowest-id incoming edge). A path's incidence vector
//! is a linear function of these coordinates, so determinants can be taken on
//! a square matrix and a linear objective over coordinates maps back to edge
//! weights for the DAG longest-path oracle.

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dag::{DagError, EdgeId, EdgeWeights, PathVec, ProgramDag};
use crate::flow;
use crate::milp::{self, MilpError, MilpModel};
use crate::platform::MeasurementSet;
use crate::Sense;

/// Residual above which a path is considered outside the basis span.
pub const SPAN_TOL: f64 = 1e-8;
const SWAP_THRESHOLD: f64 = 2.0 + 1e-10;

#[derive(Debug, Error)]
pub enum SpannerError {
    #[error("path is not in the span of the basis (residual {residual:.3e})")]
    NotInSpan { residual: f64 },
    #[error("basis path {path:?} has no measurement")]
    MissingMeasurement { path: Vec<EdgeId> },
    #[error("basis paths are linearly dependent")]
    Dependent,
    #[error("no feasible path exists")]
    NoFeasiblePath,
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Dag(#[from] DagError),
}

/// Linearly independent set of s-t paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBasis {
    paths: Vec<PathVec>,
    edge_count: usize,
    swap_factors: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BasisFile {
    paths: Vec<Vec<EdgeId>>,
    rank: usize,
}

fn incidence_matrix(paths: &[PathVec], edges: usize) -> DMatrix<f64> {
    DMatrix::from_fn(paths.len(), edges, |i, e| if paths[i].contains(e) { 1.0 } else { 0.0 })
}

/// Dimension of the span of the paths' incidence vectors.
pub fn path_rank(paths: &[PathVec], edges: usize) -> usize {
    rank_of(&incidence_matrix(paths, edges))
}

fn rank_of(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    m.clone().svd(false, false).rank(1e-9)
}

impl PathBasis {
    /// Wraps paths that must be linearly independent.
    pub fn from_paths(paths: Vec<PathVec>, edge_count: usize) -> Result<Self, SpannerError> {
        if rank_of(&incidence_matrix(&paths, edge_count)) != paths.len() {
            return Err(SpannerError::Dependent);
        }
        Ok(Self {
            paths,
            edge_count,
            swap_factors: Vec::new(),
        })
    }

    pub fn paths(&self) -> &[PathVec] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.paths.len()
    }

    /// `|B| × |E|` incidence matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        incidence_matrix(&self.paths, self.edge_count)
    }

    /// Number of improvement swaps made after the initial pass.
    pub fn swaps(&self) -> usize {
        self.swap_factors.len()
    }

    /// Factor by which each swap grew the determinant magnitude.
    pub fn swap_factors(&self) -> &[f64] {
        &self.swap_factors
    }

    pub fn to_json(&self) -> String {
        let f = BasisFile {
            paths: self.paths.iter().map(|p| p.edges().to_vec()).collect(),
            rank: self.rank(),
        };
        let mut s = serde_json::to_string_pretty(&f).expect("basis serializes");
        s.push('\n');
        s
    }

    pub fn from_json(dag: &ProgramDag, text: &str) -> Result<Self, SpannerError> {
        let f: BasisFile = serde_json::from_str(text).map_err(DagError::from)?;
        let paths = f.paths.into_iter().map(|p| dag.path(p)).collect::<Result<Vec<_>, _>>()?;
        let basis = Self::from_paths(paths, dag.edge_count())?;
        if basis.rank() != f.rank {
            return Err(SpannerError::Dependent);
        }
        Ok(basis)
    }
}

/// Coordinate system on the path space.
struct Coordinates<'a> {
    dag: &'a ProgramDag,
    /// `chord[e]` is the coordinate index of chord edge `e`.
    chord: Vec<Option<usize>>,
    dim: usize,
}

impl<'a> Coordinates<'a> {
    fn new(dag: &'a ProgramDag) -> Self {
        let mut chord = vec![None; dag.edge_count()];
        let mut dim = 1;
        for (e, slot) in chord.iter_mut().enumerate() {
            let tree_edge = dag.in_edges(dag.head(e)).iter().copied().min();
            if tree_edge != Some(e) {
                *slot = Some(dim);
                dim += 1;
            }
        }
        Self { dag, chord, dim }
    }

    fn of(&self, p: &PathVec) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        for &e in p.edges() {
            if self.dag.tail(e) == self.dag.source() {
                v[0] += 1.0;
            }
            if let Some(i) = self.chord[e] {
                v[i] += 1.0;
            }
        }
        v
    }

    /// Edge weights whose path sums equal `y · coords(path)`.
    fn edge_weights(&self, y: &DVector<f64>) -> Vec<f64> {
        (0..self.dag.edge_count())
            .map(|e| {
                let mut w = 0.0;
                if self.dag.tail(e) == self.dag.source() {
                    w += y[0];
                }
                if let Some(i) = self.chord[e] {
                    w += y[i];
                }
                w
            })
            .collect()
    }

    /// Path maximizing `|y · coords(path)|`, preferring the maximizing side.
    fn farthest(&self, y: &DVector<f64>) -> (PathVec, f64) {
        let w = self.edge_weights(y);
        let (hi, vhi) = self.dag.extreme_path(&w, Sense::Max);
        let (lo, vlo) = self.dag.extreme_path(&w, Sense::Min);
        if vlo.abs() > vhi.abs() * (1.0 + 1e-12) + 1e-12 {
            (lo, vlo)
        } else {
            (hi, vhi)
        }
    }
}

/// Builds a 2-barycentric spanner by determinant maximization.
///
/// An initial pass replaces the rows of the identity one at a time with the
/// path maximizing the determinant. Afterwards any path whose coefficient
/// against some basis path exceeds 2 in magnitude replaces it, which at least
/// doubles the determinant, so the loop terminates.
pub fn compute_spanner(dag: &ProgramDag) -> PathBasis {
    let coords = Coordinates::new(dag);
    let d = coords.dim;
    let mut x = DMatrix::<f64>::identity(d, d);
    let mut paths: Vec<Option<PathVec>> = vec![None; d];
    for i in 0..d {
        let inv = x.clone().try_inverse().expect("spanner matrix stays nonsingular");
        let (p, _) = coords.farthest(&inv.column(i).into_owned());
        x.set_row(i, &coords.of(&p).transpose());
        paths[i] = Some(p);
    }
    let mut paths: Vec<PathVec> = paths.into_iter().map(|p| p.expect("filled")).collect();

    let mut swap_factors = Vec::new();
    // |det| of a 0/±1 matrix is bounded by Hadamard's bound, so this cap
    // only guards against numerical trouble.
    let cap = 4 * d * (d.max(2) as f64).log2().ceil() as usize + 16;
    'improve: while swap_factors.len() < cap {
        let inv = x.clone().try_inverse().expect("spanner matrix stays nonsingular");
        for i in 0..d {
            let (p, c) = coords.farthest(&inv.column(i).into_owned());
            if c.abs() > SWAP_THRESHOLD {
                x.set_row(i, &coords.of(&p).transpose());
                paths[i] = p;
                swap_factors.push(c.abs());
                continue 'improve;
            }
        }
        break;
    }
    debug!("spanner of dimension {d} after {} swaps", swap_factors.len());
    PathBasis {
        paths,
        edge_count: dag.edge_count(),
        swap_factors,
    }
}

/// Least-squares coefficients `c` with `Σ c_b p_b = p`.
pub fn express_in_basis(basis: &PathBasis, path: &PathVec) -> Result<Vec<f64>, SpannerError> {
    let bt = basis.matrix().transpose();
    let p = DVector::from_vec(path.incidence_f64());
    if basis.is_empty() {
        let residual = p.norm();
        return if residual <= SPAN_TOL {
            Ok(Vec::new())
        } else {
            Err(SpannerError::NotInSpan { residual })
        };
    }
    let c = bt
        .clone()
        .svd(true, true)
        .solve(&p, 1e-12)
        .expect("SVD computed with both factors");
    let residual = (&bt * &c - &p).norm();
    if residual > SPAN_TOL {
        return Err(SpannerError::NotInSpan { residual });
    }
    Ok(c.iter().copied().collect())
}

/// Minimum-norm weights reproducing each row's right-hand side exactly.
pub fn min_norm_weights(paths: &[PathVec], edges: usize, lengths: &[f64]) -> EdgeWeights {
    if paths.is_empty() {
        return EdgeWeights::zeros(edges);
    }
    let b = incidence_matrix(paths, edges);
    let gram = &b * b.transpose();
    let y = gram
        .lu()
        .solve(&DVector::from_column_slice(lengths))
        .expect("independent paths give a nonsingular Gram matrix");
    EdgeWeights::new((b.transpose() * y).iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEstimate {
    pub path: PathVec,
    pub predicted: f64,
    pub weights: EdgeWeights,
    /// Exclusion cores added before a feasible path came out.
    pub cuts: Vec<Vec<EdgeId>>,
    pub basis_size: usize,
}

impl BaselineEstimate {
    /// Error multiplier `2|B|` on `mu_max`.
    pub fn bound(&self) -> f64 {
        2.0 * self.basis_size as f64
    }

    /// The sharper derivation's `2|B| + 1`.
    pub fn bound_with_measurement(&self) -> f64 {
        self.bound() + 1.0
    }

    /// The coarser `2|E|` multiplier.
    pub fn bound_by_edges(&self) -> f64 {
        2.0 * self.weights.len() as f64
    }
}

/// Predicts the longest feasible path from basis measurements alone.
///
/// Edge weights are the minimum-norm fit of the basis lengths; every path in
/// the span then gets `Σ c_b l_b` as its length. Infeasible winners are
/// excluded through their violated exclusion sets and the search repeats.
pub fn baseline_estimate(
    basis: &PathBasis,
    measurements: &MeasurementSet,
    dag: &ProgramDag,
) -> Result<BaselineEstimate, SpannerError> {
    let lengths = basis
        .paths()
        .iter()
        .map(|p| {
            measurements
                .get(p)
                .ok_or_else(|| SpannerError::MissingMeasurement { path: p.edges().to_vec() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let weights = min_norm_weights(basis.paths(), dag.edge_count(), &lengths);
    let (first, value) = dag.extreme_path(&weights, Sense::Max);
    let mut cuts = Vec::new();
    let Some(core) = dag.violated_exclusion(&first).map(<[EdgeId]>::to_vec) else {
        return Ok(BaselineEstimate {
            path: first,
            predicted: value,
            weights,
            cuts,
            basis_size: basis.len(),
        });
    };
    cuts.push(core);

    let mut model = MilpModel::new();
    let b = flow::add_path_selectors(&mut model, dag);
    model.set_objective(Sense::Max, b.iter().zip(weights.iter()).map(|(&v, &w)| (v, w)));
    loop {
        let last = cuts.last().expect("nonempty");
        flow::add_cut(&mut model, &b, last, format!("core{}", cuts.len() - 1));
        let sol = milp::solve_milp(&model)?;
        if !sol.is_optimal() {
            return Err(SpannerError::NoFeasiblePath);
        }
        let path = flow::selected_path(dag, &sol, &b)
            .ok_or_else(|| MilpError::NumericFailure("selection is not a path".into()))?;
        match dag.violated_exclusion(&path) {
            Some(core) => cuts.push(core.to_vec()),
            None => {
                let predicted = path.weight(&weights);
                return Ok(BaselineEstimate {
                    path,
                    predicted,
                    weights,
                    cuts,
                    basis_size: basis.len(),
                });
            }
        }
    }
}
