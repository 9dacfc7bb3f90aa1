use log::info;
use serde::Serialize;

use crate::dag::{EdgeId, PathVec, ProgramDag, SeriesMerge};
use crate::milp::MilpModel;
use crate::platform::{MeasurementSet, PlatformModel};
use crate::spanner::compute_spanner;

use super::{
    iterative_basis, solve_bound, solve_delta, solve_worst, worst_path_model, EstimatorError, IterationRecord,
    WINDOW_SLACK,
};

/// Where path lengths come from.
#[derive(Debug, Clone, Copy)]
pub enum MeasurementSource<'a> {
    /// Measure whatever paths the basis refinement asks for.
    Platform(&'a PlatformModel),
    /// Use a fixed set of measurements; no new paths can be timed.
    Fixed(&'a MeasurementSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    /// Target accuracy constant `A ≥ 1`.
    pub accuracy: f64,
    /// Number of paths to extract, `K ≥ 1`.
    pub top: usize,
    /// Stop once a path's estimate falls below `T_max − 2kD`.
    pub early_stop: bool,
    /// Fuse series edges before solving.
    pub merge_series: bool,
    /// Keep the first worst-path program in the report.
    pub keep_model: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            accuracy: 2.0,
            top: 1,
            early_stop: false,
            merge_series: true,
            keep_model: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPath {
    /// Path in the caller's (unmerged) edge ids.
    pub path: PathVec,
    pub predicted: f64,
    pub measured: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    /// Sorted by predicted length, longest first.
    pub ranked: Vec<RankedPath>,
    pub k: f64,
    pub d: f64,
    /// `2·k·D`.
    pub band_halfwidth: f64,
    pub proven: bool,
    pub iterations: Vec<IterationRecord>,
    /// Measured paths in the caller's edge ids.
    pub measurements: MeasurementSet,
    /// Unsat cores met while refining or extracting.
    pub infeasible_cores: Vec<Vec<EdgeId>>,
    pub nodes: usize,
    /// First worst-path program, over the merged graph's edge ids.
    pub model: Option<MilpModel>,
}

#[derive(Serialize)]
struct PathRow<'a> {
    edges: &'a [EdgeId],
    predicted: f64,
    measured: Option<f64>,
}

#[derive(Serialize)]
struct IterationRow {
    k: Option<f64>,
    seconds: f64,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    k: Option<f64>,
    #[serde(rename = "D")]
    d: f64,
    band: Option<f64>,
    proven: bool,
    paths: Vec<PathRow<'a>>,
    iterations: Vec<IterationRow>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl EstimateReport {
    /// JSON report. Timings are written as 0 unless `wall_clock` is set, so
    /// that reruns are byte-identical. Infinite values become `null`.
    pub fn to_json(&self, wall_clock: bool) -> String {
        let f = ReportFile {
            k: finite(self.k),
            d: self.d,
            band: finite(self.band_halfwidth),
            proven: self.proven,
            paths: self
                .ranked
                .iter()
                .map(|r| PathRow {
                    edges: r.path.edges(),
                    predicted: r.predicted,
                    measured: r.measured,
                })
                .collect(),
            iterations: self
                .iterations
                .iter()
                .map(|it| IterationRow {
                    k: finite(it.k),
                    seconds: if wall_clock { it.seconds } else { 0.0 },
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&f).expect("report serializes");
        s.push('\n');
        s
    }
}

struct Workspace {
    merge: Option<SeriesMerge>,
    dag: ProgramDag,
}

impl Workspace {
    fn new(dag: &ProgramDag, merge: bool) -> Self {
        if merge {
            let m = dag.merge_series();
            Self {
                dag: m.merged().clone(),
                merge: Some(m),
            }
        } else {
            Self {
                dag: dag.clone(),
                merge: None,
            }
        }
    }

    fn to_original(&self, p: &PathVec) -> PathVec {
        match &self.merge {
            Some(m) => m.to_original_path(p),
            None => p.clone(),
        }
    }

    fn to_work(&self, p: &PathVec) -> Result<PathVec, EstimatorError> {
        match &self.merge {
            Some(m) => Ok(m.to_merged_path(p)?),
            None => Ok(p.clone()),
        }
    }

    fn core_to_original(&self, core: &[EdgeId]) -> Vec<EdgeId> {
        match &self.merge {
            Some(m) => {
                let mut out: Vec<EdgeId> = core.iter().flat_map(|&e| m.chain(e).iter().copied()).collect();
                out.sort_unstable();
                out
            }
            None => core.to_vec(),
        }
    }
}

/// Refines the measured basis, then extracts the top-K worst paths.
pub fn estimate_wcett(
    dag: &ProgramDag,
    source: MeasurementSource<'_>,
    options: &EstimateOptions,
) -> Result<EstimateReport, EstimatorError> {
    if !(options.accuracy >= 1.0) {
        return Err(EstimatorError::BadParameter(format!(
            "accuracy must be >= 1, got {}",
            options.accuracy
        )));
    }
    if options.top == 0 {
        return Err(EstimatorError::BadParameter("top must be >= 1".into()));
    }
    let ws = Workspace::new(dag, options.merge_series);
    let work = &ws.dag;

    let (paths, k, mut proven, iterations, mut cuts) = match source {
        MeasurementSource::Platform(platform) => {
            platform.check_dag(dag)?;
            let seed: Vec<PathVec> = compute_spanner(work)
                .paths()
                .iter()
                .filter(|p| work.is_feasible(p))
                .cloned()
                .collect();
            let r = iterative_basis(work, options.accuracy, seed, work)?;
            (r.paths, r.k, r.proven, r.iterations, r.cuts)
        }
        MeasurementSource::Fixed(set) => {
            let paths = set.iter().map(|m| ws.to_work(&m.path)).collect::<Result<Vec<_>, _>>()?;
            // Only feasible paths count: exclude infeasible witnesses until the
            // constant is attained by a feasible path.
            let mut cuts: Vec<Vec<EdgeId>> = Vec::new();
            let mut iterations = Vec::new();
            let (k, proven) = loop {
                let start = std::time::Instant::now();
                let b = solve_bound(work, &paths, &cuts)?;
                let core = work.violated_exclusion(&b.witness_path).map(<[EdgeId]>::to_vec);
                iterations.push(IterationRecord {
                    k: b.k,
                    seconds: start.elapsed().as_secs_f64(),
                    added: None,
                    cut: core.clone(),
                });
                match core {
                    Some(core) => cuts.push(core),
                    None => break (b.k, b.proven),
                }
            };
            (paths, k, proven, iterations, cuts)
        }
    };

    let mut work_set = MeasurementSet::new();
    let mut original_set = MeasurementSet::new();
    for p in &paths {
        let orig = ws.to_original(p);
        let length = match source {
            MeasurementSource::Platform(platform) => platform.measure(&orig),
            MeasurementSource::Fixed(set) => set.get(&orig).expect("fixed paths come from the set"),
        };
        work_set.insert(p.clone(), length);
        original_set.insert(orig, length);
    }

    let delta = solve_delta(work, &work_set)?;
    let d = delta.d;
    let band = 2.0 * k * d;
    info!("k = {k}, D = {d}, band = {band}");

    let mut infeasible_cores: Vec<Vec<EdgeId>> = cuts.iter().map(|c| ws.core_to_original(c)).collect();
    let model = options
        .keep_model
        .then(|| worst_path_model(work, &work_set, d + WINDOW_SLACK, &cuts));
    let mut ranked: Vec<RankedPath> = Vec::new();
    let mut nodes = 0;
    while ranked.len() < options.top {
        let worst = match solve_worst(work, &work_set, d + WINDOW_SLACK, &cuts) {
            Ok(w) => w,
            Err(EstimatorError::NoFeasiblePath) => break,
            Err(e) => return Err(e),
        };
        nodes += worst.nodes;
        proven &= worst.proven;
        if let Some(core) = work.violated_exclusion(&worst.path) {
            infeasible_cores.push(ws.core_to_original(core));
            cuts.push(core.to_vec());
            continue;
        }
        cuts.push(worst.path.edges().to_vec());
        if options.early_stop {
            if let Some(head) = ranked.first() {
                if worst.predicted < head.predicted - band {
                    break;
                }
            }
        }
        let orig = ws.to_original(&worst.path);
        let measured = match source {
            MeasurementSource::Platform(platform) => Some(platform.measure(&orig)),
            MeasurementSource::Fixed(set) => set.get(&orig),
        };
        ranked.push(RankedPath {
            path: orig,
            predicted: worst.predicted,
            measured,
        });
    }
    if ranked.is_empty() {
        return Err(EstimatorError::NoFeasiblePath);
    }
    Ok(EstimateReport {
        ranked,
        k,
        d,
        band_halfwidth: band,
        proven,
        iterations,
        measurements: original_set,
        infeasible_cores,
        nodes,
        model,
    })
}
