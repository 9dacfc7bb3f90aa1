//! Simulated timing platform, measurement sets and benchmark generators.
//!
//! A [`PlatformModel`] hides true edge weights and a per-path deviation `d_x`
//! with `|d_x| ≤ mu_max`. Each path's deviation is drawn from its own RNG
//! stream keyed by the seed and the path's edges, so measurements do not
//! depend on call order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dag::{DagError, Edge, EdgeId, EdgeWeights, PathVec, ProgramDag};
use crate::Sense;

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error("invalid platform: {0}")]
    Invalid(String),
    #[error("measurement CSV line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("platform JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Dag(#[from] DagError),
}

/// How `d_x` is chosen for a path.
#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationLaw {
    /// `d_x` uniform in `[-mu_max, mu_max]`.
    Uniform,
    /// Fixed deviations for listed paths (original edge ids), zero elsewhere.
    Adversarial(BTreeMap<Vec<EdgeId>, f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformModel {
    true_weights: EdgeWeights,
    mu_max: f64,
    law: PerturbationLaw,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Target {
    path: Vec<EdgeId>,
    d: f64,
}

#[derive(Serialize, Deserialize)]
struct PlatformFile {
    weights: Vec<f64>,
    mu_max: f64,
    law: String,
    seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    targets: Vec<Target>,
}

/// RNG stream for one path, domain-separated by `tag`.
fn path_rng(tag: &[u8], seed: u64, edges: &[EdgeId]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(tag);
    h.update(seed.to_le_bytes());
    for &e in edges {
        h.update((e as u64).to_le_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

impl PlatformModel {
    pub fn new(true_weights: EdgeWeights, mu_max: f64, law: PerturbationLaw, seed: u64) -> Result<Self, PlatformError> {
        if !(mu_max >= 0.0 && mu_max.is_finite()) {
            return Err(PlatformError::Invalid(format!("mu_max must be finite and >= 0, got {mu_max}")));
        }
        if let Some(w) = true_weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(PlatformError::Invalid(format!("true weights must be finite and >= 0, got {w}")));
        }
        if let PerturbationLaw::Adversarial(map) = &law {
            if let Some((p, d)) = map.iter().find(|(_, d)| d.abs() > mu_max || !d.is_finite()) {
                return Err(PlatformError::Invalid(format!(
                    "deviation {d} for path {p:?} exceeds mu_max {mu_max}"
                )));
            }
        }
        Ok(Self {
            true_weights,
            mu_max,
            law,
            seed,
        })
    }

    pub fn uniform(true_weights: EdgeWeights, mu_max: f64, seed: u64) -> Result<Self, PlatformError> {
        Self::new(true_weights, mu_max, PerturbationLaw::Uniform, seed)
    }

    pub fn true_weights(&self) -> &EdgeWeights {
        &self.true_weights
    }

    pub fn mu_max(&self) -> f64 {
        self.mu_max
    }

    pub fn law(&self) -> &PerturbationLaw {
        &self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Errors unless the weight vector matches the DAG's edge count.
    pub fn check_dag(&self, dag: &ProgramDag) -> Result<(), PlatformError> {
        if self.true_weights.len() != dag.edge_count() {
            return Err(PlatformError::Invalid(format!(
                "platform has {} weights, DAG has {} edges",
                self.true_weights.len(),
                dag.edge_count()
            )));
        }
        Ok(())
    }

    /// Noise-free length `Σ r(w_e)`.
    pub fn baseline(&self, path: &PathVec) -> f64 {
        path.weight(&self.true_weights)
    }

    pub fn deviation(&self, path: &PathVec) -> f64 {
        match &self.law {
            PerturbationLaw::Uniform if self.mu_max == 0.0 => 0.0,
            PerturbationLaw::Uniform => {
                let mut rng = path_rng(b"measure", self.seed, path.edges());
                rng.gen_range(-self.mu_max..=self.mu_max)
            }
            PerturbationLaw::Adversarial(map) => map.get(path.edges()).copied().unwrap_or(0.0),
        }
    }

    /// Observed length `Σ r(w_e) + d_x`.
    pub fn measure(&self, path: &PathVec) -> f64 {
        self.baseline(path) + self.deviation(path)
    }

    pub fn measure_all<'a>(&self, paths: impl IntoIterator<Item = &'a PathVec>) -> MeasurementSet {
        let mut set = MeasurementSet::new();
        for p in paths {
            set.insert(p.clone(), self.measure(p));
        }
        set
    }

    pub fn from_json(text: &str) -> Result<Self, PlatformError> {
        let f: PlatformFile = serde_json::from_str(text)?;
        let law = match f.law.as_str() {
            "uniform" => {
                if !f.targets.is_empty() {
                    return Err(PlatformError::Invalid("targets given for the uniform law".into()));
                }
                PerturbationLaw::Uniform
            }
            "adversarial" => PerturbationLaw::Adversarial(f.targets.into_iter().map(|t| (t.path, t.d)).collect()),
            other => return Err(PlatformError::Invalid(format!("unknown law {other:?}"))),
        };
        Self::new(EdgeWeights::new(f.weights), f.mu_max, law, f.seed)
    }

    pub fn to_json(&self) -> String {
        let (law, targets) = match &self.law {
            PerturbationLaw::Uniform => ("uniform", Vec::new()),
            PerturbationLaw::Adversarial(map) => (
                "adversarial",
                map.iter().map(|(p, &d)| Target { path: p.clone(), d }).collect(),
            ),
        };
        let f = PlatformFile {
            weights: self.true_weights.to_vec(),
            mu_max: self.mu_max,
            law: law.into(),
            seed: self.seed,
            targets,
        };
        let mut s = serde_json::to_string_pretty(&f).expect("platform serializes");
        s.push('\n');
        s
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, PlatformError> {
        Self::from_json(&read_text(path.as_ref())?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), PlatformError> {
        write_text(path.as_ref(), &self.to_json())
    }
}

fn read_text(path: &Path) -> Result<String, PlatformError> {
    fs::read_to_string(path).map_err(|source| PlatformError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), PlatformError> {
    fs::write(path, text).map_err(|source| PlatformError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub path: PathVec,
    pub length: f64,
}

/// Measured paths with one length each, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementSet {
    records: Vec<Measurement>,
}

/// Decimal with at most six fraction digits, trailing zeros dropped.
pub fn format_length(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

impl MeasurementSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a record; re-measuring a path overwrites its length.
    pub fn insert(&mut self, path: PathVec, length: f64) {
        match self.records.iter_mut().find(|m| m.path == path) {
            Some(m) => m.length = length,
            None => self.records.push(Measurement { path, length }),
        }
    }

    /// Appends without the overwrite rule, allowing repeated paths.
    pub fn push_raw(&mut self, path: PathVec, length: f64) {
        self.records.push(Measurement { path, length });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Measurement] {
        &self.records
    }

    pub fn iter(&self) -> impl Iterator<Item = &Measurement> {
        self.records.iter()
    }

    pub fn paths(&self) -> Vec<PathVec> {
        self.records.iter().map(|m| m.path.clone()).collect()
    }

    pub fn get(&self, path: &PathVec) -> Option<f64> {
        self.records.iter().find(|m| &m.path == path).map(|m| m.length)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().delimiter(b';').from_writer(Vec::new());
        w.write_record(["path", "length"]).expect("in-memory write");
        for m in &self.records {
            let edges: Vec<String> = m.path.edges().iter().map(|e| e.to_string()).collect();
            w.write_record([edges.join(","), format_length(m.length)])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    /// Parses `path;length` rows, validating each path against `dag`.
    pub fn from_csv(dag: &ProgramDag, text: &str) -> Result<Self, PlatformError> {
        let mut r = csv::ReaderBuilder::new()
            .delimiter(b';')
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers = r.headers().map_err(|e| PlatformError::Csv { line: 1, msg: e.to_string() })?;
        if headers.len() != 2 || &headers[0] != "path" || &headers[1] != "length" {
            return Err(PlatformError::Csv {
                line: 1,
                msg: "expected header `path;length`".into(),
            });
        }
        let mut set = Self::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let bad = |msg: String| PlatformError::Csv { line, msg };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != 2 {
                return Err(bad(format!("expected 2 fields, got {}", rec.len())));
            }
            let edges = rec[0]
                .split(',')
                .map(|t| t.trim().parse::<EdgeId>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("bad edge id: {e}")))?;
            let path = dag.path(edges).map_err(|e| bad(e.to_string()))?;
            let length: f64 = rec[1].trim().parse().map_err(|e| bad(format!("bad length: {e}")))?;
            if !length.is_finite() {
                return Err(bad("length is not finite".into()));
            }
            set.insert(path, length);
        }
        Ok(set)
    }

    pub fn read(dag: &ProgramDag, path: impl AsRef<Path>) -> Result<Self, PlatformError> {
        Self::from_csv(dag, &read_text(path.as_ref())?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), PlatformError> {
        write_text(path.as_ref(), &self.to_csv())
    }
}

/// Scales every length by `1 + u`, `u` uniform in `±percent/100`, drawn per
/// path from `(seed, path)`.
pub fn perturb(measurements: &MeasurementSet, percent: f64, seed: u64) -> MeasurementSet {
    assert!(percent >= 0.0, "percent must be >= 0");
    let r = percent / 100.0;
    let records = measurements
        .iter()
        .map(|m| {
            let u = if r == 0.0 {
                0.0
            } else {
                path_rng(b"perturb", seed, m.path.edges()).gen_range(-r..=r)
            };
            Measurement {
                path: m.path.clone(),
                length: m.length * (1.0 + u),
            }
        })
        .collect();
    MeasurementSet { records }
}

/// Uniform integer weights in `[1, 100]`.
pub fn random_weights(edges: usize, seed: u64) -> EdgeWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EdgeWeights::new((0..edges).map(|_| rng.gen_range(1..=100) as f64).collect())
}

/// Uniform-law platform with random weights, refusing a `mu_max` above the
/// shortest path baseline so that every measured length stays nonnegative.
pub fn synthetic_platform(dag: &ProgramDag, mu_max: f64, seed: u64) -> Result<PlatformModel, PlatformError> {
    let w = random_weights(dag.edge_count(), seed);
    let (_, shortest) = dag.extreme_path(&w, Sense::Min);
    if mu_max > shortest {
        return Err(PlatformError::Invalid(format!(
            "mu_max {mu_max} exceeds the shortest path baseline {shortest}"
        )));
    }
    PlatformModel::uniform(w, mu_max, seed)
}

/// Layered random DAG: s feeds layer 0, consecutive layers are linked with
/// probability `p` (each vertex keeps at least one in- and out-edge), and the
/// last layer feeds t.
pub fn layered_dag(layers: usize, width: usize, p: f64, seed: u64) -> Result<ProgramDag, PlatformError> {
    if layers == 0 || width == 0 || !(0.0..=1.0).contains(&p) {
        return Err(PlatformError::Invalid(format!(
            "layered generator needs layers >= 1, width >= 1, p in [0, 1]; got {layers}, {width}, {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 0;
    let t = layers * width + 1;
    let v = |l: usize, i: usize| 1 + l * width + i;
    let mut pairs = Vec::new();
    for i in 0..width {
        pairs.push((s, v(0, i)));
    }
    for l in 0..layers - 1 {
        let mut links = vec![vec![false; width]; width];
        for row in links.iter_mut() {
            for cell in row.iter_mut() {
                *cell = rng.gen_bool(p);
            }
        }
        for row in links.iter_mut() {
            if !row.iter().any(|&x| x) {
                row[rng.gen_range(0..width)] = true;
            }
        }
        for j in 0..width {
            if !links.iter().any(|row| row[j]) {
                let i = rng.gen_range(0..width);
                links[i][j] = true;
            }
        }
        for (i, row) in links.iter().enumerate() {
            for (j, &on) in row.iter().enumerate() {
                if on {
                    pairs.push((v(l, i), v(l + 1, j)));
                }
            }
        }
    }
    for i in 0..width {
        pairs.push((v(layers - 1, i), t));
    }
    pairs.sort_unstable();
    let edges = pairs
        .into_iter()
        .enumerate()
        .map(|(id, (from, to))| Edge { id, from, to })
        .collect();
    Ok(ProgramDag::new((0..=t).collect(), edges, s, t, Vec::new())?)
}

/// Adds up to `count` random two-edge exclusions, keeping only those that
/// leave at least one feasible path (checked by enumeration when the path
/// count is at most `check_cap`).
pub fn with_random_exclusions(dag: &ProgramDag, count: usize, seed: u64, check_cap: u128) -> ProgramDag {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e7c1);
    let m = dag.edge_count();
    let mut current = dag.clone();
    if m < 2 {
        return current;
    }
    let mut attempts = 0;
    while current.exclusions().len() < count && attempts < 20 * count.max(1) {
        attempts += 1;
        let a = rng.gen_range(0..m);
        let b = rng.gen_range(0..m);
        if a == b || current.tail(a) == current.tail(b) || current.head(a) == current.head(b) {
            continue;
        }
        let mut excl = current.exclusions().to_vec();
        excl.push(vec![a.min(b), a.max(b)]);
        let file = {
            let mut f = current.to_file_repr();
            f.exclusions = excl;
            f
        };
        let Ok(candidate) = ProgramDag::from_file_repr(file) else { continue };
        if candidate.exclusions().len() == current.exclusions().len() {
            continue;
        }
        let keep = candidate.count_paths() > check_cap
            || candidate
                .enumerate_paths_capped(true, check_cap)
                .map(|p| !p.is_empty())
                .unwrap_or(false);
        if keep {
            current = candidate;
        }
    }
    current
}
