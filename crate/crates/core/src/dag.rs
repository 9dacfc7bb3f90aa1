//! DAG model of an unrolled program.
//!
//! Vertices are program locations, edges are basic blocks. Edge ids are dense
//! (`0..|E|`) because they index path incidence vectors and weight vectors.
//! A path is infeasible iff it contains every edge of some declared
//! exclusion set.

use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::fmt;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Sense;

pub type EdgeId = usize;
pub type VertexId = usize;

/// Default cap on the number of paths [`ProgramDag::enumerate_paths`] will
/// materialize.
pub const DEFAULT_PATH_CAP: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum DagError {
    #[error("graph has a cycle through vertices {vertices:?}")]
    CyclicGraph { vertices: Vec<VertexId> },
    #[error("edges {edges:?} do not lie on any source-to-sink path")]
    DisconnectedEdge { edges: Vec<EdgeId> },
    #[error("vertices {vertices:?} do not lie on any source-to-sink path")]
    IsolatedVertex { vertices: Vec<VertexId> },
    #[error("bad ids: {0}")]
    BadIds(String),
    #[error("no source-to-sink path exists")]
    NoPath,
    #[error("{count} paths exceed the enumeration cap of {cap}")]
    TooManyPaths { count: u128, cap: u128 },
    #[error("invalid path {edges:?}: {reason}")]
    InvalidPath { edges: Vec<EdgeId>, reason: String },
    #[error("weight vector has length {got}, graph has {expected} edges")]
    WeightLength { expected: usize, got: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed DAG json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub from: VertexId,
    pub to: VertexId,
}

/// On-disk shape of a DAG. Field order here is the serialized order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagFile {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<Edge>,
    pub source: VertexId,
    pub sink: VertexId,
    #[serde(default)]
    pub exclusions: Vec<Vec<EdgeId>>,
}

/// A validated, immutable program DAG.
#[derive(Debug, Clone)]
pub struct ProgramDag {
    vertices: Vec<VertexId>,
    edges: Vec<Edge>,
    source: usize,
    sink: usize,
    exclusions: Vec<Vec<EdgeId>>,
    // Derived, indexed by vertex position in `vertices`.
    tail: Vec<usize>,
    head: Vec<usize>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
    topo: Vec<usize>,
}

impl PartialEq for ProgramDag {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.edges == other.edges
            && self.source == other.source
            && self.sink == other.sink
            && self.exclusions == other.exclusions
    }
}

impl ProgramDag {
    /// Builds and validates a DAG.
    pub fn new(
        vertices: Vec<VertexId>,
        edges: Vec<Edge>,
        source: VertexId,
        sink: VertexId,
        exclusions: Vec<Vec<EdgeId>>,
    ) -> Result<Self, DagError> {
        Self::build(vertices, edges, source, sink, exclusions, 2)
    }

    fn build(
        mut vertices: Vec<VertexId>,
        mut edges: Vec<Edge>,
        source: VertexId,
        sink: VertexId,
        exclusions: Vec<Vec<EdgeId>>,
        min_exclusion: usize,
    ) -> Result<Self, DagError> {
        vertices.sort_unstable();
        if let Some(w) = vertices.windows(2).find(|w| w[0] == w[1]) {
            return Err(DagError::BadIds(format!("duplicate vertex id {}", w[0])));
        }
        let index: HashMap<VertexId, usize> =
            vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let lookup = |v: VertexId, what: &str| {
            index
                .get(&v)
                .copied()
                .ok_or_else(|| DagError::BadIds(format!("{what} refers to unknown vertex {v}")))
        };
        let s = lookup(source, "source")?;
        let t = lookup(sink, "sink")?;
        if s == t {
            return Err(DagError::BadIds(format!("source and sink are both {source}")));
        }

        edges.sort_by_key(|e| e.id);
        for (i, e) in edges.iter().enumerate() {
            if e.id != i {
                return Err(DagError::BadIds(format!(
                    "edge ids must be dense 0..{}; found {} at position {i}",
                    edges.len(),
                    e.id
                )));
            }
        }
        let mut tail = Vec::with_capacity(edges.len());
        let mut head = Vec::with_capacity(edges.len());
        for e in &edges {
            tail.push(lookup(e.from, &format!("edge {}", e.id))?);
            head.push(lookup(e.to, &format!("edge {}", e.id))?);
        }

        let mut excl = Vec::with_capacity(exclusions.len());
        for set in exclusions {
            let set: BTreeSet<EdgeId> = set.into_iter().collect();
            if let Some(&bad) = set.iter().find(|&&e| e >= edges.len()) {
                return Err(DagError::BadIds(format!("exclusion refers to unknown edge {bad}")));
            }
            if set.len() < min_exclusion {
                return Err(DagError::BadIds(format!(
                    "exclusion set {set:?} has fewer than {min_exclusion} edges"
                )));
            }
            excl.push(set.into_iter().collect::<Vec<_>>());
        }
        excl.sort();
        excl.dedup();

        let n = vertices.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for e in 0..edges.len() {
            out_edges[tail[e]].push(e);
            in_edges[head[e]].push(e);
        }

        // Kahn's algorithm, smallest vertex position first.
        let mut indeg: Vec<usize> = in_edges.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..n).filter(|&v| indeg[v] == 0).map(Reverse).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(Reverse(v)) = ready.pop() {
            topo.push(v);
            for &e in &out_edges[v] {
                indeg[head[e]] -= 1;
                if indeg[head[e]] == 0 {
                    ready.push(Reverse(head[e]));
                }
            }
        }
        if topo.len() < n {
            let cyclic = (0..n).filter(|&v| indeg[v] > 0).map(|v| vertices[v]).collect();
            return Err(DagError::CyclicGraph { vertices: cyclic });
        }

        let mut from_s = vec![false; n];
        from_s[s] = true;
        for &v in &topo {
            if from_s[v] {
                for &e in &out_edges[v] {
                    from_s[head[e]] = true;
                }
            }
        }
        let mut to_t = vec![false; n];
        to_t[t] = true;
        for &v in topo.iter().rev() {
            if out_edges[v].iter().any(|&e| to_t[head[e]]) {
                to_t[v] = true;
            }
        }
        if !from_s[t] {
            return Err(DagError::NoPath);
        }
        let dangling: Vec<EdgeId> = (0..edges.len())
            .filter(|&e| !(from_s[tail[e]] && to_t[head[e]]))
            .collect();
        if !dangling.is_empty() {
            return Err(DagError::DisconnectedEdge { edges: dangling });
        }
        let isolated: Vec<VertexId> = (0..n)
            .filter(|&v| !(from_s[v] && to_t[v]))
            .map(|v| vertices[v])
            .collect();
        if !isolated.is_empty() {
            return Err(DagError::IsolatedVertex { vertices: isolated });
        }

        Ok(Self {
            vertices,
            edges,
            source: s,
            sink: t,
            exclusions: excl,
            tail,
            head,
            out_edges,
            in_edges,
            topo,
        })
    }

    pub fn from_file_repr(file: DagFile) -> Result<Self, DagError> {
        Self::new(file.vertices, file.edges, file.source, file.sink, file.exclusions)
    }

    pub fn to_file_repr(&self) -> DagFile {
        DagFile {
            vertices: self.vertices.clone(),
            edges: self.edges.clone(),
            source: self.source_id(),
            sink: self.sink_id(),
            exclusions: self.exclusions.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, DagError> {
        Self::from_file_repr(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file_repr()).expect("DagFile serializes");
        s.push('\n');
        s
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, DagError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DagError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), DagError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| DagError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Re-checks every structural invariant. Singleton exclusions are
    /// accepted here because series merging can produce them.
    pub fn validate(&self) -> Result<(), DagError> {
        Self::build(
            self.vertices.clone(),
            self.edges.clone(),
            self.source_id(),
            self.sink_id(),
            self.exclusions.clone(),
            1,
        )
        .map(|_| ())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn exclusions(&self) -> &[Vec<EdgeId>] {
        &self.exclusions
    }

    pub fn source_id(&self) -> VertexId {
        self.vertices[self.source]
    }

    pub fn sink_id(&self) -> VertexId {
        self.vertices[self.sink]
    }

    /// Dense position of the source vertex.
    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Dense position of the tail vertex of `e`.
    pub fn tail(&self, e: EdgeId) -> usize {
        self.tail[e]
    }

    pub fn head(&self, e: EdgeId) -> usize {
        self.head[e]
    }

    /// Outgoing edges of the vertex at dense position `v`, ascending ids.
    pub fn out_edges(&self, v: usize) -> &[EdgeId] {
        &self.out_edges[v]
    }

    pub fn in_edges(&self, v: usize) -> &[EdgeId] {
        &self.in_edges[v]
    }

    /// Dense vertex positions in topological order.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Dimension of the span of all source-to-sink incidence vectors.
    ///
    /// Every edge lies on some path, so path vectors are exactly the unit
    /// flows and their span has dimension `|E| - |V| + 2`.
    pub fn path_space_dim(&self) -> usize {
        self.edge_count() + 2 - self.vertex_count()
    }

    /// Builds a path from an ordered edge list.
    pub fn path(&self, edges: Vec<EdgeId>) -> Result<PathVec, DagError> {
        let bad = |edges: Vec<EdgeId>, reason: &str| DagError::InvalidPath {
            edges,
            reason: reason.to_string(),
        };
        if edges.is_empty() {
            return Err(bad(edges, "empty"));
        }
        if let Some(&e) = edges.iter().find(|&&e| e >= self.edge_count()) {
            return Err(bad(edges.clone(), &format!("unknown edge {e}")));
        }
        if self.tail[edges[0]] != self.source {
            return Err(bad(edges, "does not start at the source"));
        }
        if self.head[*edges.last().unwrap()] != self.sink {
            return Err(bad(edges, "does not end at the sink"));
        }
        if edges.windows(2).any(|w| self.head[w[0]] != self.tail[w[1]]) {
            return Err(bad(edges, "edges are not consecutive"));
        }
        let mut incidence = vec![false; self.edge_count()];
        for &e in &edges {
            incidence[e] = true;
        }
        Ok(PathVec { edges, incidence })
    }

    /// Follows selected edges from the source. Returns `None` unless the
    /// selection is exactly one source-to-sink path.
    pub fn path_from_selection(&self, selected: &[bool]) -> Option<PathVec> {
        if selected.len() != self.edge_count() {
            return None;
        }
        let mut edges = Vec::new();
        let mut v = self.source;
        while v != self.sink {
            let mut next = self.out_edges[v].iter().filter(|&&e| selected[e]);
            let e = *next.next()?;
            if next.next().is_some() {
                return None;
            }
            edges.push(e);
            v = self.head[e];
        }
        if edges.len() != selected.iter().filter(|&&b| b).count() {
            return None;
        }
        self.path(edges).ok()
    }

    /// The exclusion set a path violates, if any: smallest cardinality first,
    /// then lowest lexicographic edge list.
    pub fn violated_exclusion(&self, path: &PathVec) -> Option<&[EdgeId]> {
        self.exclusions
            .iter()
            .filter(|set| set.iter().all(|&e| path.contains(e)))
            .min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)))
            .map(Vec::as_slice)
    }

    pub fn is_feasible(&self, path: &PathVec) -> bool {
        self.violated_exclusion(path).is_none()
    }

    /// Number of source-to-sink paths ignoring exclusions (saturating).
    pub fn count_paths(&self) -> u128 {
        let mut ways = vec![0u128; self.vertex_count()];
        ways[self.source] = 1;
        for &v in &self.topo {
            if ways[v] == 0 {
                continue;
            }
            for &e in &self.out_edges[v] {
                let h = self.head[e];
                ways[h] = ways[h].saturating_add(ways[v]);
            }
        }
        ways[self.sink]
    }

    pub fn enumerate_paths(&self, respect_exclusions: bool) -> Result<Vec<PathVec>, DagError> {
        self.enumerate_paths_capped(respect_exclusions, DEFAULT_PATH_CAP)
    }

    /// All source-to-sink paths in lexicographic edge-id order.
    pub fn enumerate_paths_capped(
        &self,
        respect_exclusions: bool,
        cap: u128,
    ) -> Result<Vec<PathVec>, DagError> {
        let count = self.count_paths();
        if count > cap {
            return Err(DagError::TooManyPaths { count, cap });
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut stack: Vec<(usize, usize)> = vec![(self.source, 0)];
        let mut prefix: Vec<EdgeId> = Vec::new();
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if v == self.sink {
                let path = self.path(prefix.clone()).expect("walk is a path");
                if !respect_exclusions || self.is_feasible(&path) {
                    out.push(path);
                }
                stack.pop();
                prefix.pop();
                continue;
            }
            if *next < self.out_edges[v].len() {
                let e = self.out_edges[v][*next];
                *next += 1;
                prefix.push(e);
                stack.push((self.head[e], 0));
            } else {
                stack.pop();
                prefix.pop();
            }
        }
        Ok(out)
    }

    /// Longest (`Max`) or shortest (`Min`) source-to-sink path under
    /// `weights`. Ties go to the lexicographically smallest edge list.
    pub fn extreme_path(&self, weights: &[f64], sense: Sense) -> (PathVec, f64) {
        assert_eq!(weights.len(), self.edge_count(), "one weight per edge");
        let sign = match sense {
            Sense::Max => 1.0,
            Sense::Min => -1.0,
        };
        // best[v]: best signed value from v to the sink.
        let mut best = vec![f64::NEG_INFINITY; self.vertex_count()];
        let mut choice = vec![usize::MAX; self.vertex_count()];
        best[self.sink] = 0.0;
        for &v in self.topo.iter().rev() {
            if v == self.sink {
                continue;
            }
            let cands = self.out_edges[v]
                .iter()
                .map(|&e| (e, sign * weights[e] + best[self.head[e]]))
                .filter(|(_, val)| val.is_finite());
            let top = cands.clone().map(|(_, val)| val).fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-12 * (1.0 + top.abs());
            // out_edges are ascending, so the first near-optimal edge is the
            // lexicographically smallest continuation.
            if let Some((e, val)) = cands.into_iter().find(|&(_, val)| val >= top - tol) {
                best[v] = val;
                choice[v] = e;
            }
        }
        let mut edges = Vec::new();
        let mut v = self.source;
        while v != self.sink {
            let e = choice[v];
            edges.push(e);
            v = self.head[e];
        }
        let path = self.path(edges).expect("DP walk is a path");
        let value = path.weight(weights);
        (path, value)
    }

    /// Fuses every internal vertex with in- and out-degree one.
    pub fn merge_series(&self) -> SeriesMerge {
        let n = self.vertex_count();
        let series: Vec<bool> = (0..n)
            .map(|v| {
                v != self.source
                    && v != self.sink
                    && self.in_edges[v].len() == 1
                    && self.out_edges[v].len() == 1
            })
            .collect();
        let mut chains: Vec<Vec<EdgeId>> = Vec::new();
        let mut merged_edges = Vec::new();
        for e in 0..self.edge_count() {
            if series[self.tail[e]] {
                continue;
            }
            let mut chain = vec![e];
            let mut v = self.head[e];
            while series[v] {
                let next = self.out_edges[v][0];
                chain.push(next);
                v = self.head[next];
            }
            merged_edges.push(Edge {
                id: chains.len(),
                from: self.vertices[self.tail[e]],
                to: self.vertices[v],
            });
            chains.push(chain);
        }
        let mut to_merged = vec![usize::MAX; self.edge_count()];
        for (m, chain) in chains.iter().enumerate() {
            for &e in chain {
                to_merged[e] = m;
            }
        }
        let kept: Vec<VertexId> = (0..n).filter(|&v| !series[v]).map(|v| self.vertices[v]).collect();
        let exclusions = self
            .exclusions
            .iter()
            .map(|set| set.iter().map(|&e| to_merged[e]).collect::<BTreeSet<_>>().into_iter().collect())
            .collect();
        let dag = Self::build(kept, merged_edges, self.source_id(), self.sink_id(), exclusions, 1)
            .expect("merging series edges preserves validity");
        SeriesMerge {
            original: self.clone(),
            merged: dag,
            chains,
            to_merged,
        }
    }
}

/// Result of [`ProgramDag::merge_series`]: the fused graph plus the mapping
/// between merged and original edge ids.
#[derive(Debug, Clone)]
pub struct SeriesMerge {
    original: ProgramDag,
    merged: ProgramDag,
    chains: Vec<Vec<EdgeId>>,
    to_merged: Vec<EdgeId>,
}

impl SeriesMerge {
    pub fn original(&self) -> &ProgramDag {
        &self.original
    }

    pub fn merged(&self) -> &ProgramDag {
        &self.merged
    }

    /// Ordered original edges fused into merged edge `m`.
    pub fn chain(&self, m: EdgeId) -> &[EdgeId] {
        &self.chains[m]
    }

    pub fn chains(&self) -> &[Vec<EdgeId>] {
        &self.chains
    }

    pub fn merged_edge_of(&self, original: EdgeId) -> EdgeId {
        self.to_merged[original]
    }

    pub fn to_original_path(&self, path: &PathVec) -> PathVec {
        let edges = path.edges().iter().flat_map(|&m| self.chains[m].iter().copied()).collect();
        self.original.path(edges).expect("expanded merged path is an original path")
    }

    pub fn to_merged_path(&self, path: &PathVec) -> Result<PathVec, DagError> {
        let mut edges: Vec<EdgeId> = path.edges().iter().map(|&e| self.to_merged[e]).collect();
        edges.dedup();
        let merged = self.merged.path(edges)?;
        if self.to_original_path(&merged).edges() != path.edges() {
            return Err(DagError::InvalidPath {
                edges: path.edges().to_vec(),
                reason: "not a path of the original graph".into(),
            });
        }
        Ok(merged)
    }

    /// Sums original weights along each merged chain.
    pub fn push_weights(&self, weights: &[f64]) -> EdgeWeights {
        EdgeWeights::new(
            self.chains
                .iter()
                .map(|chain| chain.iter().map(|&e| weights[e]).sum())
                .collect(),
        )
    }
}

/// A source-to-sink path: ordered edges plus the 0/1 incidence vector.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathVec {
    edges: Vec<EdgeId>,
    incidence: Vec<bool>,
}

impl PathVec {
    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn incidence(&self) -> &[bool] {
        &self.incidence
    }

    pub fn incidence_f64(&self) -> Vec<f64> {
        self.incidence.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.incidence.get(e).copied().unwrap_or(false)
    }

    pub fn weight(&self, weights: &[f64]) -> f64 {
        self.edges.iter().map(|&e| weights[e]).sum()
    }
}

impl fmt::Debug for PathVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PathVec{:?}", self.edges)
    }
}

/// Per-edge weights in cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeWeights(Vec<f64>);

impl EdgeWeights {
    pub fn new(w: Vec<f64>) -> Self {
        Self(w)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn for_dag(dag: &ProgramDag, w: Vec<f64>) -> Result<Self, DagError> {
        if w.len() != dag.edge_count() {
            return Err(DagError::WeightLength {
                expected: dag.edge_count(),
                got: w.len(),
            });
        }
        Ok(Self(w))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for EdgeWeights {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Decides whether a path corresponds to some program input.
pub trait FeasibilityOracle {
    /// `Err(core)` names a minimal edge set that cannot co-occur.
    fn check(&self, path: &PathVec) -> Result<(), Vec<EdgeId>>;
}

impl FeasibilityOracle for ProgramDag {
    fn check(&self, path: &PathVec) -> Result<(), Vec<EdgeId>> {
        match self.violated_exclusion(path) {
            None => Ok(()),
            Some(core) => Err(core.to_vec()),
        }
    }
}

impl<F> FeasibilityOracle for F
where
    F: Fn(&PathVec) -> Result<(), Vec<EdgeId>>,
{
    fn check(&self, path: &PathVec) -> Result<(), Vec<EdgeId>> {
        self(path)
    }
}

/// Chain of `n` diamonds. Diamond `i` uses edges `4i` (entry to top),
/// `4i+1` (entry to bottom), `4i+2` (top to exit), `4i+3` (bottom to exit).
pub fn diamond_chain(n: usize) -> ProgramDag {
    assert!(n >= 1, "at least one diamond");
    let mut edges = Vec::with_capacity(4 * n);
    for i in 0..n {
        let entry = 3 * i;
        let (top, bottom, exit) = (entry + 1, entry + 2, entry + 3);
        for (from, to) in [(entry, top), (entry, bottom), (top, exit), (bottom, exit)] {
            edges.push(Edge {
                id: edges.len(),
                from,
                to,
            });
        }
    }
    ProgramDag::new((0..=3 * n).collect(), edges, 0, 3 * n, vec![]).expect("diamond chain is valid")
}

/// Single edge from source to sink.
pub fn single_edge() -> ProgramDag {
    ProgramDag::new(vec![0, 1], vec![Edge { id: 0, from: 0, to: 1 }], 0, 1, vec![])
        .expect("single edge is valid")
}
