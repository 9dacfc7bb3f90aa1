//! Deliberately naive reference solvers for cross-checking the main crate.
//!
//! Nothing here shares code with the production solver: a full-tableau
//! two-phase simplex with Bland's rule, and brute force over explicitly
//! listed paths. Paths are plain edge-id lists.

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpResult {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpResult::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// A row `coeffs · x (cmp) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<f64>, cmp: Cmp, rhs: f64) -> Self {
        Self { coeffs, cmp, rhs }
    }
}

/// Maximizes `c · x` subject to `rows`, with `x_j ≥ 0` unless `free[j]`.
pub fn lp_max(c: &[f64], rows: &[Row], free: &[bool]) -> LpResult {
    let n = c.len();
    assert_eq!(free.len(), n);
    // Free variables become x⁺ − x⁻.
    let mut cols: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        cols.push((j, 1.0));
        if free[j] {
            cols.push((j, -1.0));
        }
    }
    let nx = cols.len();
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.cmp != Cmp::Eq).count();
    let total = nx + n_slack + m;
    let width = total + 1;
    let mut t = vec![vec![0.0; width]; m];
    let mut basis = vec![0usize; m];
    let mut slack = nx;
    for (i, r) in rows.iter().enumerate() {
        let flip = if r.rhs < 0.0 { -1.0 } else { 1.0 };
        for (k, &(j, s)) in cols.iter().enumerate() {
            t[i][k] = flip * s * r.coeffs.get(j).copied().unwrap_or(0.0);
        }
        match r.cmp {
            Cmp::Le => {
                t[i][slack] = flip;
                slack += 1;
            }
            Cmp::Ge => {
                t[i][slack] = -flip;
                slack += 1;
            }
            Cmp::Eq => {}
        }
        t[i][nx + n_slack + i] = 1.0;
        t[i][total] = flip * r.rhs;
        basis[i] = nx + n_slack + i;
    }

    // Phase one: minimize the sum of artificials.
    let mut cost1 = vec![0.0; total];
    for c in cost1.iter_mut().skip(nx + n_slack) {
        *c = -1.0;
    }
    if run(&mut t, &mut basis, &cost1, total, None).is_none() {
        return LpResult::Unbounded; // cannot happen for phase one
    }
    let infeas: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= nx + n_slack)
        .map(|(i, _)| t[i][total])
        .sum();
    if infeas > 1e-7 {
        return LpResult::Infeasible;
    }
    // Drive zero-valued artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] >= nx + n_slack {
            if let Some(q) = (0..nx + n_slack).find(|&q| t[i][q].abs() > EPS) {
                pivot(&mut t, &mut basis, i, q);
            }
        }
    }

    let mut cost2 = vec![0.0; total];
    for (k, &(j, s)) in cols.iter().enumerate() {
        cost2[k] = s * c[j];
    }
    let allowed = nx + n_slack;
    match run(&mut t, &mut basis, &cost2, total, Some(allowed)) {
        None => LpResult::Unbounded,
        Some(()) => {
            let mut xs = vec![0.0; total];
            for (i, &b) in basis.iter().enumerate() {
                xs[b] = t[i][total];
            }
            let mut x = vec![0.0; n];
            for (k, &(j, s)) in cols.iter().enumerate() {
                x[j] += s * xs[k];
            }
            let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
            LpResult::Optimal { value, x }
        }
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, q: usize) {
    let p = t[r][q];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let pr = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            let f = row[q];
            if f != 0.0 {
                for (v, &a) in row.iter_mut().zip(&pr) {
                    *v -= f * a;
                }
            }
        }
    }
    basis[r] = q;
}

/// Maximizes `cost` with Bland's rule; `None` when unbounded. Columns at or
/// beyond `limit` may not enter.
fn run(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], total: usize, limit: Option<usize>) -> Option<()> {
    let limit = limit.unwrap_or(total);
    loop {
        let mut entering = None;
        for q in 0..limit {
            if basis.contains(&q) {
                continue;
            }
            let reduced = cost[q] - basis.iter().enumerate().map(|(i, &b)| cost[b] * t[i][q]).sum::<f64>();
            if reduced > EPS {
                entering = Some(q);
                break;
            }
        }
        let Some(q) = entering else { return Some(()) };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..t.len() {
            if t[i][q] > EPS {
                let ratio = t[i][total] / t[i][q];
                let better = match leave {
                    None => true,
                    Some((r, best)) => ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[r]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (r, _) = leave?;
        pivot(t, basis, r, q);
    }
}

fn path_row(path: &[usize], m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    for &e in path {
        v[e] = 1.0;
    }
    v
}

/// Longest path by brute force: for each candidate, the LP maximum of its
/// length over `w ≥ 0` within `D` of every measurement. `None` when no
/// candidate admits feasible weights; `+∞` when some candidate is unbounded.
pub fn worst_by_enumeration(
    candidates: &[Vec<usize>],
    edges: usize,
    measurements: &[(Vec<usize>, f64)],
    d: f64,
) -> Option<(f64, usize)> {
    let mut rows = Vec::new();
    for (p, l) in measurements {
        rows.push(Row::new(path_row(p, edges), Cmp::Le, l + d));
        rows.push(Row::new(path_row(p, edges), Cmp::Ge, l - d));
    }
    let free = vec![false; edges];
    let mut best: Option<(f64, usize)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let v = match lp_max(&path_row(c, edges), &rows, &free) {
            LpResult::Optimal { value, .. } => value,
            LpResult::Unbounded => f64::INFINITY,
            LpResult::Infeasible => return None,
        };
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, i));
        }
    }
    best
}

/// Accuracy constant by brute force: the largest `|len(x)|` over candidate
/// paths for free-sign weights with every measured length in `[-1, 1]`.
pub fn accuracy_by_enumeration(candidates: &[Vec<usize>], edges: usize, measured: &[Vec<usize>]) -> f64 {
    let mut rows = Vec::new();
    for p in measured {
        rows.push(Row::new(path_row(p, edges), Cmp::Le, 1.0));
        rows.push(Row::new(path_row(p, edges), Cmp::Ge, -1.0));
    }
    let free = vec![true; edges];
    let mut best: f64 = 0.0;
    for c in candidates {
        // Sign symmetry: maximizing len covers maximizing −len.
        match lp_max(&path_row(c, edges), &rows, &free) {
            LpResult::Optimal { value, .. } => best = best.max(value),
            LpResult::Unbounded => return f64::INFINITY,
            LpResult::Infeasible => unreachable!("w = 0 is feasible"),
        }
    }
    best
}

/// Minimum `μ ≥ 0` with nonnegative weights fitting every measurement to
/// within `μ`.
pub fn delta_by_lp(edges: usize, measurements: &[(Vec<usize>, f64)]) -> f64 {
    let mut rows = Vec::new();
    for (p, l) in measurements {
        let mut a = path_row(p, edges);
        a.push(1.0);
        rows.push(Row::new(a.clone(), Cmp::Ge, *l));
        a[edges] = -1.0;
        rows.push(Row::new(a, Cmp::Le, *l));
    }
    let mut c = vec![0.0; edges + 1];
    c[edges] = -1.0;
    match lp_max(&c, &rows, &vec![false; edges + 1]) {
        LpResult::Optimal { value, .. } => -value,
        other => panic!("repeatability LP is always feasible and bounded, got {other:?}"),
    }
}

/// Every 0/1 assignment of `n ≤ 20` bits maximizing `value` among those
/// accepted by `feasible`.
pub fn best_binary(n: usize, feasible: impl Fn(&[bool]) -> bool, value: impl Fn(&[bool]) -> f64) -> Option<f64> {
    assert!(n <= 20, "brute force over 2^{n} assignments");
    let mut best: Option<f64> = None;
    let mut bits = vec![false; n];
    for mask in 0u32..(1u32 << n) {
        for (i, b) in bits.iter_mut().enumerate() {
            *b = mask >> i & 1 == 1;
        }
        if feasible(&bits) {
            let v = value(&bits);
            if best.is_none_or(|b| v > b) {
                best = Some(v);
            }
        }
    }
    best
}
