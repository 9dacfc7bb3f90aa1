//! Dense bounded-variable simplex on a compact tableau.
//!
//! Every row `i` gets a logical variable `y_i = a_i·x` whose bounds are the
//! row bounds, so every relation (ranges included) is just a pair of bounds. The
//! tableau stores only nonbasic columns: `x_B = -T x_N`. The system is
//! homogeneous, so basic values are always recoverable from nonbasic ones.

use std::rc::Rc;

use super::model::MilpModel;
use crate::Sense;

const PIVOT_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const INFEASIBLE_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-7;
const DEGENERATE_STREAK: usize = 50;
const REFRESH_EVERY: usize = 100;
const REINVERT_EVERY: usize = 400;

/// Internal maximization form of a model.
#[derive(Debug)]
pub(crate) struct LpData {
    pub n: usize,
    pub m: usize,
    a: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// `+1` when the model maximizes, `-1` when it minimizes.
    pub sign: f64,
}

impl LpData {
    /// `None` when an empty row is violated (trivially infeasible).
    pub fn from_model(model: &MilpModel) -> Option<Self> {
        let n = model.num_vars();
        let mut rows = Vec::new();
        for c in model.constraints() {
            if c.coeffs.is_empty() {
                if c.lower > PRIMAL_TOL || c.upper < -PRIMAL_TOL {
                    return None;
                }
                continue;
            }
            rows.push(c);
        }
        let m = rows.len();
        let mut a = vec![0.0; m * n];
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for v in model.vars() {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        for (i, c) in rows.iter().enumerate() {
            for &(v, coef) in &c.coeffs {
                a[i * n + v.index()] = coef;
            }
            lower.push(c.lower);
            upper.push(c.upper);
        }
        let sign = match model.objective().sense {
            Sense::Max => 1.0,
            Sense::Min => -1.0,
        };
        let mut cost = vec![0.0; n + m];
        for &(v, c) in &model.objective().coeffs {
            cost[v.index()] = sign * c;
        }
        Some(Self {
            n,
            m,
            a,
            cost,
            lower,
            upper,
            sign,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IterationCap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Row(usize),
    Col(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    data: Rc<LpData>,
    n: usize,
    m: usize,
    t: Vec<f64>,
    d: Vec<f64>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    slot: Vec<Slot>,
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    since_refresh: usize,
    since_reinvert: usize,
    pub iterations: usize,
}

fn resting_value(lo: f64, hi: f64) -> f64 {
    if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}

impl Tableau {
    /// All-logical starting basis with structurals at a bound.
    pub fn new(data: Rc<LpData>) -> Self {
        let (n, m) = (data.n, data.m);
        let t = data.a.iter().map(|&v| -v).collect();
        let mut x = vec![0.0; n + m];
        for j in 0..n {
            x[j] = resting_value(data.lower[j], data.upper[j]);
        }
        let mut tab = Self {
            n,
            m,
            t,
            d: vec![0.0; n],
            basic: (n..n + m).collect(),
            nonbasic: (0..n).collect(),
            slot: (0..n).map(Slot::Col).chain((0..m).map(Slot::Row)).collect(),
            x,
            lower: data.lower.clone(),
            upper: data.upper.clone(),
            since_refresh: 0,
            since_reinvert: 0,
            iterations: 0,
            data,
        };
        tab.recompute_basics();
        tab.recompute_duals();
        tab
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    /// Objective in the model's own sense.
    pub fn objective(&self) -> f64 {
        let z: f64 = self.data.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum();
        z * self.data.sign
    }

    fn recompute_basics(&mut self) {
        for i in 0..self.m {
            let row = &self.t[i * self.n..(i + 1) * self.n];
            let v: f64 = row.iter().zip(&self.nonbasic).map(|(&a, &k)| a * self.x[k]).sum();
            self.x[self.basic[i]] = -v;
        }
    }

    fn recompute_duals(&mut self) {
        let cost = &self.data.cost;
        for j in 0..self.n {
            let mut dj = cost[self.nonbasic[j]];
            for i in 0..self.m {
                dj -= cost[self.basic[i]] * self.t[i * self.n + j];
            }
            self.d[j] = dj;
        }
    }

    fn can_increase(&self, k: usize) -> bool {
        self.x[k] < self.upper[k]
    }

    fn can_decrease(&self, k: usize) -> bool {
        self.x[k] > self.lower[k]
    }

    /// Signed bound violation of basic row `i`: negative below, positive above.
    fn violation(&self, i: usize) -> f64 {
        let k = self.basic[i];
        let (x, lo, hi) = (self.x[k], self.lower[k], self.upper[k]);
        if x < lo - PRIMAL_TOL * (1.0 + lo.abs()) {
            x - lo
        } else if x > hi + PRIMAL_TOL * (1.0 + hi.abs()) {
            x - hi
        } else {
            0.0
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let p = self.t[r * n + q];
        let inv = 1.0 / p;
        let pivot_row: Vec<f64> = self.t[r * n..(r + 1) * n].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + q];
            if f == 0.0 {
                continue;
            }
            let s = f * inv;
            let row = &mut self.t[i * n..(i + 1) * n];
            for (a, &pr) in row.iter_mut().zip(&pivot_row) {
                *a -= s * pr;
            }
            row[q] = -s;
        }
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            for a in row.iter_mut() {
                *a *= inv;
            }
            row[q] = inv;
        }
        let dq = self.d[q];
        if dq != 0.0 {
            let s = dq * inv;
            for (dj, &pr) in self.d.iter_mut().zip(&pivot_row) {
                *dj -= s * pr;
            }
            self.d[q] = -s;
        }
        let entering = self.nonbasic[q];
        let leaving = self.basic[r];
        self.basic[r] = entering;
        self.nonbasic[q] = leaving;
        self.slot[entering] = Slot::Row(r);
        self.slot[leaving] = Slot::Col(q);
        self.iterations += 1;
        self.since_refresh += 1;
        self.since_reinvert += 1;
    }

    fn maintain(&mut self) {
        if self.since_reinvert >= REINVERT_EVERY {
            // A failed reinversion keeps the current (older) factorization.
            let _ = self.reinvert();
        } else if self.since_refresh >= REFRESH_EVERY {
            self.recompute_basics();
            self.recompute_duals();
            self.since_refresh = 0;
        }
    }

    /// Rebuilds the tableau for the current basis from the original matrix.
    pub fn reinvert(&mut self) -> Result<(), ()> {
        let mut fresh = Tableau::new(self.data.clone());
        fresh.lower.clone_from(&self.lower);
        fresh.upper.clone_from(&self.upper);
        let mut in_target = vec![false; self.n + self.m];
        for &k in &self.basic {
            in_target[k] = true;
        }
        for &k in self.basic.iter().filter(|&&k| k < self.n) {
            let q = match fresh.slot[k] {
                Slot::Col(q) => q,
                Slot::Row(_) => continue,
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..fresh.m {
                let cur = fresh.basic[i];
                if in_target[cur] {
                    continue;
                }
                let a = fresh.t[i * fresh.n + q].abs();
                if a > best.map_or(1e-11, |b| b.1) {
                    best = Some((i, a));
                }
            }
            let (r, _) = best.ok_or(())?;
            fresh.pivot(r, q);
        }
        for k in 0..self.n + self.m {
            if let Slot::Col(_) = fresh.slot[k] {
                fresh.x[k] = self.x[k];
            }
        }
        fresh.recompute_basics();
        fresh.recompute_duals();
        fresh.iterations = self.iterations;
        fresh.since_refresh = 0;
        fresh.since_reinvert = 0;
        *self = fresh;
        Ok(())
    }

    /// Changes the bounds of variable `k`, keeping the basis.
    pub fn set_bounds(&mut self, k: usize, lo: f64, hi: f64) {
        self.lower[k] = lo;
        self.upper[k] = hi;
        if let Slot::Col(j) = self.slot[k] {
            let old = self.x[k];
            let new = if old <= lo {
                resting_value(lo, hi)
            } else if old >= hi {
                if hi.is_finite() { hi } else { resting_value(lo, hi) }
            } else if lo.is_finite() && (old - lo).abs() <= (hi - old).abs() {
                lo
            } else if hi.is_finite() {
                hi
            } else {
                resting_value(lo, hi)
            };
            let delta = new - old;
            if delta != 0.0 {
                self.x[k] = new;
                for i in 0..self.m {
                    let a = self.t[i * self.n + j];
                    if a != 0.0 {
                        self.x[self.basic[i]] -= a * delta;
                    }
                }
            }
        }
    }

    /// Moves nonbasic column `q` by `delta`, updating basic values.
    fn shift(&mut self, q: usize, delta: f64) {
        let k = self.nonbasic[q];
        self.x[k] += delta;
        for i in 0..self.m {
            let a = self.t[i * self.n + q];
            if a != 0.0 {
                self.x[self.basic[i]] -= a * delta;
            }
        }
    }

    /// Phase I (sum of infeasibilities) then phase II.
    pub fn primal(&mut self, cap: &mut usize) -> Result<Outcome, IterationCap> {
        match self.phase(true, cap)? {
            Outcome::Optimal => self.phase(false, cap),
            other => Ok(other),
        }
    }

    fn phase(&mut self, phase_one: bool, cap: &mut usize) -> Result<Outcome, IterationCap> {
        let (n, m) = (self.n, self.m);
        let mut degenerate = 0usize;
        let mut g = vec![0.0; m];
        let mut d1 = vec![0.0; n];
        loop {
            self.maintain();
            let costs: &[f64] = if phase_one {
                let mut any = false;
                for (i, gi) in g.iter_mut().enumerate() {
                    let v = self.violation(i);
                    *gi = if v < 0.0 {
                        any = true;
                        1.0
                    } else if v > 0.0 {
                        any = true;
                        -1.0
                    } else {
                        0.0
                    };
                }
                if !any {
                    return Ok(Outcome::Optimal);
                }
                for (j, dj) in d1.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (i, &gi) in g.iter().enumerate() {
                        if gi != 0.0 {
                            s -= gi * self.t[i * n + j];
                        }
                    }
                    *dj = s;
                }
                &d1
            } else {
                &self.d
            };

            let bland = degenerate > DEGENERATE_STREAK;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            let mut best_var = usize::MAX;
            for j in 0..n {
                let k = self.nonbasic[j];
                let dj = costs[j];
                let dir = if dj > DUAL_TOL && self.can_increase(k) {
                    1.0
                } else if dj < -DUAL_TOL && self.can_decrease(k) {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    if k < best_var {
                        best_var = k;
                        entering = Some((j, dir));
                    }
                } else if dj.abs() > best {
                    best = dj.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else {
                if phase_one {
                    let worst = (0..m).map(|i| self.violation(i).abs()).fold(0.0, f64::max);
                    if worst > INFEASIBLE_TOL {
                        return Ok(Outcome::Infeasible);
                    }
                    // Residual infeasibility below tolerance: snap and go on.
                    for i in 0..m {
                        let k = self.basic[i];
                        self.x[k] = self.x[k].clamp(self.lower[k], self.upper[k]);
                    }
                }
                return Ok(Outcome::Optimal);
            };

            if *cap == 0 {
                return Err(IterationCap);
            }
            *cap -= 1;

            // Ratio test. `limit` holds (step, row, bound value).
            let kq = self.nonbasic[q];
            let mut step = self.upper[kq] - self.lower[kq];
            let mut leave: Option<(usize, f64)> = None;
            let mut leave_mag = 0.0;
            for i in 0..m {
                let a = self.t[i * n + q];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -a * dir;
                let k = self.basic[i];
                let (x, lo, hi) = (self.x[k], self.lower[k], self.upper[k]);
                let v = if phase_one { self.violation(i) } else { 0.0 };
                let (limit, bound) = if v < 0.0 {
                    if rate > 0.0 { ((lo - x) / rate, lo) } else { continue }
                } else if v > 0.0 {
                    if rate < 0.0 { ((x - hi) / -rate, hi) } else { continue }
                } else if rate < 0.0 {
                    if lo.is_finite() { (((x - lo) / -rate).max(0.0), lo) } else { continue }
                } else if hi.is_finite() {
                    (((hi - x) / rate).max(0.0), hi)
                } else {
                    continue;
                };
                let better = match leave {
                    _ if limit < step - 1e-12 * (1.0 + step.abs()) => true,
                    Some((r, _)) if limit <= step + 1e-12 * (1.0 + step.abs()) => {
                        if bland {
                            k < self.basic[r]
                        } else {
                            a.abs() > leave_mag
                        }
                    }
                    None if limit <= step => true,
                    _ => false,
                };
                if better {
                    step = step.min(limit);
                    leave = Some((i, bound));
                    leave_mag = a.abs();
                }
            }
            if !step.is_finite() {
                return Ok(Outcome::Unbounded);
            }
            if step <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.shift(q, dir * step);
            match leave {
                Some((r, bound)) => {
                    self.x[self.basic[r]] = bound;
                    self.pivot(r, q);
                }
                None => {
                    // Bound flip.
                    self.x[kq] = if dir > 0.0 { self.upper[kq] } else { self.lower[kq] };
                }
            }
        }
    }

    /// Dual simplex from a dual-feasible basis after bound changes.
    pub fn dual(&mut self, cap: &mut usize) -> Result<Outcome, IterationCap> {
        let n = self.n;
        let mut degenerate = 0usize;
        loop {
            self.maintain();
            let bland = degenerate > DEGENERATE_STREAK;
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = 0.0;
            for i in 0..self.m {
                let v = self.violation(i);
                if v == 0.0 {
                    continue;
                }
                let take = match leave {
                    None => true,
                    Some((r, _)) if bland => self.basic[i] < self.basic[r],
                    Some(_) => v.abs() > worst,
                };
                if take {
                    worst = v.abs();
                    leave = Some((i, v));
                }
            }
            let Some((r, v)) = leave else {
                return Ok(Outcome::Optimal);
            };
            if *cap == 0 {
                return Err(IterationCap);
            }
            *cap -= 1;
            let needs_increase = v < 0.0;
            let kr = self.basic[r];
            let target = if needs_increase { self.lower[kr] } else { self.upper[kr] };

            let mut enter: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_mag = 0.0;
            for j in 0..n {
                let alpha = self.t[r * n + j];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let k = self.nonbasic[j];
                let helps = if needs_increase {
                    (alpha < 0.0 && self.can_increase(k)) || (alpha > 0.0 && self.can_decrease(k))
                } else {
                    (alpha > 0.0 && self.can_increase(k)) || (alpha < 0.0 && self.can_decrease(k))
                };
                if !helps {
                    continue;
                }
                let ratio = self.d[j].abs() / alpha.abs();
                let tie = 1e-12 * (1.0 + best_ratio.abs());
                let take = if ratio < best_ratio - tie {
                    true
                } else if ratio <= best_ratio + tie {
                    if bland {
                        enter.is_some_and(|e| k < self.nonbasic[e])
                    } else {
                        alpha.abs() > best_mag
                    }
                } else {
                    false
                };
                if take {
                    best_ratio = best_ratio.min(ratio);
                    best_mag = alpha.abs();
                    enter = Some(j);
                }
            }
            let Some(q) = enter else {
                return Ok(Outcome::Infeasible);
            };
            if best_ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let alpha = self.t[r * n + q];
            let delta = (self.x[kr] - target) / alpha;
            self.shift(q, delta);
            self.x[kr] = target;
            self.pivot(r, q);
        }
    }

    /// Largest reduced-cost violation of optimality (0 when dual feasible).
    #[cfg(test)]
    pub fn dual_infeasibility(&self) -> f64 {
        (0..self.n)
            .map(|j| {
                let k = self.nonbasic[j];
                let dj = self.d[j];
                let mut v: f64 = 0.0;
                if self.can_increase(k) {
                    v = v.max(dj);
                }
                if self.can_decrease(k) {
                    v = v.max(-dj);
                }
                v
            })
            .fold(0.0, f64::max)
    }
}
