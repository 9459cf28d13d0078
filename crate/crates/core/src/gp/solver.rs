//! Log-barrier interior-point method for geometric programs in convex form.
//!
//! With `y = ln x` the objective is affine and each constraint is
//! `F_i(y) = lse_j(ln c_ij + a_ij . y) <= 0`. Each variable is also boxed to
//! `[log_floor, log_cap]` so exponentials stay finite and every barrier
//! subproblem is bounded. A strictly feasible start comes from the caller,
//! the bound midpoints, or a phase-1 solve that minimizes a common slack `s`
//! in `F_i(y) <= s`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::GPProblem;
use crate::error::Result;

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpTolerances {
    /// Constraint slack accepted on returned points: `f(x) <= 1 + feasibility`.
    pub feasibility: f64,
    /// Target duality gap (in the log of the objective) and relative
    /// stationarity residual.
    pub kkt: f64,
    /// Newton steps per barrier stage.
    pub max_newton: usize,
    /// Barrier parameter growth factor.
    pub growth: f64,
    /// Lower bound on `ln x`.
    pub log_floor: f64,
    /// Upper bound on `ln x` for variables without a finite bound.
    pub log_cap: f64,
}

impl Default for GpTolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-8,
            kkt: 1e-7,
            max_newton: 200,
            growth: 10.0,
            log_floor: -40.0,
            log_cap: 40.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpStatus {
    Optimal,
    Infeasible,
    MaxIter,
    /// A variable without an upper bound ran into the internal cap.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GPSolution {
    pub point: Vec<f64>,
    pub objective_value: f64,
    pub status: GpStatus,
    pub kkt_residual: f64,
    /// Largest constraint value at `point`.
    pub max_constraint: f64,
    pub newton_steps: usize,
}

impl GPSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == GpStatus::Optimal
    }
}

/// Constraints in compressed form: term `j` of constraint `i` has log
/// coefficient `logc[j]` and exponents `idx/val[start[j]..start[j+1]]`.
struct Compiled {
    n: usize,
    obj: Vec<f64>,
    cons: Vec<(usize, usize)>,
    logc: Vec<f64>,
    start: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Compiled {
    fn new(p: &GPProblem) -> Self {
        let n = p.num_vars();
        let mut obj = vec![0.0; n];
        for &(i, a) in p.objective().exps() {
            obj[i] = a;
        }
        let mut c = Self {
            n,
            obj,
            cons: Vec::new(),
            logc: Vec::new(),
            start: vec![0],
            idx: Vec::new(),
            val: Vec::new(),
        };
        for con in p.constraints() {
            let first = c.logc.len();
            for t in con.terms() {
                c.logc.push(t.coef().ln());
                for &(i, a) in t.exps() {
                    c.idx.push(i);
                    c.val.push(a);
                }
                c.start.push(c.idx.len());
            }
            c.cons.push((first, c.logc.len()));
        }
        c
    }

    #[inline]
    fn term(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.start[j], self.start[j + 1]);
        (&self.idx[a..b], &self.val[a..b])
    }

    #[inline]
    fn term_log(&self, j: usize, y: &[f64]) -> f64 {
        let (ix, v) = self.term(j);
        self.logc[j] + ix.iter().zip(v).map(|(&i, &a)| a * y[i]).sum::<f64>()
    }

    /// `F_i(y)` for one constraint.
    fn lse(&self, i: usize, y: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let (a, b) = self.cons[i];
        scratch.clear();
        scratch.extend((a..b).map(|j| self.term_log(j, y)));
        let m = scratch.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + scratch.iter().map(|z| (z - m).exp()).sum::<f64>().ln()
    }
}

/// Barrier problem over `z = (y)` or, in phase 1, `z = (y, s)`.
struct Barrier<'a> {
    c: &'a Compiled,
    phase1: bool,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Barrier<'_> {
    fn dim(&self) -> usize {
        self.c.n + usize::from(self.phase1)
    }

    fn num_barriers(&self) -> usize {
        self.c.cons.len() + 2 * self.c.n
    }

    fn objective(&self, z: &[f64]) -> f64 {
        if self.phase1 {
            z[self.c.n]
        } else {
            self.c.obj.iter().zip(z).map(|(a, y)| a * y).sum()
        }
    }

    fn shift(&self, z: &[f64]) -> f64 {
        if self.phase1 {
            z[self.c.n]
        } else {
            0.0
        }
    }

    /// Barrier value, or `None` outside the strict interior.
    fn phi(&self, z: &[f64], t: f64, scratch: &mut Vec<f64>) -> Option<f64> {
        let n = self.c.n;
        let mut v = t * self.objective(z);
        for m in 0..n {
            let (a, b) = (z[m] - self.lo[m], self.hi[m] - z[m]);
            if !(a > 0.0 && b > 0.0) {
                return None;
            }
            v -= a.ln() + b.ln();
        }
        let s = self.shift(z);
        for i in 0..self.c.cons.len() {
            let f = self.c.lse(i, z, scratch) - s;
            if !(f < 0.0) {
                return None;
            }
            v -= (-f).ln();
        }
        v.is_finite().then_some(v)
    }

    fn grad_hess(&self, z: &[f64], t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.c.n;
        let d = self.dim();
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        if self.phase1 {
            g[n] = t;
        } else {
            for m in 0..n {
                g[m] = t * self.c.obj[m];
            }
        }
        for m in 0..n {
            let (a, b) = (z[m] - self.lo[m], self.hi[m] - z[m]);
            g[m] += -1.0 / a + 1.0 / b;
            h[(m, m)] += 1.0 / (a * a) + 1.0 / (b * b);
        }

        let s = self.shift(z);
        let mut logs = Vec::new();
        let mut gf = vec![0.0; d];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; d];
        for &(a, b) in &self.c.cons {
            logs.clear();
            logs.extend((a..b).map(|j| self.c.term_log(j, z)));
            let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logs.iter().map(|l| (l - mx).exp()).sum();
            let lse = mx + sum.ln();
            let f = lse - s;
            let inv = 1.0 / (-f);
            for (jj, j) in (a..b).enumerate() {
                let w = (logs[jj] - lse).exp();
                let (ix, v) = self.c.term(j);
                for (p, (&i1, &a1)) in ix.iter().zip(v).enumerate() {
                    gf[i1] += w * a1;
                    if !mark[i1] {
                        mark[i1] = true;
                        touched.push(i1);
                    }
                    let wa = inv * w * a1;
                    for (&i2, &a2) in ix[..=p].iter().zip(&v[..=p]) {
                        h[(i1, i2)] += wa * a2;
                    }
                }
            }
            if self.phase1 {
                // every term carries exponent -1 on the slack
                gf[n] -= 1.0;
                if !mark[n] {
                    mark[n] = true;
                    touched.push(n);
                }
                for &i1 in &touched {
                    if i1 == n {
                        continue;
                    }
                    // sum_j w_j a_j (-1) = -gf over y entries
                    let cross = -inv * gf[i1];
                    let (r, c) = if i1 >= n { (i1, n) } else { (n, i1) };
                    h[(r, c)] += cross;
                }
                h[(n, n)] += inv;
            }
            let outer = inv * inv - inv;
            touched.sort_unstable();
            for (p, &i1) in touched.iter().enumerate() {
                g[i1] += inv * gf[i1];
                for &i2 in &touched[..=p] {
                    let (r, c) = if i1 >= i2 { (i1, i2) } else { (i2, i1) };
                    h[(r, c)] += outer * gf[i1] * gf[i2];
                }
            }
            for &i in &touched {
                gf[i] = 0.0;
                mark[i] = false;
            }
            touched.clear();
        }
        // mirror the lower triangle
        for r in 0..d {
            for c in 0..r {
                h[(c, r)] = h[(r, c)];
            }
        }
        (g, h)
    }
}

fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Some(-ch.solve(g));
    }
    let scale = h.diagonal().amax().max(1e-300);
    let mut mu = 1e-12 * scale;
    for _ in 0..20 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += mu;
        }
        if let Some(ch) = hr.cholesky() {
            return Some(-ch.solve(g));
        }
        mu *= 10.0;
    }
    None
}

enum Centering {
    Converged,
    MaxIter,
    Breakdown,
    /// Phase-1 found enough slack.
    EarlyStop,
}

/// Damped Newton on `phi(., t)` from a strictly interior point.
fn center(
    bar: &Barrier<'_>,
    z: &mut Vec<f64>,
    t: f64,
    tol: &GpTolerances,
    steps: &mut usize,
    early: Option<f64>,
) -> Centering {
    let mut scratch = Vec::new();
    let Some(mut f) = bar.phi(z, t, &mut scratch) else {
        return Centering::Breakdown;
    };
    let mut prev_dec = f64::INFINITY;
    for _ in 0..tol.max_newton {
        let (g, h) = bar.grad_hess(z, t);
        let Some(dz) = newton_direction(&g, &h) else {
            return Centering::Breakdown;
        };
        let slope = g.dot(&dz);
        let dec = -slope / 2.0;
        // stop at the target or once rounding stalls the quadratic phase
        if dec <= 1e-24 || (dec < 1e-10 && dec >= 0.25 * prev_dec) {
            return Centering::Converged;
        }
        prev_dec = dec;
        // inside the quadratic region full steps are safe and Armijo tests
        // are meaningless against rounding in phi
        let pure = -slope < 1e-6;
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-14 {
            let trial: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, b)| a + step * b).collect();
            if let Some(ft) = bar.phi(&trial, t, &mut scratch) {
                if pure || ft <= f + 0.01 * step * slope {
                    *z = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        *steps += 1;
        if !accepted {
            // no progress possible at this precision
            return Centering::Converged;
        }
        if let Some(level) = early {
            if z[bar.c.n] < level {
                return Centering::EarlyStop;
            }
        }
    }
    Centering::MaxIter
}

fn bounds(p: &GPProblem, tol: &GpTolerances) -> (Vec<f64>, Vec<f64>) {
    let lo = vec![tol.log_floor; p.num_vars()];
    let hi = p
        .upper_bounds()
        .iter()
        .map(|u| match u {
            // keep the bound constraint itself as the active one
            Some(u) => (u.ln() + 1.0).min(tol.log_cap).max(tol.log_floor + 2.0),
            None => tol.log_cap,
        })
        .collect();
    (lo, hi)
}

fn strictly_feasible(c: &Compiled, y: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    let mut scratch = Vec::new();
    y.iter()
        .zip(lo.iter().zip(hi))
        .all(|(v, (l, h))| v > l && v < h)
        && (0..c.cons.len()).all(|i| c.lse(i, y, &mut scratch) < 0.0)
}

/// Phase 1: minimize `s` subject to `F_i(y) <= s`. Returns a strictly
/// feasible `y`, or `None` if the problem is infeasible.
fn phase_one(
    c: &Compiled,
    y0: &[f64],
    lo: &[f64],
    hi: &[f64],
    tol: &GpTolerances,
    steps: &mut usize,
) -> Option<Vec<f64>> {
    let bar = Barrier {
        c,
        phase1: true,
        lo: lo.to_vec(),
        hi: hi.to_vec(),
    };
    let mut scratch = Vec::new();
    let fmax = (0..c.cons.len())
        .map(|i| c.lse(i, y0, &mut scratch))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = y0.to_vec();
    z.push(fmax.max(0.0) + 1.0);
    let mut t = 1.0;
    let m = bar.num_barriers() as f64;
    let early = Some(-0.5);
    loop {
        match center(&bar, &mut z, t, tol, steps, early) {
            Centering::EarlyStop => break,
            Centering::Breakdown | Centering::MaxIter => {
                let y = z[..c.n].to_vec();
                return strictly_feasible(c, &y, lo, hi).then_some(y);
            }
            Centering::Converged => {}
        }
        let s = z[c.n];
        if s < 0.0 && m / t <= tol.kkt {
            break;
        }
        if s - m / t > 0.0 {
            return None;
        }
        if m / t <= tol.kkt * 1e-3 {
            // the optimal slack is zero to working precision
            return None;
        }
        t *= tol.growth;
    }
    let y = z[..c.n].to_vec();
    strictly_feasible(c, &y, lo, hi).then_some(y)
}

/// Log slack below which a constraint or bound counts as active.
const ACTIVE_SLACK: f64 = 1e-6;

/// Lagrangian gradient residual with multipliers refitted by least squares
/// over the active set. At large `t` the barrier gradient is dominated by
/// rounding in `y` along strongly curved directions; the refit certificate
/// is not. Inactive constraints keep their barrier multipliers and negative
/// fitted multipliers are clipped to zero, so the result is a valid residual
/// for a nonnegative multiplier vector.
fn refit_residual(c: &Compiled, lo: &[f64], hi: &[f64], y: &[f64], t: f64) -> f64 {
    let n = c.n;
    let mut scratch = Vec::new();
    let mut base = DVector::from_column_slice(&c.obj);
    let mut active: Vec<DVector<f64>> = Vec::new();
    let mut add = |grad: DVector<f64>, slack: f64, base: &mut DVector<f64>| {
        if slack <= ACTIVE_SLACK {
            active.push(grad);
        } else {
            base.axpy(1.0 / (t * slack), &grad, 1.0);
        }
    };
    for i in 0..c.cons.len() {
        let lse = c.lse(i, y, &mut scratch);
        let (a, b) = c.cons[i];
        let mut grad = DVector::zeros(n);
        for j in a..b {
            let w = (c.term_log(j, y) - lse).exp();
            let (ix, v) = c.term(j);
            for (&k, &e) in ix.iter().zip(v) {
                grad[k] += w * e;
            }
        }
        add(grad, -lse, &mut base);
    }
    for m in 0..n {
        let mut e = DVector::zeros(n);
        e[m] = -1.0;
        add(e.clone(), y[m] - lo[m], &mut base);
        add(-e, hi[m] - y[m], &mut base);
    }
    if active.is_empty() {
        return base.amax();
    }
    let a = DMatrix::from_columns(&active);
    let Ok(lambda) = a.clone().svd(true, true).solve(&(-&base), 1e-14) else {
        return f64::INFINITY;
    };
    let lambda = lambda.map(|l| l.max(0.0));
    (base + a * lambda).amax()
}

/// Solves from the default start: the log-midpoint of each variable's range.
pub fn solve(p: &GPProblem, tol: &GpTolerances) -> Result<GPSolution> {
    let (lo, _) = bounds(p, tol);
    let y0: Vec<f64> = p
        .upper_bounds()
        .iter()
        .zip(&lo)
        .map(|(u, l)| match u {
            Some(u) => 0.5 * (l + u.ln()),
            None => 0.0,
        })
        .collect();
    solve_log(p, y0, tol)
}

/// Solves from a caller-provided positive start point. Infeasible starts are
/// repaired by phase 1.
pub fn solve_from(p: &GPProblem, x0: &[f64], tol: &GpTolerances) -> Result<GPSolution> {
    if x0.len() != p.num_vars() {
        return Err(crate::Error::InvalidArgument(format!(
            "start point has {} entries, problem has {} variables",
            x0.len(),
            p.num_vars()
        )));
    }
    let y0 = x0.iter().map(|x| x.max(f64::MIN_POSITIVE).ln()).collect();
    solve_log(p, y0, tol)
}

fn solve_log(p: &GPProblem, mut y: Vec<f64>, tol: &GpTolerances) -> Result<GPSolution> {
    p.validate()?;
    let c = Compiled::new(p);
    let (lo, hi) = bounds(p, tol);
    for ((v, l), h) in y.iter_mut().zip(&lo).zip(&hi) {
        let margin = 1e-3 * (h - l);
        *v = v.clamp(l + margin, h - margin);
    }
    let mut steps = 0;
    if !strictly_feasible(&c, &y, &lo, &hi) {
        match phase_one(&c, &y, &lo, &hi, tol, &mut steps) {
            Some(feasible) => y = feasible,
            None => {
                let x: Vec<f64> = y.iter().map(|v| v.exp()).collect();
                return Ok(GPSolution {
                    objective_value: p.objective().eval(&x),
                    max_constraint: p.max_constraint(&x),
                    point: x,
                    status: GpStatus::Infeasible,
                    kkt_residual: f64::INFINITY,
                    newton_steps: steps,
                });
            }
        }
    }

    let bar = Barrier {
        c: &c,
        phase1: false,
        lo: lo.clone(),
        hi: hi.clone(),
    };
    let m = bar.num_barriers() as f64;
    let mut t = 1.0;
    let mut status = GpStatus::MaxIter;
    loop {
        match center(&bar, &mut y, t, tol, &mut steps, None) {
            Centering::Converged | Centering::EarlyStop => {}
            Centering::MaxIter | Centering::Breakdown => break,
        }
        if m / t <= tol.kkt {
            status = GpStatus::Optimal;
            break;
        }
        t *= tol.growth;
    }

    let (g, _) = bar.grad_hess(&y, t);
    let obj_scale = c.obj.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let stationarity = (g.amax() / t).min(refit_residual(&c, &lo, &hi, &y, t)) / obj_scale;
    let kkt_residual = stationarity.max(m / t);
    if status == GpStatus::Optimal && stationarity > tol.kkt {
        status = GpStatus::MaxIter;
    }
    if status == GpStatus::Optimal
        && p
            .upper_bounds()
            .iter()
            .zip(&y)
            .any(|(u, v)| u.is_none() && *v > tol.log_cap - 1.0)
    {
        status = GpStatus::Unbounded;
    }
    let x: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    Ok(GPSolution {
        objective_value: p.objective().eval(&x),
        max_constraint: p.max_constraint(&x),
        point: x,
        status,
        kkt_residual,
        newton_steps: steps,
    })
}
