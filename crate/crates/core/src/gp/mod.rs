//! Geometric programming.
//!
//! A geometric program minimizes a monomial subject to posynomial
//! constraints `f(x) <= 1` over strictly positive variables. With `x = e^y`
//! every monomial becomes affine in `y` and every posynomial a log-sum-exp,
//! so the problem is convex; [`solve`] runs a log-barrier interior-point
//! method on that form.

mod solver;

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use solver::{solve, solve_from, GpStatus, GpTolerances, GPSolution};

/// `c * prod_m x_m^a_m` with sparse exponents sorted by variable index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    coef: f64,
    exps: Vec<(usize, f64)>,
}

impl Monomial {
    /// Builds a monomial, merging repeated variables and dropping zero
    /// exponents. Panics if `coef` is not strictly positive and finite.
    pub fn new(coef: f64, exps: impl IntoIterator<Item = (usize, f64)>) -> Self {
        assert!(
            coef > 0.0 && coef.is_finite(),
            "monomial coefficient must be positive, got {coef}"
        );
        let mut v: Vec<(usize, f64)> = exps.into_iter().collect();
        v.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(v.len());
        for (i, a) in v {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => merged.push((i, a)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        Self { coef, exps: merged }
    }

    pub fn constant(coef: f64) -> Self {
        Self::new(coef, [])
    }

    /// `x_i`.
    pub fn var(i: usize) -> Self {
        Self::new(1.0, [(i, 1.0)])
    }

    pub fn coef(&self) -> f64 {
        self.coef
    }

    pub fn exps(&self) -> &[(usize, f64)] {
        &self.exps
    }

    pub fn exponent(&self, i: usize) -> f64 {
        self.exps
            .binary_search_by_key(&i, |e| e.0)
            .map_or(0.0, |j| self.exps[j].1)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial::new(
            self.coef * other.coef,
            self.exps.iter().chain(&other.exps).copied(),
        )
    }

    pub fn pow(&self, k: f64) -> Monomial {
        Monomial::new(
            self.coef.powf(k),
            self.exps.iter().map(|&(i, a)| (i, a * k)),
        )
    }

    pub fn scale(&self, c: f64) -> Monomial {
        Monomial::new(self.coef * c, self.exps.iter().copied())
    }

    pub fn recip(&self) -> Monomial {
        self.pow(-1.0)
    }

    /// Value at a strictly positive point (no checks).
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.log_eval_x(x).exp()
    }

    #[inline]
    fn log_eval_x(&self, x: &[f64]) -> f64 {
        self.coef.ln() + self.exps.iter().map(|&(i, a)| a * x[i].ln()).sum::<f64>()
    }

    /// `ln c + a . y`, the value of `ln(m(e^y))`.
    #[inline]
    pub fn log_eval(&self, y: &[f64]) -> f64 {
        self.coef.ln() + self.exps.iter().map(|&(i, a)| a * y[i]).sum::<f64>()
    }

    fn max_var(&self) -> Option<usize> {
        self.exps.last().map(|e| e.0)
    }
}

/// A nonempty sum of monomials. Terms with identical exponents are merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posynomial {
    terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new(terms: impl IntoIterator<Item = Monomial>) -> Result<Self> {
        let terms = merge_terms(terms);
        if terms.is_empty() {
            return Err(Error::InvalidArgument("empty posynomial".into()));
        }
        Ok(Self { terms })
    }

    pub fn from_monomial(m: Monomial) -> Self {
        Self { terms: vec![m] }
    }

    /// Adds a term, merging it into an existing one with equal exponents.
    pub fn push(&mut self, m: Monomial) {
        if let Some(t) = self.terms.iter_mut().find(|t| t.exps == m.exps) {
            t.coef += m.coef;
        } else {
            self.terms.push(m);
        }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Posynomial {
        Posynomial {
            terms: self.terms.iter().map(|t| t.mul(m)).collect(),
        }
    }

    /// Product of two posynomials, merged.
    pub fn mul(&self, other: &Posynomial) -> Posynomial {
        Posynomial {
            terms: merge_terms(
                self.terms
                    .iter()
                    .flat_map(|a| other.terms.iter().map(move |b| a.mul(b))),
            ),
        }
    }

    pub fn add(&self, other: &Posynomial) -> Posynomial {
        Posynomial {
            terms: merge_terms(self.terms.iter().chain(&other.terms).cloned()),
        }
    }

    /// Value at a strictly positive point (no checks).
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// `ln(p(e^y))` as a numerically stable log-sum-exp.
    pub fn log_eval(&self, y: &[f64]) -> f64 {
        log_sum_exp(self.terms.iter().map(|t| t.log_eval(y)))
    }

    fn max_var(&self) -> Option<usize> {
        self.terms.iter().filter_map(Monomial::max_var).max()
    }
}

/// Sums terms with bit-identical exponents, keeping first-occurrence order.
fn merge_terms(terms: impl IntoIterator<Item = Monomial>) -> Vec<Monomial> {
    let mut out: Vec<Monomial> = Vec::new();
    let mut index: HashMap<Vec<(usize, u64)>, usize> = HashMap::new();
    for t in terms {
        let key: Vec<(usize, u64)> = t.exps.iter().map(|&(i, a)| (i, a.to_bits())).collect();
        match index.get(&key) {
            Some(&j) => out[j].coef += t.coef,
            None => {
                index.insert(key, out.len());
                out.push(t);
            }
        }
    }
    out
}

pub(crate) fn log_sum_exp<I: Iterator<Item = f64> + Clone>(it: I) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|z| (z - m).exp()).sum::<f64>().ln()
}

fn check_point(x: &[f64]) -> Result<()> {
    if let Some(v) = x.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "posynomials are evaluated at positive points, got {v}"
        )));
    }
    Ok(())
}

/// Value of a posynomial at a strictly positive point.
pub fn evaluate(p: &Posynomial, point: &[f64]) -> Result<f64> {
    check_point(point)?;
    if p.max_var().is_some_and(|i| i >= point.len()) {
        return Err(Error::InvalidArgument("point has too few coordinates".into()));
    }
    Ok(p.eval(point))
}

/// Best monomial lower bound of `p` at `x0`: with `u_j` the terms and
/// `alpha_j = u_j(x0) / p(x0)`, returns `prod_j (u_j / alpha_j)^alpha_j`
/// together with the weights. The bound is tight at `x0` by construction.
pub fn amgm_monomial_bound(p: &Posynomial, x0: &[f64]) -> Result<(Monomial, Vec<f64>)> {
    check_point(x0)?;
    let logs: Vec<f64> = p.terms.iter().map(|t| t.log_eval_x(x0)).collect();
    let total = log_sum_exp(logs.iter().copied());
    let alpha: Vec<f64> = logs.iter().map(|l| (l - total).exp()).collect();
    let mut log_coef = 0.0;
    let mut exps = Vec::new();
    for ((t, &a), &l) in p.terms.iter().zip(&alpha).zip(&logs) {
        if a == 0.0 {
            continue;
        }
        // ln(c/alpha) = ln c - (l - total)
        log_coef += a * (t.coef.ln() - (l - total));
        exps.extend(t.exps.iter().map(|&(i, e)| (i, a * e)));
    }
    Ok((Monomial::new(log_coef.exp(), exps), alpha))
}

/// A geometric program in standard form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GPProblem {
    names: Vec<String>,
    upper: Vec<Option<f64>>,
    objective: Monomial,
    constraints: Vec<Posynomial>,
}

impl GPProblem {
    /// An empty problem minimizing the constant 1.
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            upper: Vec::new(),
            objective: Monomial::constant(1.0),
            constraints: Vec::new(),
        }
    }

    /// Adds a variable and returns its index.
    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.upper.push(None);
        self.names.len() - 1
    }

    /// Adds `x_i <= max` as the single-term constraint `x_i / max <= 1`.
    pub fn add_upper_bound(&mut self, i: usize, max: f64) -> Result<()> {
        if !(max > 0.0) || !max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "upper bound of {} must be positive, got {max}",
                self.names[i]
            )));
        }
        self.upper[i] = Some(self.upper[i].map_or(max, |u: f64| u.min(max)));
        self.constraints
            .push(Posynomial::from_monomial(Monomial::new(1.0 / max, [(i, 1.0)])));
        Ok(())
    }

    pub fn set_objective(&mut self, m: Monomial) {
        self.objective = m;
    }

    /// Adds `p <= 1`.
    pub fn add_constraint(&mut self, p: Posynomial) {
        self.constraints.push(p);
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn upper_bounds(&self) -> &[Option<f64>] {
        &self.upper
    }

    pub fn objective(&self) -> &Monomial {
        &self.objective
    }

    pub fn constraints(&self) -> &[Posynomial] {
        &self.constraints
    }

    /// Largest constraint value at a strictly positive point.
    pub fn max_constraint(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.eval(x))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if n == 0 {
            return Err(Error::InvalidArgument("problem has no variables".into()));
        }
        let mut used = vec![false; n];
        let mut mark = |m: &Monomial| -> Result<()> {
            for &(i, _) in &m.exps {
                if i >= n {
                    return Err(Error::InvalidArgument(format!(
                        "term references variable {i}, problem has {n}"
                    )));
                }
                used[i] = true;
            }
            Ok(())
        };
        mark(&self.objective)?;
        for c in &self.constraints {
            for t in &c.terms {
                mark(t)?;
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::InvalidArgument(format!(
                "variable {} is not referenced",
                self.names[i]
            )));
        }
        Ok(())
    }

    /// Plain-text dump: a header line per block, then one monomial per line
    /// as the coefficient followed by the dense exponent list.
    pub fn dump(&self) -> String {
        let n = self.num_vars();
        let mut out = String::new();
        let line = |out: &mut String, m: &Monomial| {
            let mut dense = vec![0.0; n];
            for &(i, a) in &m.exps {
                dense[i] = a;
            }
            let _ = write!(out, "{:.16e}", m.coef);
            for a in dense {
                let _ = write!(out, " {a}");
            }
            out.push('\n');
        };
        let _ = writeln!(out, "variables {}", self.names.join(" "));
        out.push_str("objective\n");
        line(&mut out, &self.objective);
        for (k, c) in self.constraints.iter().enumerate() {
            let _ = writeln!(out, "constraint {k}");
            for t in &c.terms {
                line(&mut out, t);
            }
        }
        out
    }
}

impl Default for GPProblem {
    fn default() -> Self {
        Self::new()
    }
}
