//! Geometric-program formulations of the max-min SINR problem.
//!
//! One builder covers both pilot structures. Every user owns a pilot
//! variable for each basis in its support and, when data powers are
//! optimized, a data-power variable. The own pilot energy `S_u` in the SINR
//! numerator is replaced by its weighted AM-GM monomial bound; with a single
//! basis per user (the assignment structure) the bound is exact, so the same
//! code yields the exact assignment GP.

use crate::error::{Error, Result};
use crate::gp::{GPProblem, Monomial, Posynomial};
use crate::network::NetworkRealization;
use crate::pilots::{PilotAllocation, UserId, SUPPORT_FLOOR};
use crate::se::{trace_product_exponential, ChannelModel, CorrelationModel};

use super::{OptConfig, PowerMode};

/// A built problem together with the map from model quantities to GP
/// variables.
#[derive(Debug, Clone)]
pub struct Formulation {
    pub gp: GPProblem,
    /// Index of the max-min SINR variable.
    pub xi: usize,
    /// `pilot[u][b]` is the variable of user `u` on basis `b`, if in support.
    pub pilot: Vec<Vec<Option<usize>>>,
    /// Data-power variables; `None` when data powers are fixed.
    pub data: Vec<Option<usize>>,
    /// Data power used for users without a variable.
    pub fixed_data: f64,
    /// AM-GM weights used for each user's pilot energy.
    pub weights: Vec<Vec<f64>>,
    num_cells: usize,
    users_per_cell: usize,
    pilot_len: usize,
}

impl Formulation {
    /// GP point for a given allocation, data powers and SINR level.
    pub fn point(&self, alloc: &PilotAllocation, data_p: &[f64], xi: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.gp.num_vars()];
        x[self.xi] = xi;
        for (i, row) in self.pilot.iter().enumerate() {
            let u = UserId::from_index(i, self.users_per_cell);
            for (b, var) in row.iter().enumerate() {
                if let Some(j) = var {
                    x[*j] = alloc.get(u, b);
                }
            }
        }
        for (i, var) in self.data.iter().enumerate() {
            if let Some(j) = var {
                x[*j] = data_p[i];
            }
        }
        x
    }

    /// Allocation and data powers encoded in a GP point.
    pub fn extract(&self, x: &[f64]) -> (PilotAllocation, Vec<f64>) {
        let alloc = PilotAllocation::from_fn(
            self.num_cells,
            self.users_per_cell,
            self.pilot_len,
            |u, b| self.pilot[u.index(self.users_per_cell)][b].map_or(0.0, |j| x[j]),
        );
        let data = self
            .data
            .iter()
            .map(|v| v.map_or(self.fixed_data, |j| x[j]))
            .collect();
        (alloc, data)
    }

    /// Number of users.
    pub fn num_users(&self) -> usize {
        self.pilot.len()
    }
}

type Terms = Vec<Monomial>;

fn product(a: &[Monomial], b: &[Monomial]) -> Terms {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x.mul(y)))
        .collect()
}

fn scaled(a: &[Monomial], c: f64) -> Terms {
    if c == 0.0 {
        return Vec::new();
    }
    a.iter().map(|m| m.scale(c)).collect()
}

struct Builder<'a> {
    net: &'a NetworkRealization,
    pilot: &'a [Vec<Option<usize>>],
    data: &'a [Option<usize>],
    fixed_data: f64,
    k: usize,
}

impl Builder<'_> {
    fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.net.users()
    }

    fn pv(&self, u: UserId, b: usize) -> Option<usize> {
        self.pilot[u.index(self.k)][b]
    }

    fn bases(&self) -> usize {
        self.pilot[0].len()
    }

    /// Squared pilot inner product `c_vu^2`.
    fn c2(&self, v: UserId, u: UserId) -> Terms {
        let common: Vec<(usize, usize)> = (0..self.bases())
            .filter_map(|b| Some((self.pv(v, b)?, self.pv(u, b)?)))
            .collect();
        let mut out = Vec::with_capacity(common.len() * common.len());
        for &(vb, ub) in &common {
            for &(vb2, ub2) in &common {
                out.push(Monomial::new(
                    1.0,
                    [(vb, 0.5), (ub, 0.5), (vb2, 0.5), (ub2, 0.5)],
                ));
            }
        }
        out
    }

    /// `sum_b p_v^b p_u^b`.
    fn cross(&self, v: UserId, u: UserId) -> Terms {
        (0..self.bases())
            .filter_map(|b| Some(Monomial::new(1.0, [(self.pv(v, b)?, 1.0), (self.pv(u, b)?, 1.0)])))
            .collect()
    }

    /// Pilot energy `S_u`.
    fn energy(&self, u: UserId) -> Terms {
        (0..self.bases())
            .filter_map(|b| Some(Monomial::var(self.pv(u, b)?)))
            .collect()
    }

    fn data_mono(&self, v: UserId) -> Monomial {
        match self.data[v.index(self.k)] {
            Some(j) => Monomial::var(j),
            None => Monomial::constant(self.fixed_data),
        }
    }

    /// `sum_v beta_v p_v + sigma^2` at base station `bs`.
    fn received(&self, bs: usize) -> Terms {
        let mut out: Terms = self
            .users()
            .map(|v| self.data_mono(v).scale(self.net.beta.get(bs, v)))
            .collect();
        out.push(Monomial::constant(self.net.config.noise_power_mw));
        out
    }

    /// `sum_v beta_v kappa_vu + sigma^2 S_u`, with `kappa = c^2` when
    /// `eps == 0`.
    fn pilot_den(&self, u: UserId, eps: f64) -> Terms {
        let e2 = eps * eps;
        let bs = u.cell;
        let mut out = Terms::new();
        for v in self.users() {
            let b = self.net.beta.get(bs, v);
            out.extend(scaled(&self.c2(v, u), b * (1.0 - e2)));
            out.extend(scaled(&self.cross(v, u), b * e2));
        }
        out.extend(scaled(&self.energy(u), self.net.config.noise_power_mw));
        out
    }

    /// Coherent interference `M sum_(v != u) kappa_vu p_v beta_v^2`.
    fn coherent(&self, u: UserId, eps: f64) -> Terms {
        let e2 = eps * eps;
        let m = self.net.config.bs_antennas as f64;
        let bs = u.cell;
        let mut out = Terms::new();
        for v in self.users().filter(|&v| v != u) {
            let b = self.net.beta.get(bs, v);
            let pd = [self.data_mono(v)];
            out.extend(scaled(&product(&self.c2(v, u), &pd), m * b * b * (1.0 - e2)));
            out.extend(scaled(&product(&self.cross(v, u), &pd), m * b * b * e2));
        }
        out
    }

    /// SINR denominator for the selected model.
    fn denominator(&self, u: UserId, model: ChannelModel, corr: Option<&CorrelationModel>) -> Terms {
        let bs = u.cell;
        let cfg = &self.net.config;
        let m = cfg.bs_antennas as f64;
        let noise = cfg.noise_power_mw;
        match model {
            ChannelModel::Ideal => {
                let mut out = product(&self.pilot_den(u, 0.0), &self.received(bs));
                out.extend(self.coherent(u, 0.0));
                out
            }
            ChannelModel::Hardware { epsilon } => {
                let e2 = epsilon * epsilon;
                let b = self.net.beta.home(u);
                let pu = [self.data_mono(u)];
                let mut out = product(&self.pilot_den(u, epsilon), &self.received(bs));
                out.extend(self.coherent(u, epsilon));
                let sq: Terms = (0..self.bases())
                    .filter_map(|bb| Some(Monomial::new(1.0, [(self.pv(u, bb)?, 2.0)])))
                    .collect();
                out.extend(scaled(&product(&sq, &pu), m * e2 * b * b));
                let s = self.energy(u);
                out.extend(scaled(&product(&product(&s, &s), &pu), m * e2 * (1.0 - e2) * b * b));
                out
            }
            ChannelModel::Correlated { .. } => {
                let corr = corr.expect("correlation model");
                let mut out = Terms::new();
                let c2: Vec<(UserId, Terms)> = self
                    .users()
                    .map(|w| (w, self.c2(w, u)))
                    .filter(|(_, t)| !t.is_empty())
                    .collect();
                for v in self.users() {
                    let (bv, rv) = (self.net.beta.get(bs, v), corr.r(bs, v));
                    let pd = [self.data_mono(v)];
                    for (w, t) in &c2 {
                        let tr = trace_product_exponential(
                            bv,
                            rv,
                            self.net.beta.get(bs, *w),
                            corr.r(bs, *w),
                            cfg.bs_antennas,
                        );
                        out.extend(scaled(&product(t, &pd), tr / m));
                    }
                }
                let mut rx = self.received(bs);
                rx.pop();
                out.extend(scaled(&product(&self.energy(u), &rx), noise));
                out.extend(scaled(&self.pilot_den(u, 0.0), noise));
                out.extend(self.coherent(u, 0.0));
                out
            }
        }
    }

    /// Monomial lower bound of the SINR numerator.
    fn numerator(&self, u: UserId, weights: &[f64], model: ChannelModel) -> Monomial {
        let m = self.net.config.bs_antennas as f64;
        let b = self.net.beta.home(u);
        let gain = match model {
            ChannelModel::Hardware { epsilon } => {
                let e2 = epsilon * epsilon;
                (1.0 - e2) * (1.0 - e2)
            }
            _ => 1.0,
        };
        let mut log_coef = (m * gain * b * b).ln();
        let mut exps = Vec::new();
        for (bb, &a) in weights.iter().enumerate() {
            if a > 0.0 {
                let j = self.pv(u, bb).expect("weight on a basis outside the support");
                log_coef -= 2.0 * a * a.ln();
                exps.push((j, 2.0 * a));
            }
        }
        Monomial::new(log_coef.exp(), exps).mul(&self.data_mono(u))
    }
}

/// Builds the max-min problem for the given per-user supports and AM-GM
/// weights (one weight per support entry, summing to one).
pub fn build(
    net: &NetworkRealization,
    supports: &[Vec<usize>],
    weights: &[Vec<f64>],
    cfg: &OptConfig,
) -> Result<Formulation> {
    cfg.validate()?;
    let netc = &net.config;
    let k = netc.users_per_cell;
    let n = netc.num_users();
    let tau = netc.pilot_len;
    if supports.len() != n || weights.len() != n {
        return Err(Error::InvalidArgument("one support and weight vector per user".into()));
    }
    if let ChannelModel::Hardware { epsilon } = cfg.objective_mode {
        if epsilon >= 1.0 {
            return Err(Error::InvalidArgument(
                "no positive SINR is reachable at impairment level 1".into(),
            ));
        }
    }

    let mut gp = GPProblem::new();
    let xi = gp.add_var("xi");
    let mut pilot = vec![vec![None; tau]; n];
    let mut full_weights = vec![vec![0.0; tau]; n];
    for (i, (sup, w)) in supports.iter().zip(weights).enumerate() {
        let u = UserId::from_index(i, k);
        if sup.is_empty() || sup.len() != w.len() {
            return Err(Error::InvalidArgument(format!(
                "user {u} needs a nonempty support with matching weights"
            )));
        }
        let total: f64 = w.iter().sum();
        if w.iter().any(|&a| !(a >= 0.0)) || (total - 1.0).abs() > crate::se::SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!("weights of user {u} are off the simplex")));
        }
        for (&b, &a) in sup.iter().zip(w) {
            if b >= tau || pilot[i][b].is_some() {
                return Err(Error::InvalidArgument(format!("bad support for user {u}")));
            }
            pilot[i][b] = Some(gp.add_var(format!("pilot[{},{}][{b}]", u.cell, u.user)));
            full_weights[i][b] = a;
        }
    }
    let data: Vec<Option<usize>> = (0..n)
        .map(|i| match cfg.power_mode {
            PowerMode::JointPilotData => {
                let u = UserId::from_index(i, k);
                Some(gp.add_var(format!("data[{},{}]", u.cell, u.user)))
            }
            PowerMode::PilotOnlyFullData => None,
        })
        .collect();

    let corr = match cfg.objective_mode {
        ChannelModel::Correlated { rho } => Some(CorrelationModel::from_realization(net, rho)?),
        _ => None,
    };
    let builder = Builder {
        net,
        pilot: &pilot,
        data: &data,
        fixed_data: netc.max_data_power_mw,
        k,
    };

    gp.set_objective(Monomial::var(xi).recip());
    for u in net.users() {
        let i = u.index(k);
        let num = builder.numerator(u, &full_weights[i], cfg.objective_mode);
        let scale = Monomial::var(xi).mul(&num.recip());
        let den = builder.denominator(u, cfg.objective_mode, corr.as_ref());
        gp.add_constraint(Posynomial::new(den.iter().map(|t| t.mul(&scale)))?);
    }
    let budget = tau as f64 * netc.max_pilot_power_mw;
    for (i, row) in pilot.iter().enumerate() {
        let vars: Vec<usize> = row.iter().flatten().copied().collect();
        if let [j] = vars[..] {
            gp.add_upper_bound(j, budget)?;
        } else {
            gp.add_constraint(Posynomial::new(
                vars.iter().map(|&j| Monomial::new(1.0 / budget, [(j, 1.0)])),
            )?);
        }
        if let Some(j) = data[i] {
            gp.add_upper_bound(j, netc.max_data_power_mw)?;
        }
    }

    Ok(Formulation {
        gp,
        xi,
        pilot,
        data,
        fixed_data: netc.max_data_power_mw,
        weights: full_weights,
        num_cells: netc.num_cells,
        users_per_cell: k,
        pilot_len: tau,
    })
}

/// Assignment GP: user `u` only uses basis `indices[u]`.
pub fn build_maxmin_gp_assignment(
    net: &NetworkRealization,
    indices: &[Vec<usize>],
    cfg: &OptConfig,
) -> Result<Formulation> {
    let c = &net.config;
    if c.pilot_len != c.users_per_cell {
        return Err(Error::UnsupportedStructure {
            pilot_len: c.pilot_len,
            users_per_cell: c.users_per_cell,
        });
    }
    let supports: Vec<Vec<usize>> = indices.iter().flatten().map(|&b| vec![b]).collect();
    let weights = vec![vec![1.0]; supports.len()];
    build(net, &supports, &weights, cfg)
}

/// Successive-approximation GP around an expansion point. Pilot entries are
/// floored at a tiny fraction of the budget so every weight is positive.
pub fn build_maxmin_gp_sca(
    net: &NetworkRealization,
    alloc: &PilotAllocation,
    data_p: &[f64],
    cfg: &OptConfig,
) -> Result<Formulation> {
    let c = &net.config;
    let floor = SUPPORT_FLOOR * c.max_pilot_power_mw;
    let tol = 1.0 + crate::pilots::POWER_CHECK_TOL;
    if alloc.num_cells() != c.num_cells
        || alloc.users_per_cell() != c.users_per_cell
        || alloc.pilot_len() != c.pilot_len
        || data_p.len() != c.num_users()
    {
        return Err(Error::InvalidArgument("expansion point shape mismatch".into()));
    }
    let over_pilot = !crate::pilots::check_power_constraint(alloc, c).iter().all(|&ok| ok);
    let over_data = data_p
        .iter()
        .any(|&p| !(p > 0.0) || p > c.max_data_power_mw * tol);
    if over_pilot || over_data {
        return Err(Error::InvalidArgument("expansion point violates the power limits".into()));
    }
    let supports: Vec<Vec<usize>> = (0..c.num_users()).map(|_| (0..c.pilot_len).collect()).collect();
    let weights: Vec<Vec<f64>> = alloc
        .users()
        .map(|u| {
            let v: Vec<f64> = alloc.user(u).iter().map(|p| p.max(floor)).collect();
            let s: f64 = v.iter().sum();
            v.iter().map(|p| p / s).collect()
        })
        .collect();
    build(net, &supports, &weights, cfg)
}
