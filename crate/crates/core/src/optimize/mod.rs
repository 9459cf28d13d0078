//! Max-min fairness optimization.
//!
//! * [`solve_exhaustive`]: global optimum over the assignment structure by
//!   solving one geometric program per entry of the assignment dictionary.
//! * [`solve_sca`]: local optimum over the general pilot structure by
//!   successive approximation. Each iteration replaces the own pilot energy
//!   in every SINR numerator by its AM-GM monomial bound at the current point
//!   and solves the resulting geometric program.
//! * [`baseline_random`] and [`baseline_smart`]: fixed-power pilot
//!   assignments used for comparison.

mod formulation;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{solve_from, GpStatus, GpTolerances, GPSolution};
use crate::network::NetworkRealization;
use crate::par;
use crate::pilots::{
    enumerate_assignments, from_assignment, permutation_from_rank, PilotAllocation, PilotAssignment, UserId,
};
use crate::se::{self, ChannelModel, SinrReport};

pub use formulation::{build, build_maxmin_gp_assignment, build_maxmin_gp_sca, Formulation};

/// Which powers are optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// Pilot and data powers are both variables.
    #[default]
    JointPilotData,
    /// Data powers stay at their maximum.
    PilotOnlyFullData,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptConfig {
    pub objective_mode: ChannelModel,
    pub power_mode: PowerMode,
    pub sca_max_iters: usize,
    /// Stop once the relative change of the max-min SINR drops below this.
    pub sca_rel_tol: f64,
    pub init_seed: u64,
    pub enumeration_cap: u64,
    pub gp: GpTolerances,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            objective_mode: ChannelModel::Ideal,
            power_mode: PowerMode::JointPilotData,
            sca_max_iters: 15,
            sca_rel_tol: 1e-4,
            init_seed: 0,
            enumeration_cap: 100_000,
            gp: GpTolerances::default(),
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        self.objective_mode.validate()?;
        if self.sca_max_iters == 0 {
            return Err(Error::InvalidConfig("sca_max_iters must be at least 1".into()));
        }
        if !(self.sca_rel_tol >= 0.0) {
            return Err(Error::InvalidConfig("sca_rel_tol must be nonnegative".into()));
        }
        if self.enumeration_cap == 0 {
            return Err(Error::InvalidConfig("enumeration_cap must be positive".into()));
        }
        Ok(())
    }

    pub fn with_mode(mut self, mode: ChannelModel) -> Self {
        self.objective_mode = mode;
        self
    }

    pub fn with_power_mode(mut self, mode: PowerMode) -> Self {
        self.power_mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init_seed = seed;
        self
    }
}

/// Outcome of an optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    /// Minimum exact SINR over users at the returned powers.
    pub xi: f64,
    /// Spectral efficiency of the worst user, bit/s/Hz.
    pub min_se: f64,
    pub pilot_alloc: PilotAllocation,
    /// Row-major data powers, mW.
    pub data_p: Vec<f64>,
    /// SCA: the max-min level of each iteration's geometric program.
    /// Exhaustive: the exact max-min SINR of each assignment (NaN when its
    /// solve failed).
    pub trace: Vec<f64>,
    /// SCA: exact max-min SINR after each iteration. Empty for exhaustive.
    pub exact_trace: Vec<f64>,
    pub assignment: Option<PilotAssignment>,
    pub solver_statuses: Vec<GpStatus>,
    /// Wall-clock seconds per geometric program.
    pub solve_seconds: Vec<f64>,
}

/// A fixed-power pilot assignment and its SINR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub assignment: PilotAssignment,
    pub data_p: Vec<f64>,
    pub report: SinrReport,
    /// Set when the assignment rule is a stand-in for a published heuristic.
    pub approximate: bool,
}

/// Exact max-min SINR of an allocation under the configured model.
pub fn exact_min_sinr(
    net: &NetworkRealization,
    alloc: &PilotAllocation,
    data_p: &[f64],
    model: ChannelModel,
) -> Result<f64> {
    Ok(se::evaluate(net, alloc, data_p, model)?.min_sinr())
}

/// Start point strictly inside the power limits with SINR slack.
fn interior_start(
    f: &Formulation,
    net: &NetworkRealization,
    alloc: &PilotAllocation,
    data_p: &[f64],
    model: ChannelModel,
) -> Result<Vec<f64>> {
    let shrink = 1.0 - 1e-6;
    let alloc = alloc.scaled(shrink);
    let data: Vec<f64> = data_p.iter().map(|p| p * shrink).collect();
    let floor = crate::pilots::SUPPORT_FLOOR * net.config.max_pilot_power_mw;
    let alloc = PilotAllocation::from_fn(alloc.num_cells(), alloc.users_per_cell(), alloc.pilot_len(), |u, b| {
        let v = alloc.get(u, b);
        if f.pilot[u.index(alloc.users_per_cell())][b].is_some() {
            v.max(floor)
        } else {
            v
        }
    });
    let xi = exact_min_sinr(net, &alloc, &data, model)?;
    let xi = if xi > 0.0 { 0.9 * xi } else { 1e-12 };
    Ok(f.point(&alloc, &data, xi))
}

fn usable(sol: &GPSolution, tol: &GpTolerances) -> bool {
    matches!(sol.status, GpStatus::Optimal | GpStatus::MaxIter)
        && sol.max_constraint <= 1.0 + tol.feasibility
        && sol.point.iter().all(|x| x.is_finite() && *x > 0.0)
}

struct AssignmentSolve {
    xi: f64,
    alloc: PilotAllocation,
    data: Vec<f64>,
    status: GpStatus,
    seconds: f64,
}

fn solve_assignment(
    net: &NetworkRealization,
    indices: Vec<Vec<usize>>,
    cfg: &OptConfig,
) -> Result<AssignmentSolve> {
    let c = &net.config;
    let clock = Instant::now();
    let f = build_maxmin_gp_assignment(net, &indices, cfg)?;
    let mid = PilotAssignment::with_equal_power(indices, 0.5 * c.pilot_len as f64 * c.max_pilot_power_mw)?;
    let alloc0 = from_assignment(&mid, c.pilot_len)?;
    let data0 = vec![
        match cfg.power_mode {
            PowerMode::JointPilotData => 0.5 * c.max_data_power_mw,
            PowerMode::PilotOnlyFullData => c.max_data_power_mw,
        };
        c.num_users()
    ];
    let x0 = interior_start(&f, net, &alloc0, &data0, cfg.objective_mode)?;
    let sol = solve_from(&f.gp, &x0, &cfg.gp)?;
    let seconds = clock.elapsed().as_secs_f64();
    if !usable(&sol, &cfg.gp) {
        return Ok(AssignmentSolve {
            xi: f64::NAN,
            alloc: alloc0,
            data: data0,
            status: sol.status,
            seconds,
        });
    }
    let (alloc, data) = f.extract(&sol.point);
    let xi = exact_min_sinr(net, &alloc, &data, cfg.objective_mode)?;
    Ok(AssignmentSolve {
        xi,
        alloc,
        data,
        status: sol.status,
        seconds,
    })
}

fn min_se(net: &NetworkRealization, xi: f64) -> f64 {
    se::se_from_sinr(xi, net.config.pilot_len, net.config.coherence_len)
}

/// Global max-min optimum over the assignment structure.
///
/// Every dictionary entry is solved independently (in parallel when the
/// `parallel` feature is on). The best entry is chosen by index-ordered
/// argmax; an entry replaces the incumbent only if it is better by more than
/// `1e-9` relative, so the first of tied entries wins. Failed solves are
/// recorded and skipped.
pub fn solve_exhaustive(net: &NetworkRealization, cfg: &OptConfig) -> Result<OptResult> {
    cfg.validate()?;
    let c = &net.config;
    if c.pilot_len != c.users_per_cell {
        return Err(Error::UnsupportedStructure {
            pilot_len: c.pilot_len,
            users_per_cell: c.users_per_cell,
        });
    }
    let dict = enumerate_assignments(c.num_cells, c.users_per_cell, cfg.enumeration_cap as u128)?;
    let solves = par::map_indexed(dict.len() as usize, |i| {
        solve_assignment(net, dict.get(i as u128), cfg)
    });
    let solves: Vec<AssignmentSolve> = solves.into_iter().collect::<Result<_>>()?;

    let mut best: Option<usize> = None;
    for (i, s) in solves.iter().enumerate() {
        if !s.xi.is_finite() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) if s.xi > solves[b].xi * (1.0 + 1e-9) => best = Some(i),
            _ => {}
        }
    }
    let trace: Vec<f64> = solves.iter().map(|s| s.xi).collect();
    let statuses: Vec<GpStatus> = solves.iter().map(|s| s.status).collect();
    let seconds: Vec<f64> = solves.iter().map(|s| s.seconds).collect();
    let Some(b) = best else {
        return Err(Error::Solver(format!(
            "all {} assignment problems failed: {statuses:?}",
            solves.len()
        )));
    };
    let indices = dict.get(b as u128);
    let s = &solves[b];
    let powers: Vec<f64> = net
        .users()
        .map(|u| s.alloc.get(u, indices[u.cell][u.user]))
        .collect();
    Ok(OptResult {
        xi: s.xi,
        min_se: min_se(net, s.xi),
        pilot_alloc: s.alloc.clone(),
        data_p: s.data.clone(),
        trace,
        exact_trace: Vec::new(),
        assignment: Some(PilotAssignment::new(indices, powers)?),
        solver_statuses: statuses,
        solve_seconds: seconds,
    })
}

/// Random initial pilot powers, uniform on `[1e-6 P_max, P_max]` per basis.
pub fn initial_allocation(net: &NetworkRealization, seed: u64) -> PilotAllocation {
    let c = &net.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (1e-6 * c.max_pilot_power_mw, c.max_pilot_power_mw);
    PilotAllocation::from_fn(c.num_cells, c.users_per_cell, c.pilot_len, |_, _| {
        rng.random_range(lo..=hi)
    })
}

/// Local max-min optimum over the general pilot structure by successive
/// approximation, starting from [`initial_allocation`] and full data power.
pub fn solve_sca(net: &NetworkRealization, cfg: &OptConfig) -> Result<OptResult> {
    let alloc = initial_allocation(net, cfg.init_seed);
    let data = vec![net.config.max_data_power_mw; net.config.num_users()];
    solve_sca_from(net, alloc, data, cfg)
}

/// Successive approximation from a given feasible point.
pub fn solve_sca_from(
    net: &NetworkRealization,
    mut alloc: PilotAllocation,
    mut data: Vec<f64>,
    cfg: &OptConfig,
) -> Result<OptResult> {
    cfg.validate()?;
    let model = cfg.objective_mode;
    let mut trace = Vec::new();
    let mut exact_trace = Vec::new();
    let mut statuses = Vec::new();
    let mut seconds = Vec::new();
    let mut prev: Option<f64> = None;

    for _ in 0..cfg.sca_max_iters {
        let clock = Instant::now();
        let f = build_maxmin_gp_sca(net, &alloc, &data, cfg)?;
        let x0 = interior_start(&f, net, &alloc, &data, model)?;
        let sol = solve_from(&f.gp, &x0, &cfg.gp)?;
        seconds.push(clock.elapsed().as_secs_f64());
        statuses.push(sol.status);
        if !usable(&sol, &cfg.gp) {
            break;
        }
        let gp_xi = sol.point[f.xi];
        let (a, d) = f.extract(&sol.point);
        alloc = a;
        data = d;
        trace.push(gp_xi);
        exact_trace.push(exact_min_sinr(net, &alloc, &data, model)?);
        if let Some(p) = prev {
            if (gp_xi - p).abs() <= cfg.sca_rel_tol * p.abs() {
                break;
            }
        }
        prev = Some(gp_xi);
    }
    if trace.is_empty() {
        return Err(Error::Solver(format!(
            "successive approximation made no feasible step: {statuses:?}"
        )));
    }
    let xi = exact_min_sinr(net, &alloc, &data, model)?;
    Ok(OptResult {
        xi,
        min_se: min_se(net, xi),
        pilot_alloc: alloc,
        data_p: data,
        trace,
        exact_trace,
        assignment: None,
        solver_statuses: statuses,
        solve_seconds: seconds,
    })
}

fn full_power_outcome(
    net: &NetworkRealization,
    indices: Vec<Vec<usize>>,
    model: ChannelModel,
    approximate: bool,
) -> Result<BaselineOutcome> {
    let c = &net.config;
    let a = PilotAssignment::with_equal_power(indices, c.pilot_len as f64 * c.max_pilot_power_mw)?;
    let data_p = vec![c.max_data_power_mw; c.num_users()];
    let report = se::evaluate_assignment(net, &a, &data_p, model)?;
    Ok(BaselineOutcome {
        assignment: a,
        data_p,
        report,
        approximate,
    })
}

fn require_square(net: &NetworkRealization) -> Result<()> {
    let c = &net.config;
    if c.pilot_len != c.users_per_cell {
        return Err(Error::UnsupportedStructure {
            pilot_len: c.pilot_len,
            users_per_cell: c.users_per_cell,
        });
    }
    Ok(())
}

/// Independent uniformly random permutation in every cell, full powers.
pub fn baseline_random(net: &NetworkRealization, cfg: &OptConfig, seed: u64) -> Result<BaselineOutcome> {
    require_square(net)?;
    let c = &net.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = (0..c.num_cells)
        .map(|_| {
            let mut p: Vec<usize> = (0..c.users_per_cell).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    full_power_outcome(net, indices, cfg.objective_mode, false)
}

/// Largest cell size for which the smart baseline scans every permutation.
const SMART_EXACT_MAX_K: usize = 8;

/// Interference-aware assignment, full powers.
///
/// Cells are visited in order. Each cell takes the permutation minimizing the
/// summed mutual contamination between each of its users `u` and the earlier
/// users `v` holding the same pilot, where the cost of a pair is
/// `(beta_(v at cell u) / beta_(u home))^2 + (beta_(u at cell v) / beta_(v home))^2`.
/// Up to eight users per cell every permutation is scanned (first minimum
/// wins); above that users pick greedily, weakest home gain first. This is a
/// stand-in for published interference-graph heuristics, so the outcome is
/// flagged as approximate.
pub fn baseline_smart(net: &NetworkRealization, cfg: &OptConfig) -> Result<BaselineOutcome> {
    require_square(net)?;
    let c = &net.config;
    let k = c.users_per_cell;
    let mut holders: Vec<Vec<UserId>> = vec![Vec::new(); k];
    let mut indices = vec![vec![0; k]; c.num_cells];
    for l in 0..c.num_cells {
        let cost: Vec<Vec<f64>> = (0..k)
            .map(|t| {
                let u = UserId::new(l, t);
                (0..k)
                    .map(|pilot| {
                        holders[pilot]
                            .iter()
                            .map(|&v| {
                                (net.beta.get(u.cell, v) / net.beta.home(u)).powi(2)
                                    + (net.beta.get(v.cell, u) / net.beta.home(v)).powi(2)
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let perm = if k <= SMART_EXACT_MAX_K {
            let total = |p: &[usize]| -> f64 { (0..k).map(|t| cost[t][p[t]]).sum() };
            let mut best = permutation_from_rank(0, k);
            let mut best_cost = total(&best);
            let count: u128 = (1..=k as u128).product();
            for rank in 1..count {
                let p = permutation_from_rank(rank, k);
                let v = total(&p);
                if v < best_cost {
                    best = p;
                    best_cost = v;
                }
            }
            best
        } else {
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| {
                net.beta
                    .home(UserId::new(l, a))
                    .total_cmp(&net.beta.home(UserId::new(l, b)))
            });
            let mut free: Vec<usize> = (0..k).collect();
            let mut p = vec![0; k];
            for t in order {
                let mut best = 0;
                for j in 1..free.len() {
                    if cost[t][free[j]] < cost[t][free[best]] {
                        best = j;
                    }
                }
                p[t] = free.remove(best);
            }
            p
        };
        for t in 0..k {
            holders[perm[t]].push(UserId::new(l, t));
        }
        indices[l] = perm;
    }
    full_power_outcome(net, indices, cfg.objective_mode, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_layout, GainTensor, NetworkConfig};

    fn toy(l: usize, k: usize, tau: usize, m: usize) -> NetworkRealization {
        let cfg = NetworkConfig {
            num_cells: l,
            users_per_cell: k,
            pilot_len: tau,
            bs_antennas: m,
            ..Default::default()
        };
        generate_layout(&cfg, 7).unwrap()
    }

    #[test]
    fn assignment_counts() {
        let net = toy(4, 2, 2, 100);
        let cfg = OptConfig::default();
        let f = build_maxmin_gp_assignment(&net, &vec![vec![0, 1]; 4], &cfg).unwrap();
        assert_eq!(f.gp.num_vars(), 2 * 8 + 1);
        assert_eq!(f.gp.num_constraints(), 3 * 8);
        let po = cfg.with_power_mode(PowerMode::PilotOnlyFullData);
        let f = build_maxmin_gp_assignment(&net, &vec![vec![0, 1]; 4], &po).unwrap();
        assert_eq!(f.gp.num_vars(), 8 + 1);
        assert_eq!(f.gp.num_constraints(), 2 * 8);
    }

    #[test]
    fn sca_counts() {
        let net = toy(2, 2, 3, 100);
        let cfg = OptConfig::default();
        let alloc = initial_allocation(&net, 1);
        let f = build_maxmin_gp_sca(&net, &alloc, &[200.0; 4], &cfg).unwrap();
        assert_eq!(f.gp.num_vars(), 4 * (3 + 1) + 1);
        assert_eq!(f.gp.num_constraints(), 3 * 4);
    }

    #[test]
    fn sca_constraint_tight_at_expansion_point() {
        for mode in [
            ChannelModel::Ideal,
            ChannelModel::Hardware { epsilon: 0.1 },
            ChannelModel::Correlated { rho: 0.5 },
        ] {
            let net = toy(2, 2, 2, 50);
            let cfg = OptConfig::default().with_mode(mode);
            let alloc = initial_allocation(&net, 3);
            let data = vec![150.0; 4];
            let f = build_maxmin_gp_sca(&net, &alloc, &data, &cfg).unwrap();
            let report = se::evaluate(&net, &alloc, &data, mode).unwrap();
            let x = f.point(&alloc, &data, 1.0);
            for u in net.users() {
                let lhs = f.gp.constraints()[u.index(2)].eval(&x);
                let exact = 1.0 / report.sinr_of(u).to_f64();
                assert!((lhs - exact).abs() <= 1e-10 * exact, "{mode:?} {lhs} {exact}");
            }
        }
    }

    #[test]
    fn single_user_goes_to_caps() {
        let net = toy(1, 1, 1, 64);
        let cfg = OptConfig::default();
        let r = solve_exhaustive(&net, &cfg).unwrap();
        assert_eq!(r.trace.len(), 1);
        let c = &net.config;
        let caps = PilotAssignment::with_equal_power(vec![vec![0]], c.max_pilot_power_mw).unwrap();
        let at_caps = se::sinr_assignment(
            &net.beta,
            &caps,
            &[c.max_data_power_mw],
            c.noise_power_mw,
            c.bs_antennas,
            UserId::new(0, 0),
        )
        .unwrap();
        assert!((r.xi - at_caps).abs() <= 1e-6 * at_caps);
        let s = solve_sca(&net, &cfg).unwrap();
        assert!(s.trace.len() <= 2);
        assert!((s.xi - at_caps).abs() <= 1e-6 * at_caps);
    }

    #[test]
    fn exhaustive_two_cells() {
        let net = toy(2, 2, 2, 100);
        let r = solve_exhaustive(&net, &OptConfig::default()).unwrap();
        assert_eq!(r.trace.len(), 2);
        let m = r.trace.iter().copied().fold(f64::MIN, f64::max);
        assert!((r.xi - m).abs() <= 1e-12 * m);
        // the recorded powers really give that SINR
        let a = r.assignment.unwrap();
        let rep = se::evaluate_assignment(&net, &a, &r.data_p, ChannelModel::Ideal).unwrap();
        assert!((rep.min_sinr() - r.xi).abs() <= 1e-9 * r.xi);
    }

    #[test]
    fn smart_splits_dominant_pair() {
        // users (0,0) and (1,0) leak strongly into each other's cell
        let mut cfg = NetworkConfig {
            num_cells: 2,
            users_per_cell: 2,
            pilot_len: 2,
            ..Default::default()
        };
        cfg.bs_antennas = 100;
        let mut net = generate_layout(&cfg, 1).unwrap();
        net.beta = GainTensor::from_fn(2, 2, |bs, u| {
            if bs == u.cell {
                if u.user == 0 { 1e-8 } else { 5e-8 }
            } else if u == UserId::new(1, 0) || u == UserId::new(0, 0) {
                1e-9
            } else {
                1e-12
            }
        });
        let s = baseline_smart(&net, &OptConfig::default()).unwrap();
        assert!(s.approximate);
        let a = &s.assignment;
        assert_ne!(a.index(UserId::new(0, 0)), a.index(UserId::new(1, 0)));
        // the chosen assignment is the better of the two
        let other = vec![vec![0, 1], vec![0, 1]];
        let alt = full_power_outcome(&net, other, ChannelModel::Ideal, false).unwrap();
        assert!(s.report.min_sinr() > alt.report.min_sinr());
    }

    #[test]
    fn smart_beats_random_on_average() {
        let cfg = NetworkConfig {
            num_cells: 4,
            users_per_cell: 2,
            pilot_len: 2,
            bs_antennas: 300,
            ..Default::default()
        };
        let opt = OptConfig::default();
        let (mut smart, mut random) = (0.0, 0.0);
        for seed in 0..100 {
            let net = generate_layout(&cfg, seed).unwrap();
            smart += baseline_smart(&net, &opt).unwrap().report.min_se();
            random += baseline_random(&net, &opt, 1000 + seed).unwrap().report.min_se();
        }
        assert!(smart > random, "{smart} {random}");
    }

    #[test]
    fn random_is_reproducible() {
        let net = toy(4, 3, 3, 100);
        let cfg = OptConfig::default();
        let a = baseline_random(&net, &cfg, 5).unwrap();
        let b = baseline_random(&net, &cfg, 5).unwrap();
        assert_eq!(a, b);
        let single = toy(1, 3, 3, 100);
        let r = baseline_random(&single, &cfg, 5).unwrap();
        for u in single.users() {
            assert_eq!(r.assignment.reuse_set(u), vec![u]);
        }
    }

    #[test]
    fn sca_trace_nondecreasing() {
        let net = toy(2, 2, 2, 100);
        let r = solve_sca(&net, &OptConfig::default().with_seed(11)).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1] >= w[0] * (1.0 - 1e-6), "{:?}", r.trace);
        }
        let report = se::evaluate(&net, &r.pilot_alloc, &r.data_p, ChannelModel::Ideal).unwrap();
        assert!((report.min_sinr() - r.xi).abs() <= 1e-6 * r.xi);
        assert!(crate::pilots::check_power_constraint(&r.pilot_alloc, &net.config)
            .iter()
            .all(|&ok| ok));
    }

    #[test]
    fn result_json_round_trip() {
        let net = toy(2, 2, 2, 100);
        let r = solve_exhaustive(&net, &OptConfig::default()).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        let back: OptResult = serde_json::from_str(&s).unwrap();
        assert_eq!(back.xi, r.xi);
        assert_eq!(back.pilot_alloc, r.pilot_alloc);
    }
}
