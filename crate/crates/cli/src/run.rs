//! The `run` command.
//!
//! Every sweep point uses the same sequence of network drops: drop `r` has
//! layout seed `derive(seed, r)`. Random assignment `i` of a drop uses seed
//! `derive(layout_seed, i)`, and successive approximation starts from
//! `derive(layout_seed, opt.init_seed)`. Drops run in parallel and results
//! are collected in index order, so the CSV outputs do not depend on the
//! thread count.

use std::path::Path;
use std::time::Instant;

use mimo_pilot::network::generate_layout;
use mimo_pilot::optimize::{baseline_random, baseline_smart, solve_exhaustive, solve_sca, OptConfig};
use mimo_pilot::se::{self, SinrReport};
use mimo_pilot::{par, NetworkConfig, NetworkRealization, UserId};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::{cdf_points, fmt_f64, mean, quantile, write};
use crate::spec::{ExperimentSpec, Method, SweepPoint};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Child seed `i` of `seed`.
pub fn derive(seed: u64, i: u64) -> u64 {
    seed.wrapping_mul(GOLDEN).wrapping_add(i)
}

/// One method run on one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub point: usize,
    pub realization: usize,
    pub layout_seed: u64,
    pub method: Method,
    /// Index of the random assignment; zero for the other methods.
    pub inner: usize,
    pub outcome: std::result::Result<SinrReport, String>,
    pub seconds: f64,
}

impl Sample {
    pub fn min_se(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.min_se())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub samples: usize,
    pub failures: usize,
    pub mean_min_se: Option<f64>,
    /// 95%-likely max-min SE: the 5th percentile of the samples.
    pub p5_min_se: Option<f64>,
    pub wall_clock_seconds: f64,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: usize,
    pub params: SweepPoint,
    pub antennas: usize,
    pub users_per_cell: usize,
    pub pilot_len: usize,
    pub methods: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub n_realizations_outer: usize,
    pub random_inner_seeds: usize,
    pub averaging: String,
    pub points: Vec<PointSummary>,
}

impl RunSummary {
    pub fn failures(&self) -> usize {
        self.points.iter().flat_map(|p| &p.methods).map(|m| m.failures).sum()
    }
}

fn run_method(
    net: &NetworkRealization,
    opt: &OptConfig,
    method: Method,
    inner_seed: u64,
) -> mimo_pilot::Result<SinrReport> {
    let mode = opt.objective_mode;
    let cfg = opt.with_power_mode(method.power_mode());
    match method {
        Method::Random => Ok(baseline_random(net, &cfg, inner_seed)?.report),
        Method::Smart => Ok(baseline_smart(net, &cfg)?.report),
        Method::ExhaustivePilotOnly | Method::ExhaustiveJoint => {
            let r = solve_exhaustive(net, &cfg)?;
            se::evaluate(net, &r.pilot_alloc, &r.data_p, mode)
        }
        Method::ScaPilotOnly | Method::ScaJoint => {
            let r = solve_sca(net, &cfg.with_seed(inner_seed))?;
            se::evaluate(net, &r.pilot_alloc, &r.data_p, mode)
        }
    }
}

fn run_drop(
    spec: &ExperimentSpec,
    point: usize,
    net_cfg: &NetworkConfig,
    opt: &OptConfig,
    realization: usize,
) -> Vec<Sample> {
    let layout_seed = derive(spec.seed, realization as u64);
    let mut out = Vec::new();
    let net = match generate_layout(net_cfg, layout_seed) {
        Ok(n) => n,
        Err(e) => {
            for &method in &spec.methods {
                out.push(Sample {
                    point,
                    realization,
                    layout_seed,
                    method,
                    inner: 0,
                    outcome: Err(e.to_string()),
                    seconds: 0.0,
                });
            }
            return out;
        }
    };
    for &method in &spec.methods {
        let inners = if method == Method::Random { spec.random_inner_seeds } else { 1 };
        for inner in 0..inners {
            let inner_seed = match method {
                Method::Random => derive(layout_seed, inner as u64),
                _ => derive(layout_seed, opt.init_seed),
            };
            let clock = Instant::now();
            let outcome = run_method(&net, opt, method, inner_seed).map_err(|e| e.to_string());
            out.push(Sample {
                point,
                realization,
                layout_seed,
                method,
                inner,
                outcome,
                seconds: clock.elapsed().as_secs_f64(),
            });
        }
    }
    out
}

/// Runs every method on every drop of every sweep point.
pub fn collect_samples(spec: &ExperimentSpec) -> Vec<Sample> {
    let mut all = Vec::new();
    for (p, point) in spec.points().iter().enumerate() {
        let (net_cfg, opt) = point.apply(&spec.network, &spec.opt);
        let drops = par::map_indexed(spec.n_realizations_outer, |r| run_drop(spec, p, &net_cfg, &opt, r));
        all.extend(drops.into_iter().flatten());
    }
    all
}

pub const SAMPLES_HEADER: &str =
    "point,antennas,users_per_cell,pilot_len,epsilon,rho,seed,realization,method,inner,l,k,sinr,se,status";

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Per-user rows; a failed method yields one row with empty user fields.
pub fn samples_csv(spec: &ExperimentSpec, samples: &[Sample]) -> String {
    let points = spec.points();
    let mut out = String::from(SAMPLES_HEADER);
    out.push('\n');
    for s in samples {
        let pt = &points[s.point];
        let (net, _) = pt.apply(&spec.network, &spec.opt);
        let prefix = format!(
            "{},{},{},{},{},{},{},{},{},{}",
            s.point,
            net.bs_antennas,
            net.users_per_cell,
            net.pilot_len,
            opt_f64(pt.epsilon),
            opt_f64(pt.rho),
            s.layout_seed,
            s.realization,
            s.method,
            s.inner
        );
        match &s.outcome {
            Ok(rep) => {
                for (i, (sinr, se)) in rep.sinr.iter().zip(&rep.se).enumerate() {
                    let u = UserId::from_index(i, rep.users_per_cell);
                    out.push_str(&format!("{prefix},{},{},{sinr},{se},ok\n", u.cell, u.user));
                }
            }
            Err(e) => {
                let msg = e.replace([',', '\n'], ";");
                out.push_str(&format!("{prefix},,,,,failed: {msg}\n"));
            }
        }
    }
    out
}

/// `point,value,cdf` rows of one method's max-min SE samples.
pub fn method_cdf_csv(samples: &[Sample], method: Method, n_points: usize) -> String {
    let mut out = String::from("point,value,cdf\n");
    for p in 0..n_points {
        let v: Vec<f64> = samples
            .iter()
            .filter(|s| s.point == p && s.method == method)
            .filter_map(Sample::min_se)
            .collect();
        for (x, f) in cdf_points(&v) {
            out.push_str(&format!("{p},{},{}\n", fmt_f64(x), fmt_f64(f)));
        }
    }
    out
}

pub fn summarize(spec: &ExperimentSpec, samples: &[Sample]) -> RunSummary {
    let points = spec
        .points()
        .iter()
        .enumerate()
        .map(|(p, pt)| {
            let (net, _) = pt.apply(&spec.network, &spec.opt);
            let methods = spec
                .methods
                .iter()
                .map(|&method| {
                    let mine: Vec<&Sample> = samples.iter().filter(|s| s.point == p && s.method == method).collect();
                    let values: Vec<f64> = mine.iter().filter_map(|s| s.min_se()).collect();
                    let errors: Vec<String> = mine
                        .iter()
                        .filter_map(|s| s.outcome.as_ref().err().map(|e| format!("drop {}: {e}", s.realization)))
                        .collect();
                    MethodSummary {
                        method,
                        samples: values.len(),
                        failures: errors.len(),
                        mean_min_se: mean(&values),
                        p5_min_se: quantile(&values, 0.05),
                        wall_clock_seconds: mine.iter().map(|s| s.seconds).sum(),
                        errors,
                    }
                })
                .collect();
            PointSummary {
                point: p,
                params: *pt,
                antennas: net.bs_antennas,
                users_per_cell: net.users_per_cell,
                pilot_len: net.pilot_len,
                methods,
            }
        })
        .collect();
    RunSummary {
        seed: spec.seed,
        n_realizations_outer: spec.n_realizations_outer,
        random_inner_seeds: spec.random_inner_seeds,
        averaging: format!(
            "each method is averaged over {} network drops per sweep point; the random baseline also over {} \
             assignment seeds per drop",
            spec.n_realizations_outer, spec.random_inner_seeds
        ),
        points,
    }
}

/// Runs the experiment and writes `samples.csv`, `cdf_<method>.csv` and
/// `summary.json` into `out_dir`. Method failures are recorded and the other
/// results still written; the call then returns a solver error.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<RunSummary> {
    spec.validate()?;
    let samples = collect_samples(spec);
    write(&out_dir.join("samples.csv"), &samples_csv(spec, &samples))?;
    let n_points = spec.points().len();
    for &m in &spec.methods {
        write(&out_dir.join(format!("cdf_{m}.csv")), &method_cdf_csv(&samples, m, n_points))?;
    }
    let summary = summarize(spec, &samples);
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Spec(e.to_string()))?;
    write(&out_dir.join("summary.json"), &json)?;
    let failures = summary.failures();
    if failures > 0 {
        return Err(CliError::Solver(format!(
            "{failures} method runs failed; see summary.json"
        )));
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentSpec {
        ExperimentSpec::from_toml(
            r#"
            methods = ["random"]
            [network]
            num_cells = 2
            users_per_cell = 2
            pilot_len = 2
            bs_antennas = 50
            "#,
        )
        .unwrap()
    }

    #[test]
    fn one_row_per_user() {
        let spec = tiny();
        let samples = collect_samples(&spec);
        assert_eq!(samples.len(), 1);
        let csv = samples_csv(&spec, &samples);
        assert_eq!(csv.lines().count(), 1 + 4);
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",ok")));
    }

    #[test]
    fn summary_counts() {
        let mut spec = tiny();
        spec.n_realizations_outer = 3;
        spec.random_inner_seeds = 2;
        let samples = collect_samples(&spec);
        let s = summarize(&spec, &samples);
        assert_eq!(s.points[0].methods[0].samples, 6);
        assert_eq!(s.failures(), 0);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive(0, 0), derive(0, 1));
        assert_ne!(derive(1, 0), derive(0, 1));
    }
}
