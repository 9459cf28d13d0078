//! The `validate` command: closed forms against the simulation oracle, and
//! the successive-approximation monotonicity audit.
//!
//! Instance `i` is the drop with layout seed `derive(seed, i)` at a random
//! operating point seeded by `derive(layout_seed, 1)`.

use std::path::Path;

use mimo_pilot::montecarlo::{compare, estimator_checks, random_operating_point, simulate_sinr, ComparisonReport, McConfig};
use mimo_pilot::network::generate_layout;
use mimo_pilot::optimize::{solve_sca, OptConfig};
use mimo_pilot::se::{self, SinrValue};
use mimo_pilot::{par, ChannelModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::{fmt_f64, write};
use crate::run::derive;
use crate::spec::ExperimentSpec;

/// Largest relative decrease tolerated between successive trace values.
pub const MONOTONE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: ChannelModel,
    pub comparisons: usize,
    pub pass_fraction: f64,
    pub passed: bool,
    pub estimator_comparisons: usize,
    pub estimator_pass_fraction: f64,
    pub estimator_passed: bool,
    pub sca_runs: usize,
    pub sca_monotone: usize,
    pub sca_errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub seed: u64,
    pub instances: usize,
    pub n_realizations: usize,
    pub antennas: usize,
    pub modes: Vec<ModeSummary>,
    pub passed: bool,
}

fn mode_label(m: &ChannelModel) -> String {
    match m {
        ChannelModel::Ideal => "ideal,".into(),
        ChannelModel::Hardware { epsilon } => format!("hardware,{}", fmt_f64(*epsilon)),
        ChannelModel::Correlated { rho } => format!("correlated,{}", fmt_f64(*rho)),
    }
}

/// Channel models to check: the configured list plus one impaired model
/// per swept epsilon.
pub fn modes(spec: &ExperimentSpec) -> Vec<ChannelModel> {
    let mut out = spec.validation.modes.clone();
    if let Some(s) = &spec.sweep {
        out.extend(s.epsilon.iter().map(|&epsilon| ChannelModel::Hardware { epsilon }));
    }
    out
}

struct InstanceResult {
    sinr: ComparisonReport,
    estimator: ComparisonReport,
    /// `Some(monotone)` when the audit ran, `Err` when it failed to solve.
    sca: Option<std::result::Result<bool, String>>,
}

fn is_monotone(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0] * (1.0 - MONOTONE_SLACK))
}

fn check_instance(spec: &ExperimentSpec, mc: &McConfig, mode: ChannelModel, i: usize) -> Result<InstanceResult> {
    let layout_seed = derive(spec.seed, i as u64);
    let net = generate_layout(&spec.network, layout_seed)?.with_antennas(mc.antennas);
    let (alloc, data) = random_operating_point(&net, derive(layout_seed, 1));
    let mc_i = McConfig {
        mode,
        seed: derive(mc.seed, i as u64),
        ..*mc
    };
    let mut closed = se::evaluate(&net, &alloc, &data, mode)?;
    for s in &mut closed.sinr {
        *s = SinrValue::Finite(s.to_f64() * spec.validation.closed_form_scale);
    }
    let est = simulate_sinr(&net, &alloc, &data, &mc_i)?;
    let sinr = compare(&closed, &est)?;
    let estimator = estimator_checks(&net, &alloc, &est)?;
    let sca = spec.validation.sca_audit.then(|| {
        let opt = OptConfig {
            objective_mode: mode,
            init_seed: derive(layout_seed, 2),
            ..spec.opt
        };
        solve_sca(&net, &opt)
            .map(|r| is_monotone(&r.trace))
            .map_err(|e| e.to_string())
    });
    Ok(InstanceResult { sinr, estimator, sca })
}

pub const VALIDATION_HEADER: &str = "mode,param,instance,check,l,k,variant,closed_form,empirical,std_err,z";

/// Runs the validation suite and writes `validation.csv`, `sca_audit.csv`
/// and `validation_summary.json` into `out_dir`. Returns a validation error
/// after writing if any check failed.
pub fn run_validation(spec: &ExperimentSpec, out_dir: &Path) -> Result<ValidationSummary> {
    spec.validate()?;
    let mc = spec
        .mc
        .ok_or_else(|| CliError::Spec("validate needs an [mc] section".into()))?;
    let instances = spec.validation.instances.unwrap_or(spec.n_realizations_outer);
    let mut csv = String::from(VALIDATION_HEADER);
    csv.push('\n');
    let mut audit = String::from("mode,param,instance,status\n");
    let mut summaries = Vec::new();
    for mode in modes(spec) {
        let results = par::map_indexed(instances, |i| check_instance(spec, &mc, mode, i));
        let results: Vec<InstanceResult> = results.into_iter().collect::<Result<_>>()?;
        let label = mode_label(&mode);
        let mut sinr_all = ComparisonReport::default();
        let mut est_all = ComparisonReport::default();
        let (mut runs, mut monotone, mut errors) = (0, 0, Vec::new());
        for (i, r) in results.into_iter().enumerate() {
            for (check, rep) in [("sinr", &r.sinr), ("estimator", &r.estimator)] {
                for row in rep.csv_rows() {
                    csv.push_str(&format!("{label},{i},{check},{row}\n"));
                }
            }
            if let Some(s) = r.sca {
                runs += 1;
                let status = match s {
                    Ok(true) => {
                        monotone += 1;
                        "monotone".to_string()
                    }
                    Ok(false) => "decreasing".to_string(),
                    Err(e) => {
                        errors.push(format!("instance {i}: {e}"));
                        format!("failed: {}", e.replace([',', '\n'], ";"))
                    }
                };
                audit.push_str(&format!("{label},{i},{status}\n"));
            }
            sinr_all.extend(r.sinr);
            est_all.extend(r.estimator);
        }
        summaries.push(ModeSummary {
            mode,
            comparisons: sinr_all.rows.len(),
            pass_fraction: sinr_all.pass_fraction(),
            passed: sinr_all.passed(),
            estimator_comparisons: est_all.rows.len(),
            estimator_pass_fraction: est_all.pass_fraction(),
            estimator_passed: est_all.passed(),
            sca_runs: runs,
            sca_monotone: monotone,
            sca_errors: errors,
        });
    }
    let passed = summaries
        .iter()
        .all(|m| m.passed && m.estimator_passed && m.sca_monotone == m.sca_runs);
    let summary = ValidationSummary {
        seed: spec.seed,
        instances,
        n_realizations: mc.n_realizations,
        antennas: mc.antennas,
        modes: summaries,
        passed,
    };
    write(&out_dir.join("validation.csv"), &csv)?;
    write(&out_dir.join("sca_audit.csv"), &audit)?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Spec(e.to_string()))?;
    write(&out_dir.join("validation_summary.json"), &json)?;
    if !passed {
        let bad: Vec<String> = summary
            .modes
            .iter()
            .filter(|m| !(m.passed && m.estimator_passed && m.sca_monotone == m.sca_runs))
            .map(|m| mode_label(&m.mode).trim_end_matches(',').to_string())
            .collect();
        return Err(CliError::Validation(format!("failing modes: {}", bad.join("; "))));
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_with_slack() {
        assert!(is_monotone(&[1.0, 1.0, 2.0]));
        assert!(is_monotone(&[1.0, 1.0 - 1e-7]));
        assert!(!is_monotone(&[1.0, 0.99]));
        assert!(is_monotone(&[]));
    }

    #[test]
    fn swept_epsilons_add_modes() {
        let spec = ExperimentSpec::from_toml("[validation]\nmodes = []\n[sweep]\nepsilon = [0.0, 0.2]").unwrap();
        assert_eq!(
            modes(&spec),
            vec![ChannelModel::Hardware { epsilon: 0.0 }, ChannelModel::Hardware { epsilon: 0.2 }]
        );
    }
}
