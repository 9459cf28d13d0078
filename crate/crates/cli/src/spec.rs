//! Experiment specification files.
//!
//! TOML by default, JSON when the file name ends in `.json`. Every section is
//! optional and falls back to the library defaults:
//!
//! ```toml
//! methods = ["random", "smart", "sca_joint"]
//! n_realizations_outer = 50
//! seed = 1
//! random_inner_seeds = 1
//! output_dir = "out"
//!
//! [network]
//! num_cells = 4
//! users_per_cell = 2
//!
//! [opt]
//! objective_mode = { kind = "hardware", epsilon = 0.1 }
//!
//! [mc]
//! n_realizations = 100000
//! antennas = 20
//!
//! [sweep]
//! antennas = [100, 300, 900]
//!
//! [validation]
//! modes = [{ kind = "ideal" }, { kind = "correlated", rho = 0.5 }]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use mimo_pilot::montecarlo::McConfig;
use mimo_pilot::optimize::{OptConfig, PowerMode};
use mimo_pilot::pilots::dictionary_size;
use mimo_pilot::{ChannelModel, NetworkConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Random,
    Smart,
    ExhaustivePilotOnly,
    ExhaustiveJoint,
    ScaPilotOnly,
    ScaJoint,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Random,
        Method::Smart,
        Method::ExhaustivePilotOnly,
        Method::ExhaustiveJoint,
        Method::ScaPilotOnly,
        Method::ScaJoint,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Smart => "smart",
            Method::ExhaustivePilotOnly => "exhaustive_pilot_only",
            Method::ExhaustiveJoint => "exhaustive_joint",
            Method::ScaPilotOnly => "sca_pilot_only",
            Method::ScaJoint => "sca_joint",
        }
    }

    pub fn power_mode(&self) -> PowerMode {
        match self {
            Method::ExhaustiveJoint | Method::ScaJoint => PowerMode::JointPilotData,
            _ => PowerMode::PilotOnlyFullData,
        }
    }

    /// Needs `tau_p == K`.
    pub fn needs_assignment(&self) -> bool {
        matches!(
            self,
            Method::Random | Method::Smart | Method::ExhaustivePilotOnly | Method::ExhaustiveJoint
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameter grid. Empty axes keep the base value. Points are the cartesian
/// product in the order antennas, users_per_cell, pilot_len, epsilon, rho.
/// When `users_per_cell` is swept and `pilot_len` is not, the pilot length
/// follows the number of users.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub antennas: Vec<usize>,
    pub users_per_cell: Vec<usize>,
    pub pilot_len: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub rho: Vec<f64>,
}

/// One grid point; `None` keeps the base value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepPoint {
    pub antennas: Option<usize>,
    pub users_per_cell: Option<usize>,
    pub pilot_len: Option<usize>,
    pub epsilon: Option<f64>,
    pub rho: Option<f64>,
}

fn axis<T: Copy>(v: &[T]) -> Vec<Option<T>> {
    if v.is_empty() {
        vec![None]
    } else {
        v.iter().map(|x| Some(*x)).collect()
    }
}

impl Sweep {
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &antennas in &axis(&self.antennas) {
            for &users_per_cell in &axis(&self.users_per_cell) {
                for &pilot_len in &axis(&self.pilot_len) {
                    for &epsilon in &axis(&self.epsilon) {
                        for &rho in &axis(&self.rho) {
                            out.push(SweepPoint {
                                antennas,
                                users_per_cell,
                                pilot_len: pilot_len.or(users_per_cell),
                                epsilon,
                                rho,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_empty() && !self.rho.is_empty() {
            return Err(CliError::Spec(
                "sweep cannot combine epsilon and rho: the channel model is either impaired or correlated".into(),
            ));
        }
        if self.antennas.contains(&0) || self.users_per_cell.contains(&0) || self.pilot_len.contains(&0) {
            return Err(CliError::Spec("sweep counts must be positive".into()));
        }
        for &e in &self.epsilon {
            ChannelModel::Hardware { epsilon: e }.validate()?;
        }
        for &r in &self.rho {
            ChannelModel::Correlated { rho: r }.validate()?;
        }
        Ok(())
    }
}

impl SweepPoint {
    /// Applies the point to base configurations.
    pub fn apply(&self, network: &NetworkConfig, opt: &OptConfig) -> (NetworkConfig, OptConfig) {
        let mut n = network.clone();
        let mut o = *opt;
        if let Some(m) = self.antennas {
            n.bs_antennas = m;
        }
        if let Some(k) = self.users_per_cell {
            n.users_per_cell = k;
        }
        if let Some(t) = self.pilot_len {
            n.pilot_len = t;
        }
        if let Some(e) = self.epsilon {
            o.objective_mode = ChannelModel::Hardware { epsilon: e };
        }
        if let Some(r) = self.rho {
            o.objective_mode = ChannelModel::Correlated { rho: r };
        }
        (n, o)
    }
}

/// Options of the `validate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSpec {
    /// Channel models checked against the simulation. Epsilon values of the
    /// sweep add one impaired model each.
    pub modes: Vec<ChannelModel>,
    /// Random instances per model; defaults to `n_realizations_outer`.
    pub instances: Option<usize>,
    /// Run the successive-approximation monotonicity audit.
    pub sca_audit: bool,
    /// Multiplies every closed-form SINR before comparison. Values other than
    /// one inject a fault, for negative controls.
    pub closed_form_scale: f64,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        Self {
            modes: vec![
                ChannelModel::Ideal,
                ChannelModel::Hardware { epsilon: 0.1 },
                ChannelModel::Correlated { rho: 0.5 },
            ],
            instances: None,
            sca_audit: true,
            closed_form_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub network: NetworkConfig,
    pub opt: OptConfig,
    pub mc: Option<McConfig>,
    pub methods: Vec<Method>,
    /// Independent network drops per sweep point.
    pub n_realizations_outer: usize,
    /// Random assignments averaged per drop for the random baseline.
    pub random_inner_seeds: usize,
    pub seed: u64,
    pub sweep: Option<Sweep>,
    pub output_dir: PathBuf,
    pub validation: ValidationSpec,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            opt: OptConfig::default(),
            mc: None,
            methods: vec![Method::Random, Method::Smart, Method::ScaPilotOnly, Method::ScaJoint],
            n_realizations_outer: 1,
            random_inner_seeds: 1,
            seed: 0,
            sweep: None,
            output_dir: PathBuf::from("out"),
            validation: ValidationSpec::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Spec(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Spec(e.to_string()))
    }

    /// Reads and validates a spec file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let spec = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text)?,
            _ => Self::from_toml(&text)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        self.sweep.clone().unwrap_or_default().points()
    }

    /// Checks every field and every sweep point, including enumeration caps
    /// of the exhaustive methods.
    pub fn validate(&self) -> Result<()> {
        let spec_err = |e: mimo_pilot::Error| CliError::Spec(e.to_string());
        if self.methods.is_empty() {
            return Err(CliError::Spec("methods must not be empty".into()));
        }
        if self.n_realizations_outer == 0 {
            return Err(CliError::Spec("n_realizations_outer must be positive".into()));
        }
        if self.random_inner_seeds == 0 {
            return Err(CliError::Spec("random_inner_seeds must be positive".into()));
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        if let Some(mc) = &self.mc {
            mc.validate().map_err(spec_err)?;
        }
        if self.validation.instances == Some(0) {
            return Err(CliError::Spec("validation.instances must be positive".into()));
        }
        if !(self.validation.closed_form_scale > 0.0) {
            return Err(CliError::Spec("validation.closed_form_scale must be positive".into()));
        }
        for m in &self.validation.modes {
            m.validate().map_err(spec_err)?;
        }
        for point in self.points() {
            let (net, opt) = point.apply(&self.network, &self.opt);
            net.validate().map_err(spec_err)?;
            opt.validate().map_err(spec_err)?;
            for method in &self.methods {
                if method.needs_assignment() && net.pilot_len != net.users_per_cell {
                    return Err(CliError::Spec(format!(
                        "method {method} needs pilot_len == users_per_cell, got {} and {}",
                        net.pilot_len, net.users_per_cell
                    )));
                }
                if matches!(method, Method::ExhaustivePilotOnly | Method::ExhaustiveJoint) {
                    let size = dictionary_size(net.num_cells, net.users_per_cell);
                    if size.is_none_or(|s| s > opt.enumeration_cap as u128) {
                        return Err(CliError::Spec(format!(
                            "method {method} needs {} assignments, enumeration_cap is {}",
                            size.map_or("more than 2^128".to_string(), |s| s.to_string()),
                            opt.enumeration_cap
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_spec_uses_defaults() {
        let s = ExperimentSpec::from_toml("").unwrap();
        assert_eq!(s, ExperimentSpec::default());
        assert_eq!(s.network.num_cells, 4);
        assert_eq!(s.network.max_pilot_power_mw, 200.0);
        s.validate().unwrap();
    }

    #[test]
    fn parses_sections() {
        let s = ExperimentSpec::from_toml(
            r#"
            methods = ["random", "exhaustive_joint"]
            n_realizations_outer = 3
            [network]
            num_cells = 2
            [opt]
            objective_mode = { kind = "hardware", epsilon = 0.1 }
            gp = { kkt = 1e-6 }
            [mc]
            n_realizations = 1000
            [sweep]
            antennas = [10, 20]
            "#,
        )
        .unwrap();
        assert_eq!(s.methods, vec![Method::Random, Method::ExhaustiveJoint]);
        assert_eq!(s.opt.objective_mode, ChannelModel::Hardware { epsilon: 0.1 });
        assert_eq!(s.opt.gp.kkt, 1e-6);
        assert_eq!(s.mc.unwrap().n_realizations, 1000);
        assert_eq!(s.points().len(), 2);
        s.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        assert!(ExperimentSpec::from_toml("bogus = 1").is_err());
        assert!(ExperimentSpec::from_toml("[network]\nnum_cels = 2").is_err());
        let s = ExperimentSpec::from_toml("methods = []").unwrap();
        assert!(s.validate().is_err());
        let s = ExperimentSpec::from_toml("[network]\npilot_len = 3").unwrap();
        assert!(s.validate().is_err());
        let s = ExperimentSpec::from_toml(
            "methods = [\"exhaustive_joint\"]\n[network]\nnum_cells = 4\nusers_per_cell = 8\npilot_len = 8",
        )
        .unwrap();
        assert!(matches!(s.validate(), Err(CliError::Spec(_))));
        let s = ExperimentSpec::from_toml("[sweep]\nepsilon = [0.1]\nrho = [0.5]").unwrap();
        assert!(s.validate().is_err());
    }

    #[test]
    fn pilot_length_follows_users() {
        let sweep = Sweep {
            users_per_cell: vec![2, 3],
            ..Default::default()
        };
        let pts = sweep.points();
        assert_eq!(pts[1].pilot_len, Some(3));
        let (n, _) = pts[1].apply(&NetworkConfig::default(), &OptConfig::default());
        assert_eq!((n.users_per_cell, n.pilot_len), (3, 3));
    }

    #[test]
    fn json_matches_toml() {
        let t = ExperimentSpec::from_toml("seed = 4\n[network]\nnum_cells = 2").unwrap();
        let j = ExperimentSpec::from_json(r#"{"seed": 4, "network": {"num_cells": 2}}"#).unwrap();
        assert_eq!(t, j);
    }
}
