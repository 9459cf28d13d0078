//! Experiment runner for the `mimo-pilot` library.
//!
//! `run` evaluates baselines and optimizers over network drops and sweep
//! points and writes plot-ready CSV and a JSON summary. `validate` checks
//! every closed form against the Monte Carlo oracle and audits the
//! successive-approximation traces.

pub mod error;
pub mod output;
pub mod run;
pub mod spec;
pub mod validate;

pub use error::{CliError, Result};
pub use output::emit_cdf;
pub use run::{run_experiment, RunSummary};
pub use spec::{ExperimentSpec, Method, Sweep, SweepPoint, ValidationSpec};
pub use validate::{run_validation, ValidationSummary};

/// Environment variable overriding the spec's output directory. The
/// `--out` flag takes precedence over it.
pub const OUT_ENV: &str = "MIMO_PILOT_OUT";
