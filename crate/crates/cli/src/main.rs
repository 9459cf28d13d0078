use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mimo_pilot::par;
use mimo_pilot_cli::{run_experiment, run_validation, CliError, ExperimentSpec, OUT_ENV};

#[derive(Parser)]
#[command(name = "mimo-pilot", version, about = "Pilot and power optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the methods of a spec over drops and sweep points.
    Run(Common),
    /// Check closed forms against simulation and audit optimizer traces.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Spec file (TOML, or JSON with a .json extension).
    spec: PathBuf,
    /// Overrides the spec seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides the environment and the spec.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentSpec, PathBuf), CliError> {
        let mut spec = ExperimentSpec::load(&self.spec)?;
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        let out = self
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| spec.output_dir.clone());
        Ok((spec, out))
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (common, validate) = match &cli.command {
        Command::Run(c) => (c, false),
        Command::Validate(c) => (c, true),
    };
    let (spec, out) = common.load()?;
    let work = || -> Result<(), CliError> {
        if validate {
            let s = run_validation(&spec, &out)?;
            for m in &s.modes {
                println!(
                    "{:?}: sinr pass {:.3}, estimator pass {:.3}, monotone {}/{}",
                    m.mode, m.pass_fraction, m.estimator_pass_fraction, m.sca_monotone, m.sca_runs
                );
            }
        } else {
            let s = run_experiment(&spec, &out)?;
            for p in &s.points {
                for m in &p.methods {
                    println!(
                        "point {} {}: mean max-min SE {}",
                        p.point,
                        m.method,
                        m.mean_min_se.map_or("n/a".into(), |v| format!("{v:.4}"))
                    );
                }
            }
        }
        println!("results in {}", out.display());
        Ok(())
    };
    match common.threads {
        Some(t) => par::with_threads(t, work),
        None => work(),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
