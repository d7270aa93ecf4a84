//! `gavg`: runs averaging experiments and writes plot-ready artifacts.
//!
//! Exit codes: 0 when every assertion passes, 1 when one fails, 2 on config,
//! input or output errors.

mod config;
mod experiments;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, Experiment, ExperimentConfig, Kind, Overrides};
use experiments::RunError;

#[derive(Parser)]
#[command(name = "gavg", version, about = "Averaging experiments on finite and circle groupoids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and parse its inputs without running anything.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Experiment kind; overrides the config.
        kind: Option<Kind>,
    },
    /// Run one experiment.
    Run {
        /// Experiment kind; overrides the config.
        kind: Option<Kind>,
        #[command(flatten)]
        common: Common,
    },
    /// Check a trace CSV against the convergence bounds.
    BoundsCheck {
        /// Trace CSV with columns i,b,c,unit_defect,quadratic_bound_rhs,envelope.
        trace: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Default)]
struct Common {
    /// JSON experiment config (see experiment.schema.json).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "tol-c")]
    tol_c: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Grid resolution.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Twist of the circle action.
    #[arg(long)]
    k: Option<usize>,
    /// Perturbation amplitude.
    #[arg(long)]
    perturb: Option<f64>,
}

impl Common {
    fn experiment(self, kind: Option<Kind>, trace: Option<PathBuf>) -> Result<Experiment, ConfigError> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        base.apply(Overrides {
            kind,
            seed: self.seed,
            out: self.out,
            tol_c: self.tol_c,
            max_iter: self.max_iter,
            n: self.n,
            k: self.k,
            perturb: self.perturb,
            trace,
        })
        .validate()
    }
}

fn log(message: String) {
    eprintln!("gavg: {message}");
}

fn input_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("gavg: error: {message}");
    ExitCode::from(2)
}

fn run(exp: &Experiment) -> ExitCode {
    let outcome = match experiments::run(exp, &mut log) {
        Ok(o) => o,
        Err(e @ (RunError::Input(_) | RunError::Output(_))) => return input_error(e),
    };
    if let Err(e) = write_outputs(exp, &outcome) {
        return input_error(e);
    }
    for a in &outcome.assertions {
        let status = if a.pass { "ok" } else { "FAILED" };
        println!("{status} {}: {}", a.name, a.detail);
    }
    match outcome.assertions.iter().find(|a| !a.pass) {
        None => ExitCode::SUCCESS,
        Some(a) => {
            eprintln!("gavg: assertion {} failed: {}", a.name, a.detail);
            ExitCode::from(1)
        }
    }
}

fn write_outputs(exp: &Experiment, outcome: &experiments::Outcome) -> Result<(), String> {
    let dir = &exp.out;
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let verdict = ("verdict.json".to_string(), outcome.verdict_json(exp).into_bytes());
    for (name, bytes) in outcome.files.iter().chain(std::iter::once(&verdict)) {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { common, kind } => {
            let exp = match common.experiment(kind, None) {
                Ok(e) => e,
                Err(e) => return input_error(e),
            };
            match experiments::load_inputs(&exp) {
                Ok(summary) => {
                    println!("ok {}: {summary}", exp.kind);
                    ExitCode::SUCCESS
                }
                Err(e) => input_error(e),
            }
        }
        Command::Run { kind, common } => match common.experiment(kind, None) {
            Ok(exp) => run(&exp),
            Err(e) => input_error(e),
        },
        Command::BoundsCheck { trace, common } => {
            match common.experiment(Some(Kind::BoundsCheck), trace) {
                Ok(exp) => run(&exp),
                Err(e) => input_error(e),
            }
        }
    }
}
