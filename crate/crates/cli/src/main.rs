//! `ostro`: analysis, integration and verification of Lagrangians affine
//! in the acceleration.

mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    /// Verification found a failing identity.
    pub const VERIFY: u8 = 1;
    /// Model file, flag or catalog name rejected.
    pub const VALIDATION: u8 = 2;
    /// Constraint classification is inconsistent.
    pub const CLASSIFICATION: u8 = 3;
    /// Multipliers undetermined or a gauge condition is unusable.
    pub const MULTIPLIER: u8 = 4;
    /// Numerical or rule-table limitation (step underflow, no antiderivative).
    pub const NUMERICAL: u8 = 5;

    pub fn new(code: u8, message: impl Into<String>) -> Failure {
        Failure {
            code,
            message: message.into(),
        }
    }
}

#[derive(Parser)]
#[command(name = "ostro", version, about = "Ostrogradski analysis of Lagrangians affine in the acceleration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct ModelArgs {
    /// Model file path, or `catalog:NAME` for a built-in model.
    pub model: String,
    /// Parameter value `name=value` or preset `group=name`; repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub settings: Vec<String>,
    /// Sampling seed.
    #[arg(long, env = "OSTRO_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Full static analysis: tensors, constraints, classification, surface split, Zermelo and Helmholtz.
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
        /// Relative rank tolerance for the classification.
        #[arg(long, default_value_t = ostro_core::constraints::RANK_TOL)]
        tol: f64,
        /// Sample points for the pointwise checks.
        #[arg(long, default_value_t = 8)]
        points: usize,
        /// Worker threads for sample-point evaluation.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Integrate the Hamilton equations and write the trajectory as CSV.
    Integrate {
        #[command(flatten)]
        model: ModelArgs,
        /// Initial data `x0,x1,..;xdot0,xdot1,..[;xddot0,..]`.
        #[arg(long, value_name = "X;XDOT[;XDDOT]", allow_hyphen_values = true)]
        ic: String,
        /// Parameter interval `tau0,tau1`.
        #[arg(long, value_name = "TAU0,TAU1", allow_hyphen_values = true)]
        span: String,
        /// Gauge: a name declared in the model or an inline `lhs = rhs`; repeatable.
        #[arg(long)]
        gauge: Vec<String>,
        /// Use the minimum-norm multiplier when the gauge leaves it undetermined.
        #[arg(long)]
        min_norm: bool,
        /// Relative integration tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// CSV destination; the trajectory goes to standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split L into a dynamic part and a total derivative.
    Decompose {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Helmholtz identities and finite-difference cross-checks.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        /// Sample points per identity.
        #[arg(long, default_value_t = 8)]
        points: usize,
        /// Relative tolerance of the finite-difference check.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// Worker threads for sample-point evaluation.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Add this term to V after the tensors are derived (negative control).
        #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
        perturb_v: Option<String>,
    },
    /// Built-in example models.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    /// List the built-in models.
    List,
    /// Print a built-in model file.
    Show { name: String },
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Analyze { model, tol, points, jobs } => commands::analyze(&model, tol, points, jobs),
        Command::Integrate {
            model,
            ic,
            span,
            gauge,
            min_norm,
            tol,
            out,
        } => commands::integrate(&model, &ic, &span, &gauge, min_norm, tol, out.as_deref()),
        Command::Decompose { model } => commands::decompose(&model),
        Command::Verify {
            model,
            points,
            tol,
            jobs,
            perturb_v,
        } => commands::verify(&model, points, tol, jobs, perturb_v.as_deref()),
        Command::Catalog { action } => match action {
            CatalogAction::List => Ok(commands::catalog_list()),
            CatalogAction::Show { name } => commands::catalog_show(&name),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            if f.code == Failure::VERIFY {
                // the report itself is the diagnostic
                print!("{}", f.message);
            } else {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
