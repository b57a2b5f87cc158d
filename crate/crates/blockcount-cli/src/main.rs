//! Command-line front end for the `blockcount` library.
//!
//! Exit status: 0 on success, 1 when a computation or validation fails,
//! 2 when the request itself is invalid.

mod commands;
mod model;
mod validate;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use model::ModelArgs;

#[derive(Debug, Parser)]
#[command(
    name = "blockcount",
    version,
    about = "Stationary block counting laws with selection and mutation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Report errors on stderr as JSON.
    #[arg(long, global = true)]
    json_errors: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, clap::Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the artifact here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct SolveArgs {
    /// Initial truncation level.
    #[arg(long = "K", default_value_t = 64)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stationary law of the block counting process.
    Stationary {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Number of factorial moments in the record.
        #[arg(long, default_value_t = 4)]
        moments: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Simulate the block counting process and report its occupancy.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1)]
        start: usize,
        #[arg(long, default_value = "1e5", value_parser = parse_count)]
        events: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of simulated time discarded as burn-in.
        #[arg(long, default_value_t = 0.2)]
        burn_in: f64,
        /// Also write the jump path as CSV.
        #[arg(long)]
        path_csv: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Moments `w_n = E[(1-X)^n]` of the stationary type frequency.
    Moments {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Test whether the stationary law is geometric.
    GeomCheck {
        #[command(flatten)]
        model: ModelArgs,
        /// Geometric parameter; estimated from the solved law if absent.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 50)]
        n_max: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Absorption and fixation probabilities and the w(s) generating function.
    Dual {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum)]
        what: commands::DualKind,
        #[arg(long, default_value_t = 0.5)]
        x: f64,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Grid size for w(s).
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Cross-validation matrix; exits with 1 if any check fails.
    Validate {
        #[arg(long, value_enum, default_value_t = validate::Suite::Quick)]
        suite: validate::Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn parse_count(s: &str) -> Result<u64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if !(v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
        return Err(format!("not a nonnegative integer: {s}"));
    }
    Ok(v as u64)
}

#[derive(Debug)]
pub enum CliError {
    Spec(blockcount::Error),
    SpecMsg(String),
    Run(blockcount::Error),
    Io(std::io::Error),
    Failed(String),
}

impl CliError {
    pub fn spec(msg: impl Into<String>) -> Self {
        CliError::SpecMsg(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Spec(_) | CliError::SpecMsg(_) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Spec(_) | CliError::SpecMsg(_) => "spec",
            CliError::Run(_) => "computation",
            CliError::Io(_) => "io",
            CliError::Failed(_) => "validation",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Spec(e) | CliError::Run(e) => write!(f, "{e}"),
            CliError::SpecMsg(m) | CliError::Failed(m) => f.write_str(m),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

/// Parameter problems found by the library count as spec errors.
impl From<blockcount::Error> for CliError {
    fn from(e: blockcount::Error) -> Self {
        use blockcount::Error as E;
        match e {
            E::InvalidParameter(_)
            | E::Parse(_)
            | E::PreconditionViolated(_)
            | E::NotPositiveRecurrent(_)
            | E::AtomCap(_) => CliError::Spec(e),
            _ => CliError::Run(e),
        }
    }
}

pub struct Artifact {
    pub json: serde_json::Value,
    pub csv: String,
}

fn emit(artifact: &Artifact, output: &OutputArgs) -> Result<(), CliError> {
    let text = match output.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&artifact.json).expect("artifact serializes");
            s.push('\n');
            s
        }
        Format::Csv => artifact.csv.clone(),
    };
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(CliError::Io),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(CliError::Io),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Stationary {
            model,
            solve,
            moments,
            output,
        } => {
            let m = model::Model::resolve(&model)?;
            emit(&commands::stationary(&m, &solve, moments)?, &output)
        }
        Command::Simulate {
            model,
            start,
            events,
            seed,
            burn_in,
            path_csv,
            output,
        } => {
            let m = model::Model::resolve(&model)?;
            let (artifact, path) = commands::simulate(&m, start, events, seed, burn_in)?;
            if let Some(p) = path_csv {
                std::fs::write(p, path.to_csv()).map_err(CliError::Io)?;
            }
            emit(&artifact, &output)
        }
        Command::Moments {
            model,
            n_max,
            tol,
            output,
        } => {
            let m = model::Model::resolve(&model)?;
            emit(&commands::moments(&m, n_max, tol)?, &output)
        }
        Command::GeomCheck {
            model,
            rho,
            n_max,
            tol,
            output,
        } => {
            let m = model::Model::resolve(&model)?;
            emit(&commands::geom_check(&m, rho, n_max, tol)?, &output)
        }
        Command::Dual {
            model,
            what,
            x,
            k,
            points,
            output,
        } => {
            let m = model::Model::resolve(&model)?;
            emit(&commands::dual(&m, what, x, k, points)?, &output)
        }
        Command::Validate {
            suite,
            seed,
            output,
        } => {
            let (artifact, passed) = validate::run(suite, seed);
            emit(&artifact, &output)?;
            if passed {
                Ok(())
            } else {
                Err(CliError::Failed("validation failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json_errors = cli.json_errors;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json_errors {
                eprintln!(
                    "{}",
                    json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.code() })
                );
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.code())
        }
    }
}
