//! `beqal` — experiment runner: solve, verify, sweep.
//!
//! Exit codes: 0 success, 1 usage or I/O problems, 2 solver failure.
//! Set `BEQAL_LOG` (error|warn|info|debug|trace) for log verbosity.

mod solve;
mod spec;
mod sweep;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    /// Bad usage, unreadable inputs, malformed config: exit 1.
    Io(String),
    Config(String),
    /// The solver aborted: exit 2.
    Solver(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) | CliError::Config(m) => write!(f, "{m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Config(_) => 1,
            CliError::Solver(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "beqal",
    about = "Block-encoded gradient-descent linear-system solver simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver once and write report.json plus trace.csv.
    Solve(RunArgs),
    /// Run the invariant battery and print a pass/fail table.
    Verify(VerifyArgs),
    /// Run the cartesian sweep from the config and write sweep_summary.csv.
    Sweep(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON RunSpec.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Clone)]
struct VerifyArgs {
    /// JSON RunSpec (optional; a built-in battery configuration is used
    /// otherwise).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Master seed override (solver and estimation seeds).
    #[arg(long)]
    seed: Option<u64>,
    /// Estimation mode override.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Hyperparameter regime override.
    #[arg(long = "eta-mode", value_enum)]
    eta_mode: Option<EtaModeArg>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum EtaModeArg {
    Paper,
    Free,
}

fn apply_overrides(spec: &mut spec::RunSpec, overrides: &Overrides) {
    if let Some(seed) = overrides.seed {
        spec.solver.seed = seed;
        spec.solver.estimation.seed = seed;
    }
    if let Some(mode) = overrides.mode {
        spec.solver.estimation.mode = match mode {
            ModeArg::Exact => beqal_core::estimation::EstimationMode::Exact,
            ModeArg::Sampled => beqal_core::estimation::EstimationMode::Sampled,
        };
    }
    if let Some(eta_mode) = overrides.eta_mode {
        spec.solver.eta_mode = match eta_mode {
            EtaModeArg::Paper => spec::EtaModeSpec::Paper,
            EtaModeArg::Free => spec::EtaModeSpec::Free,
        };
    }
    if let Some(out) = &overrides.out {
        spec.output_dir = Some(out.clone());
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("BEQAL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits; everything else
            // is a usage error (exit 1).
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => load_and(args, solve::cmd_solve),
        Command::Sweep(args) => load_and(args, sweep::cmd_sweep),
        Command::Verify(args) => verify::cmd_verify(args.config.as_deref(), &args.overrides),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_and(
    args: RunArgs,
    command: fn(&spec::RunSpec) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let mut run_spec = spec::load_spec(&args.config)?;
    apply_overrides(&mut run_spec, &args.overrides);
    command(&run_spec)
}
