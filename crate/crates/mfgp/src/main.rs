//! `mfgp`: solve, diagnose, and sweep particle planning problems from JSON
//! run configs. See the library documentation for the file formats.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mfgp::{cmd_diagnose, cmd_solve, cmd_sweep, Overrides, SweepAxis};

#[derive(Parser)]
#[command(
    name = "mfgp",
    version,
    about = "Particle approximation of first-order planning problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the trajectory functional; write trajectory, CDF, and
    /// summary files. Exits 0 on convergence, 2 otherwise.
    Solve {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Compute diagnostic series and structural checks, reusing a prior
    /// trajectory when it matches. Exits 0 iff all applicable checks pass.
    Diagnose {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Re-solve across several problem sizes and tabulate errors.
    Sweep {
        config: PathBuf,
        /// Which size parameter to vary.
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma-separated list of sizes, solved in the given order.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Args)]
struct OverrideArgs {
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Convergence threshold on the gradient max-norm.
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Iteration budget.
    #[arg(long)]
    max_iters: Option<usize>,
}

impl From<OverrideArgs> for Overrides {
    fn from(args: OverrideArgs) -> Self {
        Overrides {
            output_dir: args.output_dir,
            grad_tol: args.grad_tol,
            max_iters: args.max_iters,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    #[value(name = "N")]
    N,
    #[value(name = "N_T")]
    NT,
}

impl From<AxisArg> for SweepAxis {
    fn from(axis: AxisArg) -> Self {
        match axis {
            AxisArg::N => SweepAxis::Particles,
            AxisArg::NT => SweepAxis::TimeSteps,
        }
    }
}

fn main() -> ExitCode {
    // Usage errors are configuration errors (exit 1); --help and --version
    // exit 0. clap's defaults would report 2, which solve reserves for
    // non-convergence.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Solve { config, overrides } => cmd_solve(&config, &overrides.into()),
        Command::Diagnose { config, overrides } => cmd_diagnose(&config, &overrides.into()),
        Command::Sweep { config, axis, values, overrides } => {
            cmd_sweep(&config, axis.into(), &values, &overrides.into())
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
