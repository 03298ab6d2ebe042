use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qinterp_cli::{cmd_decide, cmd_decide_batch, cmd_screen, cmd_verify, Flags, Report};

/// Decide whether a quantum channel maps given states to given targets.
#[derive(Parser)]
#[command(name = "qinterp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide feasibility and print a certificate (exit 0/1/2 for FEASIBLE/INFEASIBLE/INDETERMINATE).
    Decide {
        /// Problem files; `-` reads standard input.
        #[arg(required = true)]
        problems: Vec<String>,
        /// Worker threads when several files are given.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        tolerances: Tolerances,
    },
    /// Check a channel (or a certificate containing one) against a problem.
    Verify {
        problem: String,
        channel: String,
        #[command(flatten)]
        tolerances: Tolerances,
    },
    /// Run the necessary-condition screens only (exit 1 if one fails).
    Screen {
        problem: String,
        #[command(flatten)]
        tolerances: Tolerances,
    },
}

#[derive(Args)]
struct Tolerances {
    /// Residual accepted when verifying a constructed channel.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap for the projection methods.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Violation a screen tolerates before failing.
    #[arg(long)]
    boundary_tol: Option<f64>,
    /// Skip the fast paths and use the Choi-matrix oracle.
    #[arg(long)]
    oracle: bool,
}

impl From<Tolerances> for Flags {
    fn from(t: Tolerances) -> Self {
        Flags {
            tol: t.tol,
            max_iter: t.max_iter,
            boundary_tol: t.boundary_tol,
            oracle: t.oracle,
        }
    }
}

fn emit(r: Report) -> ExitCode {
    // A closed pipe is not worth a panic.
    let _ = std::io::stdout().write_all(r.stdout.as_bytes());
    let _ = std::io::stderr().write_all(r.stderr.as_bytes());
    ExitCode::from(r.code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                qinterp_cli::EXIT_INVALID as u8
            } else {
                0
            });
        }
    };
    let report = match cli.command {
        Command::Decide {
            problems,
            jobs,
            tolerances,
        } => {
            let flags = tolerances.into();
            if problems.len() == 1 {
                cmd_decide(&problems[0], &flags)
            } else {
                cmd_decide_batch(&problems, &flags, jobs)
            }
        }
        Command::Verify {
            problem,
            channel,
            tolerances,
        } => cmd_verify(&problem, &channel, &tolerances.into()),
        Command::Screen {
            problem,
            tolerances,
        } => cmd_screen(&problem, &tolerances.into()),
    };
    emit(report)
}
