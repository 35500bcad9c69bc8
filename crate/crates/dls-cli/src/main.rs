use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dls_cli::commands::{cmd_check, cmd_plan, cmd_simulate, cmd_sweep, CliOverrides};
use dls_cli::{exit_codes, CmdError};
use dls_core::frames::Twist;

/// Dual-limit-surface in-hand regrasp toolkit: margin checks, planning,
/// stick/slip rollouts, and experiment sweeps.
#[derive(Parser)]
#[command(name = "dls", version, about)]
struct Cli {
    /// Verbose logging (the DLS_LOG env var takes precedence).
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print every slippage-free margin and the contact-mode verdict for
    /// one twist.
    Check {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Twist x component [m/step].
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        vx: f64,
        /// Twist y component [m/step].
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        vy: f64,
        /// Twist angular component [deg/step].
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        omega_deg: f64,
    },
    /// Plan a trajectory; writes plan.csv, baseline.csv, summary.txt,
    /// and trajectory.svg.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Seed for the solver's multi-start perturbations.
        #[arg(long)]
        seed: Option<u64>,
        /// Slippage-free margin band override.
        #[arg(long)]
        margin_eps: Option<f64>,
        /// Horizon override (steps per waypoint leg, even).
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Roll a stored plan CSV through the stick/slip oracle.
    Simulate {
        /// Plan CSV (as written by `dls plan`).
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a suite (objects x paths x inclines), ours vs baseline, and
    /// aggregate the results table.
    Sweep {
        /// Suite JSON file.
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        margin_eps: Option<f64>,
        #[arg(long)]
        horizon: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<i32, CmdError> {
    match cli.command {
        Command::Check {
            scenario,
            vx,
            vy,
            omega_deg,
        } => {
            let report = cmd_check(&scenario, Twist::new(vx, vy, omega_deg.to_radians()))?;
            print!("{report}");
            Ok(exit_codes::OK)
        }
        Command::Plan {
            scenario,
            out,
            seed,
            margin_eps,
            horizon,
        } => {
            let overrides = CliOverrides {
                seed,
                margin_eps,
                horizon,
            };
            let outcome = cmd_plan(&scenario, &out, &overrides)?;
            println!(
                "plan: {} steps over {} legs, objective {:.6e}, converged {}",
                outcome.plan.twists.len(),
                outcome.plan.marks.len(),
                outcome.plan.objective_value,
                outcome.plan.converged
            );
            println!("wrote plan.csv, baseline.csv, summary.txt, trajectory.svg to {}", out.display());
            if outcome.plan.converged {
                Ok(exit_codes::OK)
            } else {
                eprintln!("solver did not converge; outputs carry the best iterate");
                Ok(exit_codes::NOT_CONVERGED)
            }
        }
        Command::Simulate {
            plan,
            scenario,
            out,
        } => {
            let outcome = cmd_simulate(&plan, &scenario, &out)?;
            println!(
                "rollout: {} steps, {} slip events, final error left {:.3} mm / {:.3} deg, \
                 right {:.3} mm / {:.3} deg",
                outcome.rollout.modes.len(),
                outcome.rollout.slip_events,
                outcome.rollout.final_error_left.0 * 1000.0,
                outcome.rollout.final_error_left.1.to_degrees(),
                outcome.rollout.final_error_right.0 * 1000.0,
                outcome.rollout.final_error_right.1.to_degrees(),
            );
            println!("wrote rollout.csv, summary.txt to {}", out.display());
            Ok(exit_codes::OK)
        }
        Command::Sweep {
            suite,
            out,
            seed,
            margin_eps,
            horizon,
        } => {
            let overrides = CliOverrides {
                seed,
                margin_eps,
                horizon,
            };
            let outcome = cmd_sweep(&suite, &out, &overrides)?;
            print!("{}", outcome.table.aligned_text());
            println!("wrote results.csv, results.txt, cells.csv to {}", out.display());
            Ok(exit_codes::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DLS_LOG", default_level))
        .init();

    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
