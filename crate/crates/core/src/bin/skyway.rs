use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use skyway_core::cli::{
    self, CalibrateArgs, CliError, MatrixArgs, PlanArgs, SimulateArgs,
};

#[derive(Parser)]
#[command(
    name = "skyway",
    version,
    about = "Multi-drone skyway delivery simulator, planner, and dataset generator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one fleet simulation and write logs, a summary, and result JSON
    Simulate {
        /// Network JSON file
        #[arg(long)]
        network: PathBuf,
        /// Missions JSON file
        #[arg(long)]
        missions: PathBuf,
        /// Wind speed in km/h (0 = calm)
        #[arg(long, default_value_t = 0.0)]
        wind_speed: f64,
        /// Direction the wind blows from: N, E, S, W, or degrees
        #[arg(long)]
        wind_dir: Option<String>,
        /// Energy model JSON file (defaults apply when omitted)
        #[arg(long)]
        model: Option<PathBuf>,
        /// Allocation policy
        #[arg(long, default_value = "nearest-first")]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the scenario-matrix dataset tree and index.csv
    Matrix {
        /// Matrix config JSON (paper defaults when omitted)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Parallel runs
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Plan a time-optimal itinerary (or a fleet plan) and print it as JSON
    Plan {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        missions: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        wind_speed: f64,
        #[arg(long)]
        wind_dir: Option<String>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Pad timeline JSON constraining admissions (single-mission plans)
        #[arg(long)]
        timeline: Option<PathBuf>,
    },
    /// Fit energy-model drain parameters from a dataset tree and print the
    /// model as JSON
    Calibrate {
        /// Dataset root (the layout written by `matrix`)
        #[arg(long)]
        logs: PathBuf,
        /// Base model providing recharge and kinematic settings
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            network,
            missions,
            wind_speed,
            wind_dir,
            model,
            policy,
            seed,
            out,
        } => {
            let args = SimulateArgs {
                network,
                missions,
                wind: cli::parse_wind(wind_speed, wind_dir.as_deref())?,
                model,
                policy: cli::parse_policy(&policy)?,
                seed,
                out,
            };
            cli::cmd_simulate(&args)?;
            Ok(())
        }
        Command::Matrix {
            config,
            model,
            seed,
            out,
            jobs,
        } => {
            let args = MatrixArgs {
                config,
                model,
                seed,
                out,
                jobs,
            };
            cli::cmd_matrix(&args)?;
            Ok(())
        }
        Command::Plan {
            network,
            missions,
            wind_speed,
            wind_dir,
            model,
            timeline,
        } => {
            let args = PlanArgs {
                network,
                missions,
                wind: cli::parse_wind(wind_speed, wind_dir.as_deref())?,
                model,
                timeline,
            };
            println!("{}", cli::cmd_plan(&args)?);
            Ok(())
        }
        Command::Calibrate { logs, model } => {
            let args = CalibrateArgs { logs, model };
            println!("{}", cli::cmd_calibrate(&args)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
