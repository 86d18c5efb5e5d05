//! `semiactive` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Globals};
use config::Mode;

#[derive(Parser)]
#[command(name = "semiactive", version, about = "Quarter-car semi-active suspension simulator")]
struct Cli {
    #[command(flatten)]
    globals: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML config (or a run manifest.json); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the Brownian road seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the plant mode.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
}

#[derive(Subcommand)]
enum Command {
    /// Single closed-loop run: trajectory.csv and metrics.json.
    Simulate,
    /// All five controllers on the same bump.
    BumpBench,
    /// Stepped-sine frequency response of all five controllers.
    Sweep,
    /// Tune gains on a Brownian road ensemble.
    Tune {
        /// Comma-separated road seeds, replacing `tune.seeds`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Print the undamped natural frequencies.
    Freqs,
    /// Road profile utilities.
    Road {
        #[command(subcommand)]
        action: RoadAction,
    },
}

#[derive(Subcommand)]
enum RoadAction {
    /// Write the configured road as road.csv.
    Gen,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let GlobalArgs { config, out, seed, mode } = cli.globals;
    let g = Globals { config, out, seed, mode };
    match cli.command {
        Command::Simulate => commands::simulate_cmd(&g),
        Command::BumpBench => commands::bump_bench_cmd(&g),
        Command::Sweep => commands::sweep_cmd(&g),
        Command::Tune { seeds } => commands::tune_cmd(&g, seeds),
        Command::Freqs => {
            print!("{}", commands::freqs_cmd(&g)?);
            Ok(())
        }
        Command::Road { action: RoadAction::Gen } => commands::road_gen_cmd(&g),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { commands::EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("semiactive: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
