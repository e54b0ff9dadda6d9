//! Command-line front end for the recare library.

mod commands;
mod config;
mod io;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::FileSettings;

/// Command error distinguishing usage mistakes (exit 2) from runtime
/// failures (exit 1).
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub usage: bool,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError {
            message: message.into(),
            usage: true,
        }
    }

    pub fn runtime(message: impl Into<String>) -> CliError {
        CliError {
            message: message.into(),
            usage: false,
        }
    }
}

impl From<recare::Error> for CliError {
    fn from(e: recare::Error) -> CliError {
        CliError::runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "recare",
    version,
    about = "Realized-CARE tail-risk modelling: measures, estimation, forecasting, backtesting",
    arg_required_else_help = true
)]
struct Cli {
    /// Worker threads (default: RECARE_THREADS env var, else all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat `key = value` config file; command-line flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Daily realized measures from intraday OHLC bars
    Measures(commands::measures::Args),
    /// Simulate replications from the square-root Realized-GARCH process
    Simulate(commands::simulate::Args),
    /// Fit a Re-CARE model (level search + adaptive MCMC)
    Fit(commands::fit::Args),
    /// Expectile-level search traces (two-step or full grid)
    Tausearch(commands::tausearch::Args),
    /// Rolling one-step-ahead VaR/ES forecasts
    Forecast(commands::forecast::Args),
    /// Combine forecast files day-wise (mean/median/min/max)
    Combine(commands::combine::Args),
    /// Backtest forecast files (UC, CC, DQ, VQR, ES t-test, joint loss)
    Backtest(commands::backtest::Args),
    /// Model confidence set over forecast files
    Mcs(commands::mcs::Args),
    /// Run the simulation study and summarize both estimators
    #[command(name = "reproduce-table1")]
    ReproduceTable1(commands::table1::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("RECARE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if t == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        // Ignore failure: the global pool can only be set once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }

    let settings = match &cli.config {
        Some(path) => match FileSettings::load(path) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {}", e.message);
                return ExitCode::from(2);
            }
        },
        None => FileSettings::default(),
    };

    let result = match cli.command {
        Command::Measures(args) => commands::measures::run(args, &settings),
        Command::Simulate(args) => commands::simulate::run(args, &settings),
        Command::Fit(args) => commands::fit::run(args, &settings),
        Command::Tausearch(args) => commands::tausearch::run(args, &settings),
        Command::Forecast(args) => commands::forecast::run(args, &settings),
        Command::Combine(args) => commands::combine::run(args, &settings),
        Command::Backtest(args) => commands::backtest::run(args, &settings),
        Command::Mcs(args) => commands::mcs::run(args, &settings),
        Command::ReproduceTable1(args) => commands::table1::run(args, &settings, threads),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(if e.usage { 2 } else { 1 })
        }
    }
}
