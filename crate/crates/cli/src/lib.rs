//! Operator entry point: serve the API, run the aggregation job, generate synthetic tray
//! feeds and simulate a campaign.

pub mod client;
pub mod commands;
pub mod simulate;

use std::ffi::OsString;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "foodwise", version, about = "FoodWise food-waste campaign service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API (and the daily scheduler when enabled).
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Write one day of synthetic tray observations as a JSON batch.
    GenTrays {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        date: NaiveDate,
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Output path, or `-` for stdout.
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Recompute the cached dashboard aggregates for one date.
    Aggregate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        date: NaiveDate,
    },
    /// Simulate a campaign end to end through the HTTP API.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "-")]
        out: String,
    },
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

fn execute(command: Command) -> anyhow::Result<()> {
    let env = |k: &str| std::env::var(k).ok();
    match command {
        Command::Serve { config, port } => runtime()?.block_on(commands::serve(&config, port, env)),
        Command::GenTrays { seed, date, profile, out } => {
            let n = commands::gen_trays(seed, date, profile.as_deref(), &out)?;
            if out != "-" {
                eprintln!("wrote {n} trays to {out}");
            }
            Ok(())
        }
        Command::Aggregate { config, date } => {
            let daily = commands::aggregate(&config, date, env)?;
            println!("{}", serde_json::to_string_pretty(&daily)?);
            Ok(())
        }
        Command::Simulate { spec, out } => {
            let report = runtime()?.block_on(commands::simulate(&spec, &out))?;
            if out != "-" {
                eprintln!(
                    "simulated {} users, {} records, {} reward-eligible in {} ms",
                    report.users, report.records, report.reward_eligible, report.runtime_ms
                );
            }
            Ok(())
        }
    }
}

fn runtime() -> std::io::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build()
}
