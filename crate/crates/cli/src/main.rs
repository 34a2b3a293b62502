use clap::{Parser, Subcommand};
use coordfeas_cli::commands::{self, RunArgs};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "coordfeas", version, about = "Coordination feasibility checks and trajectory generation for nonholonomic vehicle groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide feasibility at the initial state and print the report as JSON.
    Check {
        file: PathBuf,
        /// Time at which time-varying references are evaluated.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        at: f64,
    },
    /// Simulate a scenario, writing a CSV log and a JSON report.
    Run {
        file: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare closed-form motion families with the numerical engine.
    Bench {
        #[arg(long, default_value_t = commands::DEFAULT_BENCH_SEED)]
        seed: u64,
        /// Perturb one closed-form vector to exercise the failure path.
        #[arg(long, hide = true)]
        corrupt: bool,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COORDFEAS_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { commands::EXIT_INPUT } else { commands::EXIT_OK };
            std::process::exit(code);
        }
    };
    let code = commands::with_stdio(|out, err| match &cli.command {
        Command::Check { file, at } => commands::check(file, *at, out, err),
        Command::Run { file, csv, report } => commands::run(
            RunArgs {
                path: file,
                csv: csv.as_deref(),
                report: report.as_deref(),
            },
            out,
            err,
        ),
        Command::Bench { seed, corrupt } => commands::bench(*seed, *corrupt, out),
    });
    std::process::exit(code);
}
