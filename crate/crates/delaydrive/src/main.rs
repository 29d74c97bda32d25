use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use delaydrive::config::ScenarioConfig;
use delaydrive::metrics::compute_metrics;
use delaydrive::runner::{run, sweep_alpha};
use delaydrive::{ConfigError, Error};

#[derive(Parser)]
#[command(name = "delaydrive", version)]
#[command(about = "Deterministic closed-loop simulator for a differential-drive robot with input time delay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario; optionally export the trace and print metrics
    Run(RunArgs),
    /// Re-run a scenario over several barrier-decay values
    Sweep(SweepArgs),
    /// Parse and validate a scenario file without running it
    Validate { config: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Write the full trace as CSV
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Print run metrics as key=value lines
    #[arg(long)]
    metrics: bool,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    /// Parameter to sweep; only `alpha` is supported
    #[arg(long)]
    param: String,
    /// Comma-separated parameter values
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                Error::Run(_) => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = ScenarioConfig::from_path(&args.config)?;
            let trace = run(&cfg)?;
            if let Some(path) = &args.out {
                trace.export_csv(path)?;
            }
            println!("samples={}", trace.samples.len());
            if args.metrics && !trace.samples.is_empty() {
                print!("{}", compute_metrics(&trace, &cfg.trajectory()).to_key_value_lines());
            }
            Ok(())
        }
        Command::Sweep(args) => {
            if args.param != "alpha" {
                return Err(ConfigError::invalid("param", "only `alpha` can be swept").into());
            }
            let cfg = ScenarioConfig::from_path(&args.config)?;
            for (alpha, m) in sweep_alpha(&cfg, &args.values)? {
                println!(
                    "alpha={alpha} b_max={:.9e} violations={} override_intervals={}",
                    m.barrier_max, m.violations, m.override_intervals
                );
            }
            Ok(())
        }
        Command::Validate { config } => {
            ScenarioConfig::from_path(&config)?;
            println!("ok");
            Ok(())
        }
    }
}
