use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use modeshift_cli::pipeline;
use modeshift_cli::CliError;

/// Transit mode-shift scenario simulator.
#[derive(Parser)]
#[command(name = "modeshift", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Pipeline configuration (JSON). Relative paths inside it resolve
    /// against its own directory.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override; defaults to the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and cross-check every input, listing all problems found.
    Validate(StageArgs),
    /// Write the mode-shift arithmetic table (no simulation).
    ScenarioTable(StageArgs),
    /// Expand the OD matrices into a trip table CSV.
    GenDemand(StageArgs),
    /// Simulate the base case and write trajectory + emission exports.
    Simulate(StageArgs),
    /// Run the whole chain: base + all scenarios, comparison and chart.
    RunPipeline(StageArgs),
    /// Rebuild comparison and chart files from existing series exports.
    Report(StageArgs),
}

fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    match cli.command {
        Command::Validate(a) => pipeline::cmd_validate(&a.config),
        Command::ScenarioTable(a) => pipeline::cmd_scenario_table(&a.config, a.out.as_deref()),
        Command::GenDemand(a) => pipeline::cmd_gen_demand(&a.config, a.out.as_deref(), a.seed),
        Command::Simulate(a) => pipeline::cmd_simulate(&a.config, a.out.as_deref(), a.seed),
        Command::RunPipeline(a) => {
            pipeline::cmd_run_pipeline(&a.config, a.out.as_deref(), a.seed)
        }
        Command::Report(a) => pipeline::cmd_report(&a.config, a.out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(messages) => {
            for line in messages {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
