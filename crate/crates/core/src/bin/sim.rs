use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use xxz_sim::scenarios::{run, write_outputs, ScenarioConfig, ScenarioId};
use xxz_sim::SimError;

#[derive(Parser)]
#[command(
    name = "sim",
    version,
    about = "Floquet-engineered XXZ dynamics of Rydberg atom arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its result files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the number of shots in the config file.
        #[arg(long)]
        shots: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write SVG plots.
        #[arg(long)]
        svg: bool,
    },
    /// List the available scenarios.
    ListScenarios,
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<ScenarioConfig, SimError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text)
}

fn execute(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            shots,
            out,
            svg,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(s) = shots {
                cfg.shots = s;
            }
            cfg.validate()?;
            let result = run(&cfg)?;
            let files = write_outputs(&result, &out, svg)?;
            println!("{}", files.series.display());
            println!("{}", files.summary.display());
            for p in files.density.iter().chain(&files.svg) {
                println!("{}", p.display());
            }
        }
        Command::ListScenarios => {
            for id in ScenarioId::ALL {
                println!("{:<20} {}", id.name(), id.description());
            }
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!("{}: ok", cfg.scenario.name());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
