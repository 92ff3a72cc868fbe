//! Scenario-driven command-line front end for the library.
//!
//! Exit codes: 0 success, 2 configuration problem, 3 precondition failure,
//! 4 internal consistency violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ghm_waves::scenario::{
    parse_scenario, run_experiment, run_montecarlo, replicate_paper_scenario, Analyses,
    ExperimentError, InitialSpec, Overrides, Scenario, ScenarioError,
};

#[derive(Parser)]
#[command(name = "ghm", version, about = "Cyclic wave automata on sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of ticks to run.
    #[arg(long)]
    ticks: Option<u64>,
    /// Override the per-tick link survival probability.
    #[arg(long)]
    ps: Option<f64>,
    /// Override the evasion grid resolution.
    #[arg(long)]
    grid: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the automaton and dump snapshots and events.
    Simulate(Common),
    /// Run and additionally report continuity, defects, degrees, forest,
    /// barriers, and the cohomology class.
    Analyze(Common),
    /// Synthesize the scenario's programmed initial state (class or waves)
    /// and verify the class survives the run.
    Program(Common),
    /// Decide the pursuit-evasion game over the run's coverage trace.
    Evade(Common),
    /// Run the scenario's Monte Carlo section.
    Montecarlo(Common),
    /// Reproduce the reference large-hallway simulation (16250 nodes in a
    /// 200x200 square, n = 20, r = 1.5) with a pinned seed loop.
    ReplicatePaper {
        /// Output directory for artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Override the built-in RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of ticks to run.
        #[arg(long)]
        ticks: Option<u64>,
        /// Override the per-tick link survival probability.
        #[arg(long)]
        ps: Option<f64>,
    },
}

fn overrides(c: &Common) -> Overrides {
    Overrides { seed: c.seed, ticks: c.ticks, p_s: c.ps, grid: c.grid }
}

fn load(c: &Common) -> Result<Scenario, ExperimentError> {
    parse_scenario(&c.scenario).map_err(|e| match e {
        ScenarioError::Io { .. } | ScenarioError::Parse { .. } | ScenarioError::Invalid(_) => {
            ExperimentError::Config(e.to_string())
        }
    })
}

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    match &cli.command {
        Command::Simulate(c) => {
            let scenario = load(c)?;
            run_experiment(&scenario, &c.out, &overrides(c), c.scenario.parent())?;
        }
        Command::Analyze(c) => {
            let mut scenario = load(c)?;
            scenario.analyses = Analyses {
                continuity: true,
                defects: true,
                forest: true,
                barriers: true,
                class: true,
                evasion: scenario.analyses.evasion,
            };
            run_experiment(&scenario, &c.out, &overrides(c), c.scenario.parent())?;
        }
        Command::Program(c) => {
            let mut scenario = load(c)?;
            match scenario.initial {
                InitialSpec::Class(_) | InitialSpec::Waves(_) => {}
                _ => {
                    return Err(ExperimentError::Config(
                        "program needs an initial of kind class or waves".into(),
                    ))
                }
            }
            scenario.analyses.class = true;
            scenario.analyses.defects = true;
            run_experiment(&scenario, &c.out, &overrides(c), c.scenario.parent())?;
        }
        Command::Evade(c) => {
            let mut scenario = load(c)?;
            scenario.analyses.evasion = true;
            run_experiment(&scenario, &c.out, &overrides(c), c.scenario.parent())?;
        }
        Command::Montecarlo(c) => {
            let scenario = load(c)?;
            run_montecarlo(&scenario, &c.out, &overrides(c))?;
        }
        Command::ReplicatePaper { out, seed, ticks, ps } => {
            let scenario = replicate_paper_scenario(*seed)?;
            let ov = Overrides { seed: None, ticks: *ticks, p_s: *ps, grid: None };
            run_experiment(&scenario, out, &ov, None)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ghm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
