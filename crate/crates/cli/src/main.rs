use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trophic::scenario::presets::load_preset;
use trophic::scenario::{parse_config, run_task, ScenarioConfig, ScenarioError, TaskKind};

/// Predator-prey simulations and analyses driven by JSON scenarios.
///
/// Exit status: 0 success, 1 configuration or usage error, 2 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "trophic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the model over the configured time span.
    Simulate(Source),
    /// Locate equilibria and classify them by their eigenvalues.
    Equilibria(Source),
    /// Period-averaged densities against the theoretical means.
    Averages(Source),
    /// Means of the harvested system for a list of fishing efforts.
    HarvestLaw(Source),
    /// Search for an attracting cycle of a two-species model.
    LimitCycle(Source),
    /// Predator share of the catch under peace- and war-time fishing.
    Dancona(Source),
}

#[derive(Debug, Args)]
struct Source {
    /// Scenario file (JSON).
    #[arg(conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario: lv-default, rm-cycle, rm-stable, dancona-default, chain-default.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory; overrides the scenario's `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Report written files and timing on stderr.
    #[arg(short, long)]
    verbose: bool,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn load(source: &Source) -> Result<ScenarioConfig, Failure> {
    match (&source.config, &source.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
        }
        (None, Some(name)) => load_preset(name).map_err(|e| Failure::Config(e.to_string())),
        (None, None) => Err(Failure::Config("no scenario given: pass a config path or --preset".into())),
    }
}

fn run(kind: TaskKind, source: &Source) -> Result<(), Failure> {
    let config = load(source)?;
    let out_dir = source.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
    let started = std::time::Instant::now();
    let output = run_task(&config, kind, &out_dir)?;
    print!("{}", output.summary);
    if source.verbose {
        for f in &output.files {
            eprintln!("wrote {}", f.display());
        }
        eprintln!("{} finished in {:.3} s", kind.name(), started.elapsed().as_secs_f64());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (kind, source) = match &cli.command {
        Command::Simulate(s) => (TaskKind::Simulate, s),
        Command::Equilibria(s) => (TaskKind::Equilibria, s),
        Command::Averages(s) => (TaskKind::Averages, s),
        Command::HarvestLaw(s) => (TaskKind::HarvestLaw, s),
        Command::LimitCycle(s) => (TaskKind::LimitCycle, s),
        Command::Dancona(s) => (TaskKind::Dancona, s),
    };
    match run(kind, source) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn subcommand_names_match_task_names() {
        let cmd = Cli::command();
        let names: Vec<&str> = cmd.get_subcommands().map(|s| s.get_name()).collect();
        let tasks: Vec<&str> = TaskKind::ALL.iter().map(|k| k.name()).collect();
        assert_eq!(names, tasks);
    }
}
