//! Command-line front end for the `hetbid` simulator.
//!
//! `hetbid run` plays one scenario and writes `metrics.csv`, `rounds.jsonl`
//! and `summary.json`; `hetbid sweep` replays it over a grid of horizons.
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 LLM endpoint unreachable.

pub mod output;
pub mod scenario;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hetbid::engine::Simulator;
use hetbid::llm_agent::{check_reachable, LlmAgent};
use hetbid::{SimulationConfig, SimulationError, SimulationOutput};
use thiserror::Error;

pub use output::OutputFormat;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("LLM endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Unreachable(_) => 3,
            CliError::Io(_) | CliError::Simulation(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hetbid",
    version,
    about = "Repeated multi-channel spectrum auctions in a two-tier HetNet"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario.
    Run(RunArgs),
    /// Simulate one scenario at several episode horizons.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Scenario1,
    Scenario2,
}

impl Preset {
    pub fn source(self) -> &'static str {
        match self {
            Preset::Scenario1 => scenario::SCENARIO1,
            Preset::Scenario2 => scenario::SCENARIO2,
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["config", "preset"])))]
pub struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Master seed; overrides the scenario.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo runs; overrides the scenario.
    #[arg(long)]
    pub runs: Option<u32>,
    /// Never contact the LLM endpoint; LLM bidders use the foresight policy.
    #[arg(long)]
    pub offline: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Both)]
    pub format: OutputFormat,
    /// Worker threads for independent runs (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Episode horizon T; overrides the scenario.
    #[arg(long)]
    pub episodes: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Episode horizons to simulate.
    #[arg(long, value_delimiter = ',', default_values_t = [5u32, 10, 20, 40, 80])]
    pub horizons: Vec<u32>,
}

fn read_source(common: &CommonArgs) -> Result<SimulationConfig, CliError> {
    match (&common.config, common.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            scenario::load_scenario(&text).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
                other => other,
            })
        }
        (None, Some(preset)) => scenario::load_scenario(preset.source()),
        (None, None) => Err(CliError::Config(
            "one of --config or --preset is required".into(),
        )),
    }
}

/// Resolves the scenario and applies command-line overrides, then validates.
pub fn resolve_config(
    common: &CommonArgs,
    episodes: Option<u32>,
) -> Result<SimulationConfig, CliError> {
    let mut config = read_source(common)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(runs) = common.runs {
        config.runs = runs;
    }
    if let Some(t) = episodes {
        config.episodes = t;
    }
    config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

/// Live agent for `llm` bidders, or `None` when offline or when nobody needs one.
pub fn connect_agent(
    config: &SimulationConfig,
    offline: bool,
) -> Result<Option<LlmAgent>, CliError> {
    if offline || !config.uses_llm() {
        return Ok(None);
    }
    check_reachable(&config.llm)
        .map_err(|e| CliError::Unreachable(format!("{}: {e}", config.llm.base_url)))?;
    log::info!(
        "using LLM endpoint {} (model {})",
        config.llm.base_url,
        config.llm.model
    );
    Ok(Some(LlmAgent::http(config.llm.clone())))
}

fn simulate(
    config: &SimulationConfig,
    agent: Option<&LlmAgent>,
    jobs: usize,
) -> Result<SimulationOutput, CliError> {
    let mut sim = Simulator::new(config).with_jobs(jobs);
    if let Some(agent) = agent {
        sim = sim.with_agent(agent);
    }
    Ok(sim.run()?)
}

pub fn run_command(args: &RunArgs) -> Result<(), CliError> {
    let config = resolve_config(&args.common, args.episodes)?;
    let agent = connect_agent(&config, args.common.offline)?;
    let out = simulate(&config, agent.as_ref(), args.common.jobs)?;
    output::write_run(
        &args.common.out,
        args.common.format,
        &config,
        agent.is_none(),
        &out,
    )?;
    log_classes(&out);
    log::info!("wrote results to {}", args.common.out.display());
    Ok(())
}

pub fn sweep_command(args: &SweepArgs) -> Result<(), CliError> {
    if args.horizons.is_empty() {
        return Err(CliError::Config("at least one horizon is required".into()));
    }
    let base = resolve_config(&args.common, None)?;
    let agent = connect_agent(&base, args.common.offline)?;
    let mut rows = Vec::new();
    for &t in &args.horizons {
        let config = SimulationConfig {
            episodes: t,
            ..base.clone()
        };
        config
            .validate()
            .map_err(|e| CliError::Config(format!("horizon {t}: {e}")))?;
        let out = simulate(&config, agent.as_ref(), args.common.jobs)?;
        log::info!("horizon {t}: {} runs", out.runs.len());
        rows.extend(output::sweep_rows(t, &out));
    }
    output::write_sweep(
        &args.common.out,
        args.common.format,
        &base,
        agent.is_none(),
        &args.horizons,
        &rows,
    )?;
    log::info!("wrote sweep to {}", args.common.out.display());
    Ok(())
}

fn log_classes(out: &SimulationOutput) {
    for c in &out.report.classes {
        log::info!(
            "{:<9} n={:<4} utility {:.3}  channels {:.2}  precision {}",
            c.strategy.as_str(),
            c.samples,
            c.mean_gross_utility,
            c.mean_channels_won,
            c.mean_bid_precision
                .map_or("-".into(), |p| format!("{p:.3}")),
        );
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(args) => run_command(args),
        Command::Sweep(args) => sweep_command(args),
    }
}

/// Parses `args` (including the program name) and runs, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
