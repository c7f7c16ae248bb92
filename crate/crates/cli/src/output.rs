//! Result files.
//!
//! `metrics.csv` holds one row per UE per run, `rounds.jsonl` one JSON object
//! per round, `summary.json` the resolved configuration with per-strategy
//! aggregates. Sweeps add `sweep.csv` / `sweep.json` with one row per
//! (horizon, run). Nothing time-dependent is written, so identical inputs give
//! byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use hetbid::engine::{ClassSummary, MetricsReport, RunInfo, SimulationOutput, UeMetrics};
use hetbid::{RoundLog, SimulationConfig, StrategyKind};
use serde::Serialize;

use crate::CliError;

/// Column order of `metrics.csv`. Stable; append only.
pub const METRICS_COLUMNS: [&str; 13] = [
    "run",
    "seed",
    "ue_id",
    "strategy",
    "episodes",
    "gross_utility",
    "net_utility",
    "channels_won",
    "bids_placed",
    "bid_precision",
    "fees_paid",
    "payments_paid",
    "fallbacks",
];

/// Per-strategy columns of `sweep.csv`, each prefixed with the strategy name.
pub const SWEEP_CLASS_COLUMNS: [&str; 6] = [
    "ues",
    "mean_gross_utility",
    "mean_net_utility",
    "mean_channels_won",
    "mean_bid_precision",
    "mean_budget_spent",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn metrics_record(m: &UeMetrics) -> [String; 13] {
    [
        m.run.to_string(),
        m.seed.to_string(),
        m.ue_id.to_string(),
        m.strategy.to_string(),
        m.episodes.to_string(),
        m.gross_utility.to_string(),
        m.net_utility.to_string(),
        m.channels_won.to_string(),
        m.bids_placed.to_string(),
        opt(m.bid_precision),
        m.fees_paid.to_string(),
        m.payments_paid.to_string(),
        m.fallbacks.to_string(),
    ]
}

pub fn write_metrics_csv(path: &Path, report: &MetricsReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(METRICS_COLUMNS)
        .map_err(|e| io_err(path, e))?;
    for row in &report.ues {
        w.write_record(metrics_record(row))
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_rounds_jsonl(path: &Path, rounds: &[RoundLog]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for log in rounds {
        serde_json::to_writer(&mut w, log).map_err(|e| io_err(path, e))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct RunSummary<'a> {
    run: u32,
    seed: u64,
    rounds_played: u32,
    ues: &'a [hetbid::engine::UeProfile],
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a SimulationConfig,
    offline: bool,
    classes: &'a [ClassSummary],
    runs: Vec<RunSummary<'a>>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path, e))?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

fn run_summaries(runs: &[RunInfo]) -> Vec<RunSummary<'_>> {
    runs.iter()
        .map(|r| RunSummary {
            run: r.run,
            seed: r.seed,
            rounds_played: r.rounds_played,
            ues: &r.ues,
        })
        .collect()
}

pub fn write_summary_json(
    path: &Path,
    config: &SimulationConfig,
    offline: bool,
    output: &SimulationOutput,
) -> Result<(), CliError> {
    let summary = Summary {
        config,
        offline,
        classes: &output.report.classes,
        runs: run_summaries(&output.runs),
    };
    write_json(path, &summary)
}

/// Writes everything a `run` produces into `dir`.
pub fn write_run(
    dir: &Path,
    format: OutputFormat,
    config: &SimulationConfig,
    offline: bool,
    output: &SimulationOutput,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_rounds_jsonl(&dir.join("rounds.jsonl"), &output.rounds)?;
    if format.csv() {
        write_metrics_csv(&dir.join("metrics.csv"), &output.report)?;
    }
    if format.json() {
        write_summary_json(&dir.join("summary.json"), config, offline, output)?;
    }
    Ok(())
}

/// Per-strategy means of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRow {
    pub strategy: StrategyKind,
    pub ues: usize,
    pub mean_gross_utility: f64,
    pub mean_net_utility: f64,
    pub mean_channels_won: f64,
    pub mean_bid_precision: Option<f64>,
    pub mean_budget_spent: f64,
}

/// One (horizon, run) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub episodes: u32,
    pub run: u32,
    pub seed: u64,
    pub rounds_played: u32,
    pub classes: Vec<ClassRow>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Splits a multi-run report into per-run rows, one class entry per strategy present.
pub fn sweep_rows(episodes: u32, output: &SimulationOutput) -> Vec<SweepRow> {
    output
        .runs
        .iter()
        .map(|info| {
            let rows: Vec<&UeMetrics> = output
                .report
                .ues
                .iter()
                .filter(|u| u.run == info.run)
                .collect();
            let classes = StrategyKind::ALL
                .iter()
                .filter_map(|&kind| {
                    let of: Vec<&UeMetrics> = rows
                        .iter()
                        .copied()
                        .filter(|u| u.strategy == kind)
                        .collect();
                    if of.is_empty() {
                        return None;
                    }
                    let col = |f: fn(&UeMetrics) -> f64| {
                        mean(&of.iter().map(|u| f(u)).collect::<Vec<_>>())
                    };
                    let precisions: Vec<f64> = of.iter().filter_map(|u| u.bid_precision).collect();
                    Some(ClassRow {
                        strategy: kind,
                        ues: of.len(),
                        mean_gross_utility: col(|u| u.gross_utility).unwrap_or(0.0),
                        mean_net_utility: col(|u| u.net_utility).unwrap_or(0.0),
                        mean_channels_won: col(|u| u.channels_won as f64).unwrap_or(0.0),
                        mean_bid_precision: mean(&precisions),
                        mean_budget_spent: col(|u| u.budget_spent().as_units()).unwrap_or(0.0),
                    })
                })
                .collect();
            SweepRow {
                episodes,
                run: info.run,
                seed: info.seed,
                rounds_played: info.rounds_played,
                classes,
            }
        })
        .collect()
}

pub fn sweep_header() -> Vec<String> {
    let mut header: Vec<String> = ["episodes", "run", "seed", "rounds_played"]
        .map(String::from)
        .into();
    for kind in StrategyKind::ALL {
        header.extend(SWEEP_CLASS_COLUMNS.iter().map(|c| format!("{kind}_{c}")));
    }
    header
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(sweep_header())
        .map_err(|e| io_err(path, e))?;
    for row in rows {
        let mut rec = vec![
            row.episodes.to_string(),
            row.run.to_string(),
            row.seed.to_string(),
            row.rounds_played.to_string(),
        ];
        for kind in StrategyKind::ALL {
            match row.classes.iter().find(|c| c.strategy == kind) {
                Some(c) => rec.extend([
                    c.ues.to_string(),
                    c.mean_gross_utility.to_string(),
                    c.mean_net_utility.to_string(),
                    c.mean_channels_won.to_string(),
                    opt(c.mean_bid_precision),
                    c.mean_budget_spent.to_string(),
                ]),
                None => rec.extend(
                    ["0".to_string()]
                        .into_iter()
                        .chain(std::iter::repeat_n(String::new(), 5)),
                ),
            }
        }
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    config: &'a SimulationConfig,
    offline: bool,
    horizons: &'a [u32],
    rows: &'a [SweepRow],
}

pub fn write_sweep(
    dir: &Path,
    format: OutputFormat,
    config: &SimulationConfig,
    offline: bool,
    horizons: &[u32],
    rows: &[SweepRow],
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    if format.csv() {
        write_sweep_csv(&dir.join("sweep.csv"), rows)?;
    }
    if format.json() {
        write_json(
            &dir.join("sweep.json"),
            &SweepSummary {
                config,
                offline,
                horizons,
                rows,
            },
        )?;
    }
    Ok(())
}
