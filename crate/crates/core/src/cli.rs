//! Command-line front end: `run`, `ensemble` and `compare-modes`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{parse_config, OutputFormat, RunConfig};
use crate::engine::{self, EngineConfig, Mode, RunStats};
use crate::ensemble::{self, EnsembleResult};
use crate::error::{Error, Result};
use crate::grid::{discretize, MassGrid};
use crate::output::{self, Metadata};
use crate::rng;
use crate::spectrum::SpectrumState;

#[derive(Debug, Parser)]
#[command(name = "coalesce", version, about = "Stochastic bin coalescence simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a single realization.
    Run(CommonArgs),
    /// Run `ensemble.realizations` independent realizations and aggregate them.
    Ensemble(CommonArgs),
    /// Run the same seeds in refined and legacy mode and count violations.
    CompareModes(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Write every collision event to events.csv.
    #[arg(long)]
    pub events_log: bool,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

impl CommonArgs {
    /// Reads the config file and applies command-line overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = parse_config(&self.config)?;
        if let Some(seed) = self.seed {
            config.engine.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output.dir = out.clone();
        }
        if let Some(mode) = self.mode {
            config.engine.mode = mode;
        }
        if self.events_log {
            config.engine.record_events = true;
        }
        if let Some(format) = self.format {
            config.output.format = format;
        }
        config.validate()?;
        Ok(config)
    }
}

struct Prepared {
    grid: MassGrid,
    initial: SpectrumState,
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    let grid = config.grid.build()?;
    let initial = discretize(&config.initial, &grid)?;
    output::ensure_dir(&config.output.dir)?;
    std::fs::write(config.output.dir.join("config.json"), config.to_json()).map_err(|source| {
        Error::Io {
            path: config.output.dir.join("config.json"),
            source,
        }
    })?;
    Ok(Prepared { grid, initial })
}

/// Runs one realization and writes snapshots, the violation log, the
/// optional event log and `run_summary.json`.
pub fn cmd_run(config: &RunConfig) -> Result<RunStats> {
    let p = prepare(config)?;
    let stats = engine::run(&config.engine, &p.initial, &p.grid, &config.kernel)?;
    let meta = Metadata::new(config);
    let dir = &config.output.dir;
    output::write_snapshots(dir, config.output.format, &meta, &p.grid, &stats.snapshots)?;
    output::write_violations(&dir.join("violations.csv"), &meta, &stats.violations)?;
    if config.engine.record_events {
        output::write_events(&dir.join("events.csv"), &meta, &stats.events)?;
    }
    output::write_run_summary(&dir.join("run_summary.json"), &meta, &stats)?;
    Ok(stats)
}

pub fn cmd_ensemble(config: &RunConfig) -> Result<EnsembleResult> {
    let p = prepare(config)?;
    let n = config.ensemble.realizations;
    let engine_cfg = EngineConfig {
        record_events: false,
        ..config.engine.clone()
    };
    let result = ensemble::run_ensemble(&engine_cfg, &p.initial, &p.grid, &config.kernel, n, config.engine.seed)?;
    let meta = Metadata::new(config).with_realizations(n);
    output::write_ensemble(&config.output.dir, &meta, &result)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub realization: usize,
    pub seed: u64,
    pub refined_violations: usize,
    pub legacy_violations: usize,
    pub refined_events: u64,
    pub legacy_events: u64,
}

pub const COMPARE_COLUMNS: &[&str] = &[
    "realization",
    "seed",
    "refined_violations",
    "legacy_violations",
    "refined_events",
    "legacy_events",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub rows: Vec<CompareRow>,
    pub refined_total: usize,
    pub legacy_total: usize,
    pub legacy_runs_affected: usize,
    pub verdict: String,
}

impl CompareSummary {
    pub fn from_rows(rows: Vec<CompareRow>) -> Self {
        let refined_total = rows.iter().map(|r| r.refined_violations).sum();
        let legacy_total = rows.iter().map(|r| r.legacy_violations).sum();
        let legacy_runs_affected = rows.iter().filter(|r| r.legacy_violations > 0).count();
        let n = rows.len();
        let verdict = if refined_total > 0 {
            format!("FAULT: refined mode produced {refined_total} violations over {n} seeds")
        } else if legacy_total == 0 {
            format!("INCONCLUSIVE: neither mode produced violations over {n} seeds")
        } else {
            format!(
                "CONFIRMED: refined 0 violations, legacy {legacy_total} violations in {legacy_runs_affected} of {n} seeds"
            )
        };
        Self {
            rows,
            refined_total,
            legacy_total,
            legacy_runs_affected,
            verdict,
        }
    }
}

fn mode_run(base: &EngineConfig, seed: u64, mode: Mode, p: &Prepared, config: &RunConfig) -> Result<RunStats> {
    let cfg = EngineConfig {
        seed,
        mode,
        record_events: false,
        ..base.clone()
    };
    engine::run(&cfg, &p.initial, &p.grid, &config.kernel)
}

/// Runs each of `ensemble.realizations` seeds in both modes. Legacy
/// violations are the measurement; a refined-mode breach aborts with an error.
pub fn cmd_compare_modes(config: &RunConfig) -> Result<CompareSummary> {
    let p = prepare(config)?;
    let n = config.ensemble.realizations;
    let rows: Vec<Result<CompareRow>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let seed = rng::realization_seed(config.engine.seed, k);
            let tag = |e| Error::Realization {
                index: k,
                source: Box::new(e),
            };
            let refined = mode_run(&config.engine, seed, Mode::Refined, &p, config).map_err(tag)?;
            let legacy = mode_run(&config.engine, seed, Mode::Legacy, &p, config).map_err(tag)?;
            Ok(CompareRow {
                realization: k,
                seed,
                refined_violations: refined.violations.len(),
                legacy_violations: legacy.violations.len(),
                refined_events: refined.ledger.events,
                legacy_events: legacy.ledger.events,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = CompareSummary::from_rows(rows);

    let meta = Metadata::new(config).with_realizations(n);
    let dir = &config.output.dir;
    output::write_csv(&dir.join("compare_modes.csv"), &meta, COMPARE_COLUMNS, &summary.rows)?;
    output::write_json(&dir.join("compare_modes.json"), &meta, &summary)?;
    std::fs::write(dir.join("verdict.txt"), format!("{}\n", summary.verdict)).map_err(|source| Error::Io {
        path: dir.join("verdict.txt"),
        source,
    })?;
    Ok(summary)
}

/// Dispatches a parsed command line; returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Run(args) => args.resolve().and_then(|c| {
            let stats = cmd_run(&c)?;
            println!(
                "{} events, {} violations, termination {:?}, outputs in {}",
                stats.ledger.events,
                stats.violations.len(),
                stats.termination,
                c.output.dir.display()
            );
            Ok(())
        }),
        Command::Ensemble(args) => args.resolve().and_then(|c| {
            let r = cmd_ensemble(&c)?;
            println!(
                "{} realizations, {} events, {} violations, outputs in {}",
                r.realizations,
                r.total_events,
                r.total_violations,
                c.output.dir.display()
            );
            Ok(())
        }),
        Command::CompareModes(args) => args.resolve().and_then(|c| {
            let s = cmd_compare_modes(&c)?;
            println!("{}", s.verdict);
            Ok(())
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            1
        }
    }
}
