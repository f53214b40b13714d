//! Independent realizations and their moment statistics.
//!
//! Realizations run in parallel, but their results are collected by
//! realization index and reduced sequentially in that order, so the
//! aggregate is bit-identical regardless of thread count or scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{self, EngineConfig, Mode, RunStats};
use crate::error::{Error, Result};
use crate::grid::MassGrid;
use crate::kernels::{KernelKind, KernelSpec};
use crate::rng;
use crate::spectrum::SpectrumState;

pub const MOMENT_ORDERS: usize = 4;

/// Cross-realization statistics at one snapshot time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSnapshot {
    pub time: f64,
    /// Realizations that reached this snapshot.
    pub count: usize,
    pub moment_mean: [f64; MOMENT_ORDERS],
    pub moment_variance: [f64; MOMENT_ORDERS],
    /// Per-bin mass density, g cm⁻³.
    pub mass_density_mean: Vec<f64>,
    pub mass_density_variance: Vec<f64>,
}

impl EnsembleSnapshot {
    /// Standard error of the ensemble mean of moment `k`.
    pub fn moment_standard_error(&self, k: usize) -> f64 {
        (self.moment_variance[k] / self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub realizations: usize,
    pub base_seed: u64,
    pub mode: Mode,
    pub snapshots: Vec<EnsembleSnapshot>,
    pub total_events: u64,
    pub total_violations: u64,
    pub max_relative_mass_drift: f64,
    pub max_number_step_error: f64,
}

/// Sample mean and unbiased variance; the variance of a single value is 0.
fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, ss / (n - 1.0))
}

/// Aggregates runs in the order given.
pub fn aggregate(runs: &[RunStats], volume: f64, base_seed: u64, mode: Mode) -> EnsembleResult {
    let depth = runs.iter().map(|r| r.snapshots.len()).max().unwrap_or(0);
    let snapshots = (0..depth)
        .map(|k| {
            let states: Vec<&SpectrumState> = runs
                .iter()
                .filter_map(|r| r.snapshots.get(k).map(|s| &s.state))
                .collect();
            let time = runs
                .iter()
                .find_map(|r| r.snapshots.get(k).map(|s| s.time))
                .unwrap_or_default();
            let mut moment_mean = [0.0; MOMENT_ORDERS];
            let mut moment_variance = [0.0; MOMENT_ORDERS];
            for order in 0..MOMENT_ORDERS {
                let values: Vec<f64> = states.iter().map(|s| s.moment(order as u32)).collect();
                (moment_mean[order], moment_variance[order]) = mean_variance(&values);
            }
            let bins = states.first().map_or(0, |s| s.bins.len());
            let (mass_density_mean, mass_density_variance) = (0..bins)
                .map(|b| {
                    let values: Vec<f64> = states.iter().map(|s| s.bins[b].mass / volume).collect();
                    mean_variance(&values)
                })
                .unzip();
            EnsembleSnapshot {
                time,
                count: states.len(),
                moment_mean,
                moment_variance,
                mass_density_mean,
                mass_density_variance,
            }
        })
        .collect();

    EnsembleResult {
        realizations: runs.len(),
        base_seed,
        mode,
        snapshots,
        total_events: runs.iter().map(|r| r.ledger.events).sum(),
        total_violations: runs.iter().map(|r| r.violations.len() as u64).sum(),
        max_relative_mass_drift: runs
            .iter()
            .map(|r| r.ledger.max_relative_mass_drift)
            .fold(0.0, f64::max),
        max_number_step_error: runs
            .iter()
            .map(|r| r.ledger.max_number_step_error)
            .fold(0.0, f64::max),
    }
}

/// Runs `n` realizations, the `k`-th seeded with
/// [`rng::realization_seed`]`(base_seed, k)`, and returns every run in index order.
pub fn run_realizations(
    config: &EngineConfig,
    initial: &SpectrumState,
    grid: &MassGrid,
    kernel: &KernelSpec,
    n: usize,
    base_seed: u64,
) -> Result<Vec<RunStats>> {
    if n == 0 {
        return Err(Error::InvalidEngineConfig("at least one realization is required".into()));
    }
    let results: Vec<Result<RunStats>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let cfg = EngineConfig {
                seed: rng::realization_seed(base_seed, k),
                ..config.clone()
            };
            engine::run(&cfg, initial, grid, kernel).map_err(|e| Error::Realization {
                index: k,
                source: Box::new(e),
            })
        })
        .collect();
    results.into_iter().collect()
}

pub fn run_ensemble(
    config: &EngineConfig,
    initial: &SpectrumState,
    grid: &MassGrid,
    kernel: &KernelSpec,
    n: usize,
    base_seed: u64,
) -> Result<EnsembleResult> {
    let runs = run_realizations(config, initial, grid, kernel, n, base_seed)?;
    Ok(aggregate(&runs, config.volume, base_seed, config.mode))
}

/// Mean-field total droplet number at time `t` for kernels with a closed-form
/// solution.
pub fn analytic_number(kernel: &KernelSpec, n0: f64, l0: f64, volume: f64, t: f64) -> Result<f64> {
    match kernel.kind {
        KernelKind::Constant => Ok(n0 / (1.0 + kernel.coefficient * n0 * t / (2.0 * volume))),
        KernelKind::GolovinSum => Ok(n0 * (-kernel.coefficient * l0 * t / volume).exp()),
        other => Err(Error::NoAnalyticSolution(other.name())),
    }
}
