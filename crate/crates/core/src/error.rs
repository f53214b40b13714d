use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid initial distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid engine configuration: {0}")]
    InvalidEngineConfig(String),

    #[error("mass must be positive and finite, got {0}")]
    NonPositiveMass(f64),

    #[error("mass {0:e} g lies below the first grid boundary")]
    BelowGrid(f64),

    #[error("bin {0} is empty")]
    EmptyBin(usize),

    #[error("bin index {index} out of range for {bins} bins")]
    BinOutOfRange { index: usize, bins: usize },

    #[error("mean mass {mean:e} g lies outside bin [{x_lo:e}, {x_hi:e}] g")]
    MeanOutsideBin { mean: f64, x_lo: f64, x_hi: f64 },

    #[error("bin number {0} does not admit a partial removal (needs N > 1)")]
    NotARemovableSource(f64),

    #[error("removal from bin {bin} violates bin state: {reason}")]
    InvalidRemoval { bin: usize, reason: String },

    #[error("initial distribution discretizes to an empty spectrum")]
    EmptySpectrum,

    #[error("kernel {0} has no closed-form number solution")]
    NoAnalyticSolution(&'static str),

    #[error(
        "bin invariant breached in refined mode at t = {time:e} s, bin {bin}: \
         post-removal mean {post_mean:e} g outside [{x_lo:e}, {x_hi:e}] g"
    )]
    InvariantBreach {
        time: f64,
        bin: usize,
        post_mean: f64,
        x_lo: f64,
        x_hi: f64,
    },

    #[error("realization {index}: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("config {path}: {message}")]
    Config { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
