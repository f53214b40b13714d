//! Bin-discretized stochastic simulation of droplet collision-coalescence.
//!
//! The spectrum is stored as aggregate mass and droplet number per mass bin.
//! Collisions are sampled event by event (exact SSA) and each source droplet
//! is drawn from an intra-bin interval that keeps the remaining droplets'
//! mean mass inside the bin. A legacy mode draws from the unconstrained
//! interval instead and records every removal that breaks that condition.

pub mod cli;
pub mod config;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod output;
mod quadrature;
pub mod rng;
pub mod selection;
pub mod spectrum;

pub use engine::{
    execute_collision, pair_rates, run, sample_event, CollisionEvent, EngineConfig, Mode, RateMatrix, RunStats,
    ViolationRecord, ViolationSide,
};
pub use ensemble::{analytic_number, run_ensemble, EnsembleResult};
pub use error::{Error, Result};
pub use grid::{discretize, BinLocation, InitialDistributionSpec, MassGrid};
pub use kernels::{KernelKind, KernelSpec};
pub use selection::{base_interval, constraint_bounds, draw_source_mass, legacy_interval, refined_interval, SelectionInterval};
pub use spectrum::{BinState, SpectrumState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
