//! Event-driven stochastic simulation of bin-to-bin coalescence.
//!
//! Each step draws an exponential waiting time from the total collision rate,
//! picks a source bin pair proportionally to its rate, removes one droplet
//! from each source bin through a selection interval and deposits their
//! combined mass. Rates follow the bin-level pair counts
//!
//! ```text
//! C_ij = K(x̄_i, x̄_j) N_i N_j / V           i < j, both N >= 1
//! C_ii = K(x̄_i, x̄_i) N_i (N_i - 1) / (2V)  N_i >= 2
//! ```
//!
//! and are refreshed after every event for the bins the event touched.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinLocation, MassGrid};
use crate::kernels::KernelSpec;
use crate::rng;
use crate::selection::{self, SelectionInterval};
use crate::spectrum::{within_bin, BinState, SpectrumState};

/// Which selection interval sources are drawn from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Base interval intersected with the remaining-mean constraints.
    #[default]
    Refined,
    /// Base interval only; breaches are logged instead of rejected.
    Legacy,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Refined => "refined",
            Mode::Legacy => "legacy",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "refined" => Ok(Mode::Refined),
            "legacy" => Ok(Mode::Legacy),
            other => Err(format!("unknown mode {other:?}, expected refined or legacy")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationSide {
    BelowLower,
    AboveUpper,
}

impl ViolationSide {
    pub fn name(self) -> &'static str {
        match self {
            ViolationSide::BelowLower => "below_lower",
            ViolationSide::AboveUpper => "above_upper",
        }
    }
}

/// A removal that left a bin's mean mass outside the bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub time: f64,
    pub bin: usize,
    pub pre_mass: f64,
    pub pre_number: f64,
    pub removed: f64,
    pub post_mean: f64,
    pub side: ViolationSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub time: f64,
    pub source_i: usize,
    pub source_j: usize,
    pub x_i: f64,
    pub x_j: f64,
    pub deposit_bin: BinLocation,
}

fn default_volume() -> f64 {
    1.0
}

fn default_max_time() -> Option<f64> {
    Some(3600.0)
}

fn default_snapshot_times() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default)]
    pub mode: Mode,
    /// Simulated volume, cm³.
    #[serde(rename = "volume_cm3", default = "default_volume")]
    pub volume: f64,
    #[serde(rename = "max_time_s", default = "default_max_time")]
    pub max_time: Option<f64>,
    #[serde(default)]
    pub max_events: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "snapshot_times_s", default = "default_snapshot_times")]
    pub snapshot_times: Vec<f64>,
    /// Keep every collision event in the run statistics.
    #[serde(default)]
    pub record_events: bool,
    /// Compare the incrementally updated rates against a full rebuild every
    /// this many events. Unset means every 100 events in debug builds and
    /// never in release builds.
    #[serde(default)]
    pub rate_check_interval: Option<u64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Refined,
            volume: default_volume(),
            max_time: default_max_time(),
            max_events: None,
            seed: 0,
            snapshot_times: default_snapshot_times(),
            record_events: false,
            rate_check_interval: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidEngineConfig(m));
        if !(self.volume.is_finite() && self.volume > 0.0) {
            return bad(format!("volume_cm3 must be positive, got {}", self.volume));
        }
        let time_ok = self.max_time.is_some_and(|t| t.is_finite() && t > 0.0);
        let events_ok = self.max_events.is_some_and(|n| n > 0);
        if let Some(t) = self.max_time {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("max_time_s must be positive, got {t}"));
            }
        }
        if !time_ok && !events_ok {
            return bad("one of max_time_s or max_events must be set and positive".into());
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return bad(format!("snapshot times must be non-negative, got {t}"));
        }
        if self.rate_check_interval == Some(0) {
            return bad("rate_check_interval must be positive".into());
        }
        Ok(())
    }
}

/// Upper-triangular matrix of pair collision rates, s⁻¹.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    n: usize,
    /// Row-major packing of the pairs `i <= j`.
    rates: Vec<f64>,
    total: f64,
}

impl RateMatrix {
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // rows before i hold n + (n - 1) + ... + (n - i + 1) entries
        i * (2 * self.n - i + 1) / 2 + (j - i)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rates[self.index(i, j)]
    }

    /// All pairs `(i, j)` with `i <= j` in walk order.
    pub fn pairs(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (i..n).map(move |j| (i, j)))
            .zip(self.rates.iter().copied())
    }

    fn refresh_total(&mut self) {
        self.total = self.rates.iter().sum();
    }

    /// Builds a matrix directly from a list of pair rates; unlisted pairs are 0.
    pub fn from_pairs(n: usize, pairs: &[((usize, usize), f64)]) -> Self {
        let mut m = Self {
            n,
            rates: vec![0.0; n * (n + 1) / 2],
            total: 0.0,
        };
        for &((i, j), r) in pairs {
            let k = m.index(i, j);
            m.rates[k] = r;
        }
        m.refresh_total();
        m
    }

    /// Recomputes every rate involving any bin in `bins`.
    pub fn update_bins(
        &mut self,
        state: &SpectrumState,
        grid: &MassGrid,
        kernel: &KernelSpec,
        volume: f64,
        bins: &[usize],
    ) {
        for &b in bins {
            for c in 0..self.n {
                let k = self.index(b, c);
                self.rates[k] = pair_rate(state, grid, kernel, volume, b, c);
            }
        }
        self.refresh_total();
    }

    /// Inverse-CDF walk over the pairs in row-major order with target
    /// `u * total`.
    pub fn select(&self, u: f64) -> Option<(usize, usize)> {
        if self.total <= 0.0 {
            return None;
        }
        let target = u * self.total;
        let mut cumulative = 0.0;
        let mut last = None;
        for (pair, rate) in self.pairs() {
            if rate <= 0.0 {
                continue;
            }
            cumulative += rate;
            last = Some(pair);
            if cumulative > target {
                return last;
            }
        }
        last
    }
}

/// Mean mass used as the kernel argument; pinned into the bin so that a bin
/// left unphysical by a legacy-mode removal still yields a finite rate.
fn kernel_mass(bin: &BinState, x_lo: f64, x_hi: f64) -> f64 {
    (bin.mass / bin.number()).clamp(x_lo, x_hi)
}

fn pair_rate(
    state: &SpectrumState,
    grid: &MassGrid,
    kernel: &KernelSpec,
    volume: f64,
    i: usize,
    j: usize,
) -> f64 {
    let (i, j) = (i.min(j), i.max(j));
    let (a, b) = (&state.bins[i], &state.bins[j]);
    let (ia, ib) = (grid.bounds(i), grid.bounds(j));
    if i == j {
        if a.number() < 2.0 {
            return 0.0;
        }
        let m = kernel_mass(a, ia.0, ia.1);
        kernel.evaluate_unchecked(m, m) * a.number() * (a.number() - 1.0) / (2.0 * volume)
    } else {
        if !(a.is_eligible_source() && b.is_eligible_source()) {
            return 0.0;
        }
        let ma = kernel_mass(a, ia.0, ia.1);
        let mb = kernel_mass(b, ib.0, ib.1);
        kernel.evaluate_unchecked(ma, mb) * a.number() * b.number() / volume
    }
}

/// Rates for every bin pair of `state`.
pub fn pair_rates(
    state: &SpectrumState,
    grid: &MassGrid,
    kernel: &KernelSpec,
    volume: f64,
) -> RateMatrix {
    let n = state.bins.len();
    let mut rates = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            rates.push(pair_rate(state, grid, kernel, volume, i, j));
        }
    }
    let mut m = RateMatrix { n, rates, total: 0.0 };
    m.refresh_total();
    m
}

/// Waiting time `-ln(u1) / C_total` and the pair selected by `u2`. `None`
/// when no collision is possible.
pub fn sample_event(rates: &RateMatrix, u1: f64, u2: f64) -> Option<(f64, (usize, usize))> {
    let pair = rates.select(u2)?;
    Some((-u1.ln() / rates.total(), pair))
}

/// [`sample_event`] with both uniforms drawn from `rng`.
pub fn sample_event_rng<R: Rng + ?Sized>(rates: &RateMatrix, rng: &mut R) -> Option<(f64, (usize, usize))> {
    let u1: f64 = rng.sample(Open01);
    let u2: f64 = rng.random();
    sample_event(rates, u1, u2)
}

/// The interval a droplet of bin `i` would be drawn from under `mode`.
pub fn selection_for(state: &SpectrumState, grid: &MassGrid, i: usize, mode: Mode) -> Result<SelectionInterval> {
    let bin = state.bins[i];
    let (x_lo, x_hi) = grid.bounds(i);
    if bin.number() == 1.0 {
        return Ok(SelectionInterval::point(bin.mass));
    }
    match mode {
        Mode::Refined => selection::refined_interval(bin.mass, bin.number(), x_lo, x_hi),
        Mode::Legacy => {
            let mean = bin.mass / bin.number();
            if within_bin(mean, x_lo, x_hi) {
                selection::legacy_interval(bin.mass, bin.number(), x_lo, x_hi)
            } else {
                Ok(SelectionInterval::point(mean.clamp(x_lo, x_hi)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionOutcome {
    pub event: CollisionEvent,
    pub violations: Vec<ViolationRecord>,
}

/// Executes one collision between bins `i <= j`, drawing each source mass
/// with a uniform from `uniform`. The lower-index bin is drawn first; for a
/// same-bin collision the second interval is rebuilt from the state left by
/// the first removal.
pub fn execute_collision_with(
    state: &mut SpectrumState,
    grid: &MassGrid,
    pair: (usize, usize),
    mode: Mode,
    uniform: &mut dyn FnMut() -> f64,
) -> Result<CollisionOutcome> {
    let (i, j) = if pair.0 <= pair.1 { pair } else { (pair.1, pair.0) };
    let mut violations = Vec::new();
    let mut masses = [0.0; 2];
    for (slot, bin) in [i, j].into_iter().enumerate() {
        let interval = selection_for(state, grid, bin, mode)?;
        let x = selection::draw_source_mass(&interval, uniform());
        if let Some(v) = state.remove_droplet(grid, bin, x, mode)? {
            violations.push(v);
        }
        masses[slot] = x;
    }
    let deposit_bin = state.deposit_droplet(grid, masses[0] + masses[1])?;
    Ok(CollisionOutcome {
        event: CollisionEvent {
            time: state.time,
            source_i: i,
            source_j: j,
            x_i: masses[0],
            x_j: masses[1],
            deposit_bin,
        },
        violations,
    })
}

pub fn execute_collision<R: Rng + ?Sized>(
    state: &mut SpectrumState,
    grid: &MassGrid,
    pair: (usize, usize),
    mode: Mode,
    rng: &mut R,
) -> Result<CollisionOutcome> {
    execute_collision_with(state, grid, pair, mode, &mut || rng.random())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxTime,
    MaxEvents,
    /// Total rate dropped to zero.
    Exhausted,
}

/// Mass and number bookkeeping checked after every event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationLedger {
    pub initial_mass: f64,
    pub initial_number: f64,
    pub final_mass: f64,
    pub final_number: f64,
    /// Largest `|M(t) - M(0)| / M(0)` seen after any event.
    pub max_relative_mass_drift: f64,
    /// Largest `|ΔN + 1|` over single events.
    pub max_number_step_error: f64,
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub state: SpectrumState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub seed: u64,
    pub mode: Mode,
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<CollisionEvent>,
    pub violations: Vec<ViolationRecord>,
    pub ledger: ConservationLedger,
    pub termination: Termination,
    pub final_state: SpectrumState,
}

struct SnapshotQueue {
    times: Vec<f64>,
    next: usize,
}

impl SnapshotQueue {
    fn new(mut times: Vec<f64>) -> Self {
        times.sort_by(f64::total_cmp);
        Self { times, next: 0 }
    }

    /// Records every pending snapshot strictly before `until` (or up to and
    /// including it when `inclusive`).
    fn record_before(&mut self, until: f64, inclusive: bool, state: &SpectrumState, out: &mut Vec<Snapshot>) {
        while let Some(&t) = self.times.get(self.next) {
            if t < until || (inclusive && t <= until) {
                let mut s = state.clone();
                s.time = t;
                out.push(Snapshot { time: t, state: s });
                self.next += 1;
            } else {
                break;
            }
        }
    }
}

/// Runs one realization until `max_time`, `max_events` or until no collision
/// is possible.
pub fn run(
    config: &EngineConfig,
    initial: &SpectrumState,
    grid: &MassGrid,
    kernel: &KernelSpec,
) -> Result<RunStats> {
    config.validate()?;
    kernel.validate()?;
    if initial.bins.len() != grid.len() {
        return Err(Error::InvalidEngineConfig(format!(
            "state has {} bins but grid has {}",
            initial.bins.len(),
            grid.len()
        )));
    }
    let check_every = config
        .rate_check_interval
        .or(cfg!(debug_assertions).then_some(100));

    let mut rng = rng::stream(config.seed);
    let mut state = initial.clone();
    state.time = 0.0;
    let mut rates = pair_rates(&state, grid, kernel, config.volume);
    let mut snapshots = Vec::new();
    let mut queue = SnapshotQueue::new(config.snapshot_times.clone());
    let mut events = Vec::new();
    let mut violations = Vec::new();

    let initial_mass = state.total_mass();
    let initial_number = state.total_number();
    let mut ledger = ConservationLedger {
        initial_mass,
        initial_number,
        final_mass: initial_mass,
        final_number: initial_number,
        max_relative_mass_drift: 0.0,
        max_number_step_error: 0.0,
        events: 0,
    };
    let horizon = config.max_time.unwrap_or(f64::INFINITY);
    let mut whole = state.whole_count();
    let residue = state.residue_total();

    let termination = loop {
        if config.max_events.is_some_and(|n| ledger.events >= n) {
            break Termination::MaxEvents;
        }
        let Some((tau, pair)) = sample_event_rng(&rates, &mut rng) else {
            queue.record_before(horizon, true, &state, &mut snapshots);
            break Termination::Exhausted;
        };
        let t_next = state.time + tau;
        if t_next > horizon {
            queue.record_before(horizon, true, &state, &mut snapshots);
            state.time = horizon;
            break Termination::MaxTime;
        }
        queue.record_before(t_next, false, &state, &mut snapshots);
        state.time = t_next;

        let outcome = execute_collision(&mut state, grid, pair, config.mode, &mut rng)?;
        ledger.events += 1;

        let mass = state.total_mass();
        let number = state.total_number();
        let drift = if initial_mass > 0.0 {
            (mass - initial_mass).abs() / initial_mass
        } else {
            0.0
        };
        ledger.max_relative_mass_drift = ledger.max_relative_mass_drift.max(drift);
        // whole counts drop by one per event and the fractional residues never move
        let now = state.whole_count();
        let step_error = (whole as f64 - now as f64 - 1.0).abs() + (state.residue_total() - residue).abs();
        whole = now;
        ledger.max_number_step_error = ledger.max_number_step_error.max(step_error);
        ledger.final_mass = mass;
        ledger.final_number = number;

        let mut touched = vec![outcome.event.source_i, outcome.event.source_j];
        if let BinLocation::Bin(k) = outcome.event.deposit_bin {
            touched.push(k);
        }
        touched.sort_unstable();
        touched.dedup();
        rates.update_bins(&state, grid, kernel, config.volume, &touched);

        if check_every.is_some_and(|k| ledger.events.is_multiple_of(k)) {
            let fresh = pair_rates(&state, grid, kernel, config.volume);
            if fresh != rates {
                return Err(Error::Internal(format!(
                    "incremental rates diverged from a full rebuild after {} events",
                    ledger.events
                )));
            }
        }

        violations.extend(outcome.violations);
        if config.record_events {
            events.push(outcome.event);
        }
    };

    Ok(RunStats {
        seed: config.seed,
        mode: config.mode,
        snapshots,
        events,
        violations,
        ledger,
        termination,
        final_state: state,
    })
}
