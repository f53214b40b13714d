//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use coalesce::cli::cmd_run;
use coalesce::config::RunConfig;
use coalesce::engine::{EngineConfig, Mode, RunStats};
use coalesce::ensemble::{analytic_number, run_ensemble, run_realizations};
use coalesce::grid::{self, discretize, InitialDistributionSpec, MassGrid};
use coalesce::kernels::KernelSpec;
use coalesce::selection::{constraint_bounds, draw_source_mass, legacy_interval, refined_interval};
use coalesce::spectrum::SpectrumState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

const BIN17_MASS: f64 = 2.046e-8;
const BIN17_NUMBER: f64 = 1.089;
const BIN17_E_HI: f64 = 1.893e-8;
const SLACK: f64 = 1e-12;

fn bin17_bounds() -> (f64, f64) {
    let x_lo = (BIN17_MASS - BIN17_E_HI) / (BIN17_NUMBER - 1.0);
    (x_lo, x_lo * 2f64.sqrt())
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn inside(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo * (1.0 - SLACK) && x <= hi * (1.0 + SLACK)
}

fn remaining_inside(mass: f64, number: f64, x: f64, lo: f64, hi: f64) -> bool {
    inside((mass - x) / (number - 1.0), lo, hi)
}

/// A random bin with geometric ratio in (1, 4], N in (1, 100] and a mean drawn uniformly in the bin.
fn random_state(rng: &mut ChaCha12Rng, max_number: f64) -> (f64, f64, f64, f64) {
    let x_lo = 10f64.powf(rng.random_range(-12.0..-2.0));
    let ratio = 1.0 + 3.0 * (1.0 - rng.random::<f64>());
    let x_hi = x_lo * ratio;
    let number = 1.0 + (max_number - 1.0) * (1.0 - rng.random::<f64>());
    let mean = x_lo + rng.random::<f64>() * (x_hi - x_lo);
    (x_lo, x_hi, mean * number, number)
}

fn criterion_1() -> Outcome {
    let (x_lo, x_hi) = bin17_bounds();
    let (_, e_hi) = constraint_bounds(BIN17_MASS, BIN17_NUMBER, x_lo, x_hi).unwrap();
    let rel = (e_hi - BIN17_E_HI).abs() / BIN17_E_HI;
    outcome(rel <= 1e-10, format!("e_hi = {e_hi:.6e} g, relative error {rel:.2e}"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let mut failures = 0usize;
    let cases = 1_000_000;
    for _ in 0..cases {
        let (x_lo, x_hi, mass, number) = random_state(&mut rng, 100.0);
        let s = refined_interval(mass, number, x_lo, x_hi).unwrap();
        let nested = s.s_lo >= s.r_lo * (1.0 - SLACK)
            && s.s_hi <= s.r_hi * (1.0 + SLACK)
            && s.r_lo >= s.d_lo * (1.0 - SLACK)
            && s.r_hi <= s.d_hi * (1.0 + SLACK)
            && inside(s.d_lo, x_lo, x_hi)
            && inside(s.d_hi, x_lo, x_hi);
        // the remaining mean is affine in x, so both endpoints bound the whole interval
        let interior = draw_source_mass(&s, rng.random());
        let safe = [s.s_lo, s.s_hi, interior]
            .into_iter()
            .all(|x| inside(x, x_lo, x_hi) && remaining_inside(mass, number, x, x_lo, x_hi));
        if !(nested && safe) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures} failures in {cases} random states"))
}

fn legacy_unsafe(mass: f64, number: f64, x_lo: f64, x_hi: f64) -> bool {
    let l = legacy_interval(mass, number, x_lo, x_hi).unwrap();
    !remaining_inside(mass, number, l.s_lo, x_lo, x_hi) || !remaining_inside(mass, number, l.s_hi, x_lo, x_hi)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let cases = 1_000_000;
    let mut hits = 0usize;
    for _ in 0..cases {
        let (x_lo, x_hi, mass, number) = random_state(&mut rng, 2.0);
        if number >= 2.0 {
            continue;
        }
        if legacy_unsafe(mass, number, x_lo, x_hi) {
            hits += 1;
        }
    }
    let (x_lo, x_hi) = bin17_bounds();
    let bin17 = legacy_unsafe(BIN17_MASS, BIN17_NUMBER, x_lo, x_hi);
    let fraction = hits as f64 / cases as f64;
    outcome(
        hits > 0 && bin17,
        format!("unsafe legacy endpoint in {fraction:.4} of cases; bin-17 state unsafe: {bin17}"),
    )
}

fn grid() -> MassGrid {
    MassGrid::geometric(grid::ONE_MICRON_DROPLET_MASS, grid::DEFAULT_RATIO, grid::DEFAULT_BINS).unwrap()
}

fn gamma_initial(g: &MassGrid) -> SpectrumState {
    discretize(&InitialDistributionSpec::gamma(2.0, 4.19e-9, 1e4), g).unwrap()
}

fn zero_violation_runs() -> (Vec<RunStats>, Vec<RunStats>) {
    let g = grid();
    let s = gamma_initial(&g);
    let k = KernelSpec::golovin_sum(1500.0);
    let cfg = EngineConfig {
        max_time: None,
        max_events: Some(10_000),
        seed: 4,
        ..Default::default()
    };
    let refined = run_realizations(&cfg, &s, &g, &k, 100, cfg.seed).unwrap();
    let legacy_cfg = EngineConfig {
        mode: Mode::Legacy,
        ..cfg.clone()
    };
    let legacy = run_realizations(&legacy_cfg, &s, &g, &k, 100, cfg.seed).unwrap();
    (refined, legacy)
}

fn criterion_4(refined: &[RunStats], legacy: &[RunStats]) -> Outcome {
    let r: usize = refined.iter().map(|r| r.violations.len()).sum();
    let l: usize = legacy.iter().map(|r| r.violations.len()).sum();
    let affected = legacy.iter().filter(|r| !r.violations.is_empty()).count();
    let events: u64 = refined.iter().map(|r| r.ledger.events).sum();
    let mut detail = format!(
        "refined {r} violations over {} runs ({events} events); legacy {l} violations in {affected} runs",
        refined.len()
    );
    if l == 0 {
        detail.push_str(" (INCONCLUSIVE: legacy produced none)");
    }
    outcome(r == 0 && l > 0, detail)
}

fn criterion_5(runs: &[&RunStats]) -> Outcome {
    let drift = runs.iter().map(|r| r.ledger.max_relative_mass_drift).fold(0.0, f64::max);
    let step = runs.iter().map(|r| r.ledger.max_number_step_error).fold(0.0, f64::max);
    let counted = runs.iter().all(|r| {
        let start = &r.snapshots[0].state;
        start.whole_count() - r.final_state.whole_count() == r.ledger.events
            && start.residue_total() == r.final_state.residue_total()
    });
    outcome(
        drift <= 1e-12 && step == 0.0 && counted,
        format!("max mass drift {drift:.2e}, max per-event number error {step:.2e}, totals consistent: {counted}"),
    )
}

fn analytic_oracle(kernel: KernelSpec, t_max: impl Fn(f64, f64) -> f64, seed: u64) -> Outcome {
    let g = grid();
    let s = discretize(&InitialDistributionSpec::exponential(4.19e-9, 1e4), &g).unwrap();
    let (n0, l0) = (s.total_number(), s.total_mass());
    let volume = 1.0;
    let t_max = t_max(n0, l0);
    let snapshot_times: Vec<f64> = (1..=10).map(|k| t_max * k as f64 / 10.0).collect();
    let cfg = EngineConfig {
        volume,
        max_time: snapshot_times.last().copied(),
        snapshot_times,
        seed,
        ..Default::default()
    };
    let e = run_ensemble(&cfg, &s, &g, &kernel, 100, seed).unwrap();
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for snap in &e.snapshots {
        let expected = analytic_number(&kernel, n0, l0, volume, snap.time).unwrap();
        let z = (snap.moment_mean[0] - expected).abs() / snap.moment_standard_error(0);
        worst = worst.max(z);
        if z <= 3.0 {
            within += 1;
        }
    }
    outcome(
        e.snapshots.len() == 10 && within >= 9,
        format!("{within}/{} snapshots within 3 SE (worst {worst:.2} SE)", e.snapshots.len()),
    )
}

fn criterion_6() -> Outcome {
    let b = 1500.0;
    analytic_oracle(KernelSpec::golovin_sum(b), |_, l0| 2.0 / (b * l0), 6)
}

fn criterion_7() -> Outcome {
    let c = 1e-4;
    analytic_oracle(KernelSpec::constant(c), |n0, _| 4.0 / (c * n0), 7)
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = RunConfig::new(
        InitialDistributionSpec::gamma(2.0, 4.19e-9, 1e4),
        KernelSpec::golovin_sum(1500.0),
    );
    config.engine.max_time = Some(30.0);
    config.engine.snapshot_times = vec![0.0, 10.0, 20.0, 30.0];
    config.engine.record_events = true;
    config.engine.seed = 8;
    let mut dirs = Vec::new();
    for name in ["a", "b"] {
        config.output.dir = tmp.path().join(name);
        cmd_run(&config).unwrap();
        dirs.push(config.output.dir.clone());
    }
    let files = ["events.csv", "snapshots.csv", "violations.csv", "run_summary.json"];
    let same = files.iter().all(|f| {
        let a = std::fs::read(dirs[0].join(f)).unwrap();
        let b = std::fs::read(dirs[1].join(f)).unwrap();
        a == b && !a.is_empty()
    });
    let events = std::fs::read_to_string(dirs[0].join("events.csv")).unwrap().lines().count();
    outcome(same, format!("{} artifacts byte-identical: {same} ({events} event log lines)", files.len()))
}

fn criterion_9() -> Outcome {
    let (x_lo, x_hi) = bin17_bounds();
    let s = refined_interval(BIN17_MASS, BIN17_NUMBER, x_lo, x_hi).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let n = 1_000_000;
    let draws: Vec<f64> = (0..n).map(|_| draw_source_mass(&s, rng.random())).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let se = (var / n as f64).sqrt();
    let bin_mean = BIN17_MASS / BIN17_NUMBER;
    let z = (mean - bin_mean).abs() / se;
    outcome(z <= 4.0, format!("sample mean {mean:.6e} vs bin mean {bin_mean:.6e}: {z:.2} SE"))
}

fn report(id: u32, name: &str, elapsed: Duration, o: &Outcome) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    println!("{status} criterion {id} [{name}] {} ({:.2} s)", o.detail, elapsed.as_secs_f64());
}

fn main() {
    let mut failed = 0;
    let mut check = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        report(id, name, start.elapsed(), &o);
        if !o.pass {
            failed += 1;
        }
    };
    check(1, "constraint golden value", &mut criterion_1);
    check(2, "refined interval safety", &mut criterion_2);
    check(3, "legacy flaw witness", &mut criterion_3);

    let start = Instant::now();
    let (refined, legacy) = zero_violation_runs();
    let shared = start.elapsed();
    check(4, "zero-violation simulation", &mut || {
        let mut o = criterion_4(&refined, &legacy);
        o.detail.push_str(&format!(" [simulation {:.2} s]", shared.as_secs_f64()));
        o
    });
    let all: Vec<&RunStats> = refined.iter().chain(&legacy).collect();
    check(5, "conservation ledger", &mut || criterion_5(&all));

    check(6, "golovin analytic oracle", &mut criterion_6);
    check(7, "constant analytic oracle", &mut criterion_7);
    check(8, "determinism", &mut criterion_8);
    check(9, "unbiased draws", &mut criterion_9);

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
