//! CSV and JSON writers.
//!
//! Every CSV file opens with `# key=value` metadata lines followed by a
//! header row. JSON files carry the same metadata under a `metadata` key.
//!
//! Snapshot columns: `time_s, bin, x_lo_g, x_hi_g, mass_g, number, mean_mass_g`.
//! Each snapshot adds one row with `bin = overflow` for the reservoir, whose
//! `x_lo_g` is the last grid boundary and whose `x_hi_g` is empty.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{OutputFormat, RunConfig};
use crate::engine::{CollisionEvent, Mode, RunStats, Snapshot, ViolationRecord};
use crate::ensemble::{EnsembleResult, MOMENT_ORDERS};
use crate::error::{Error, Result};
use crate::grid::{BinLocation, MassGrid};
use crate::rng::RNG_ALGORITHM;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub artifact: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub mode: Mode,
    pub rng: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
}

impl Metadata {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            artifact: "coalesce",
            version: crate::VERSION,
            config_hash: config.hash(),
            seed: config.engine.seed,
            mode: config.engine.mode,
            rng: RNG_ALGORITHM,
            realizations: None,
        }
    }

    pub fn with_realizations(mut self, n: usize) -> Self {
        self.realizations = Some(n);
        self
    }

    fn write_header(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "# artifact={}", self.artifact)?;
        writeln!(out, "# version={}", self.version)?;
        writeln!(out, "# config_hash={}", self.config_hash)?;
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# mode={}", self.mode.name())?;
        writeln!(out, "# rng={}", self.rng)?;
        if let Some(n) = self.realizations {
            writeln!(out, "# realizations={n}")?;
        }
        Ok(())
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_error(path))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))
}

/// Writes metadata, then `columns` as the header row, then one row per item.
pub fn write_csv<T: Serialize>(
    path: &Path,
    metadata: &Metadata,
    columns: &[&str],
    rows: impl IntoIterator<Item = T>,
) -> Result<()> {
    let mut file = create(path)?;
    metadata.write_header(&mut file).map_err(io_error(path))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    writer.write_record(columns)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(io_error(path))?;
    Ok(())
}

#[derive(Serialize)]
struct WithMetadata<'a, T: Serialize> {
    metadata: &'a Metadata,
    #[serde(flatten)]
    body: T,
}

pub fn write_json<T: Serialize>(path: &Path, metadata: &Metadata, body: T) -> Result<()> {
    let mut file = create(path)?;
    serde_json::to_writer_pretty(&mut file, &WithMetadata { metadata, body })?;
    writeln!(file).map_err(io_error(path))?;
    file.flush().map_err(io_error(path))
}

pub const SNAPSHOT_COLUMNS: &[&str] = &["time_s", "bin", "x_lo_g", "x_hi_g", "mass_g", "number", "mean_mass_g"];
pub const EVENT_COLUMNS: &[&str] = &["time_s", "i", "j", "x_i_g", "x_j_g", "deposit_bin"];
pub const VIOLATION_COLUMNS: &[&str] = &[
    "time_s",
    "bin",
    "pre_mass_g",
    "pre_number",
    "removed_g",
    "post_mean_g",
    "side",
];
pub const MOMENT_COLUMNS: &[&str] = &["time_s", "moment", "mean", "variance", "standard_error", "count"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotRow {
    pub time_s: f64,
    pub bin: String,
    pub x_lo_g: f64,
    pub x_hi_g: Option<f64>,
    pub mass_g: f64,
    pub number: f64,
    pub mean_mass_g: Option<f64>,
}

pub fn snapshot_rows(grid: &MassGrid, snapshot: &Snapshot) -> Vec<SnapshotRow> {
    let state = &snapshot.state;
    let mut rows: Vec<SnapshotRow> = state
        .records(grid)
        .into_iter()
        .map(|r| SnapshotRow {
            time_s: snapshot.time,
            bin: r.bin.to_string(),
            x_lo_g: r.x_lo_g,
            x_hi_g: Some(r.x_hi_g),
            mass_g: r.mass_g,
            number: r.number,
            mean_mass_g: r.mean_mass_g,
        })
        .collect();
    rows.push(SnapshotRow {
        time_s: snapshot.time,
        bin: "overflow".into(),
        x_lo_g: grid.upper(),
        x_hi_g: None,
        mass_g: state.overflow_mass,
        number: state.overflow_number,
        mean_mass_g: (state.overflow_number > 0.0).then(|| state.overflow_mass / state.overflow_number),
    });
    rows
}

#[derive(Serialize)]
struct SnapshotJson {
    time_s: f64,
    bins: Vec<crate::spectrum::BinRecord>,
    overflow_mass_g: f64,
    overflow_number: f64,
}

#[derive(Serialize)]
struct SnapshotsJson<'a> {
    boundaries_g: &'a [f64],
    snapshots: Vec<SnapshotJson>,
}

/// Writes `snapshots.csv` or `snapshots.json` into `dir`.
pub fn write_snapshots(
    dir: &Path,
    format: OutputFormat,
    metadata: &Metadata,
    grid: &MassGrid,
    snapshots: &[Snapshot],
) -> Result<PathBuf> {
    match format {
        OutputFormat::Csv => {
            let path = dir.join("snapshots.csv");
            let rows = snapshots.iter().flat_map(|s| snapshot_rows(grid, s));
            write_csv(&path, metadata, SNAPSHOT_COLUMNS, rows)?;
            Ok(path)
        }
        OutputFormat::Json => {
            let path = dir.join("snapshots.json");
            let body = SnapshotsJson {
                boundaries_g: grid.boundaries(),
                snapshots: snapshots
                    .iter()
                    .map(|s| SnapshotJson {
                        time_s: s.time,
                        bins: s.state.records(grid),
                        overflow_mass_g: s.state.overflow_mass,
                        overflow_number: s.state.overflow_number,
                    })
                    .collect(),
            };
            write_json(&path, metadata, body)?;
            Ok(path)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRow {
    pub time_s: f64,
    pub i: usize,
    pub j: usize,
    pub x_i_g: f64,
    pub x_j_g: f64,
    pub deposit_bin: String,
}

impl From<&CollisionEvent> for EventRow {
    fn from(e: &CollisionEvent) -> Self {
        Self {
            time_s: e.time,
            i: e.source_i,
            j: e.source_j,
            x_i_g: e.x_i,
            x_j_g: e.x_j,
            deposit_bin: match e.deposit_bin {
                BinLocation::Bin(k) => k.to_string(),
                BinLocation::Overflow => "overflow".into(),
                BinLocation::Underflow => "underflow".into(),
            },
        }
    }
}

pub fn write_events(path: &Path, metadata: &Metadata, events: &[CollisionEvent]) -> Result<()> {
    write_csv(path, metadata, EVENT_COLUMNS, events.iter().map(EventRow::from))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationRow {
    pub time_s: f64,
    pub bin: usize,
    pub pre_mass_g: f64,
    pub pre_number: f64,
    pub removed_g: f64,
    pub post_mean_g: f64,
    pub side: &'static str,
}

impl From<&ViolationRecord> for ViolationRow {
    fn from(v: &ViolationRecord) -> Self {
        Self {
            time_s: v.time,
            bin: v.bin,
            pre_mass_g: v.pre_mass,
            pre_number: v.pre_number,
            removed_g: v.removed,
            post_mean_g: v.post_mean,
            side: v.side.name(),
        }
    }
}

pub fn write_violations(path: &Path, metadata: &Metadata, violations: &[ViolationRecord]) -> Result<()> {
    write_csv(path, metadata, VIOLATION_COLUMNS, violations.iter().map(ViolationRow::from))
}

#[derive(Serialize)]
struct RunSummaryJson<'a> {
    termination: crate::engine::Termination,
    events: u64,
    violations: usize,
    ledger: &'a crate::engine::ConservationLedger,
}

pub fn write_run_summary(path: &Path, metadata: &Metadata, stats: &RunStats) -> Result<()> {
    write_json(
        path,
        metadata,
        RunSummaryJson {
            termination: stats.termination,
            events: stats.ledger.events,
            violations: stats.violations.len(),
            ledger: &stats.ledger,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub time_s: f64,
    pub moment: usize,
    pub mean: f64,
    pub variance: f64,
    pub standard_error: f64,
    pub count: usize,
}

pub fn moment_rows(result: &EnsembleResult) -> Vec<MomentRow> {
    result
        .snapshots
        .iter()
        .flat_map(|s| {
            (0..MOMENT_ORDERS).map(move |k| MomentRow {
                time_s: s.time,
                moment: k,
                mean: s.moment_mean[k],
                variance: s.moment_variance[k],
                standard_error: s.moment_standard_error(k),
                count: s.count,
            })
        })
        .collect()
}

/// Writes `ensemble.json` and `ensemble_moments.csv` into `dir`.
pub fn write_ensemble(dir: &Path, metadata: &Metadata, result: &EnsembleResult) -> Result<()> {
    write_json(&dir.join("ensemble.json"), metadata, result)?;
    write_csv(&dir.join("ensemble_moments.csv"), metadata, MOMENT_COLUMNS, moment_rows(result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::InitialDistributionSpec;
    use crate::kernels::KernelSpec;
    use crate::spectrum::{BinState, SpectrumState};

    fn config() -> RunConfig {
        RunConfig::new(InitialDistributionSpec::exponential(4.19e-9, 100.0), KernelSpec::golovin_sum(1500.0))
    }

    #[test]
    fn csv_has_metadata_and_columns() {
        let dir = tempfile::tempdir().unwrap();
        let grid = MassGrid::new(vec![1.0, 2.0, 4.0]).unwrap();
        let mut state = SpectrumState::new(vec![BinState::new(3.0, 2.0), BinState::default()]);
        state.overflow_mass = 9.0;
        state.overflow_number = 1.0;
        let snaps = [Snapshot { time: 0.0, state }];
        let meta = Metadata::new(&config());
        let path = write_snapshots(dir.path(), OutputFormat::Csv, &meta, &grid, &snaps).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# artifact=coalesce");
        assert!(lines.iter().any(|l| l.starts_with("# config_hash=")));
        assert!(lines.contains(&"# mode=refined"));
        let header = lines.iter().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(*header, "time_s,bin,x_lo_g,x_hi_g,mass_g,number,mean_mass_g");
        assert!(lines.contains(&"0.0,0,1.0,2.0,3.0,2.0,1.5"));
        assert!(lines.contains(&"0.0,1,2.0,4.0,0.0,0.0,"));
        assert!(lines.contains(&"0.0,overflow,4.0,,9.0,1.0,9.0"));
    }

    #[test]
    fn empty_logs_still_have_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("violations.csv");
        write_violations(&path, &Metadata::new(&config()), &[]).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().last().unwrap(), VIOLATION_COLUMNS.join(","));
    }

    #[test]
    fn json_snapshots_include_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let grid = MassGrid::new(vec![1.0, 2.0, 4.0]).unwrap();
        let snaps = [Snapshot {
            time: 1.5,
            state: SpectrumState::empty(2),
        }];
        let meta = Metadata::new(&config());
        let path = write_snapshots(dir.path(), OutputFormat::Json, &meta, &grid, &snaps).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["metadata"]["artifact"], "coalesce");
        assert_eq!(v["metadata"]["rng"], RNG_ALGORITHM);
        assert_eq!(v["snapshots"][0]["time_s"], 1.5);
        assert_eq!(v["snapshots"][0]["bins"][1]["mean_mass_g"], serde_json::Value::Null);
        assert_eq!(v["boundaries_g"][2], 4.0);
    }
}
