//! Run configuration file (JSON, strict schema).
//!
//! Only `initial` and `kernel` are required. Defaults:
//!
//! | key | default |
//! |-----|---------|
//! | `grid.x_min_g` | 4.19e-12 (1 μm radius water droplet) |
//! | `grid.ratio` | 2^(1/2) |
//! | `grid.bins` | 70 |
//! | `initial.shape` | 1 |
//! | `initial.scale_factor` | 1 |
//! | `kernel.coefficient` | 1 |
//! | `kernel.efficiency` | 1 |
//! | `engine.mode` | `refined` |
//! | `engine.volume_cm3` | 1 |
//! | `engine.max_time_s` | 3600 |
//! | `engine.max_events` | unlimited |
//! | `engine.seed` | 0 |
//! | `engine.snapshot_times_s` | `[0]` |
//! | `engine.record_events` | false |
//! | `engine.rate_check_interval` | 100 in debug builds, off otherwise |
//! | `ensemble.realizations` | 100 |
//! | `output.dir` | `out` |
//! | `output.format` | `csv` |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::grid::{self, InitialDistributionSpec, MassGrid};
use crate::kernels::KernelSpec;

fn default_x_min() -> f64 {
    grid::ONE_MICRON_DROPLET_MASS
}

fn default_ratio() -> f64 {
    grid::DEFAULT_RATIO
}

fn default_bins() -> usize {
    grid::DEFAULT_BINS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_x_min")]
    pub x_min_g: f64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_min_g: default_x_min(),
            ratio: default_ratio(),
            bins: default_bins(),
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<MassGrid> {
        MassGrid::geometric(self.x_min_g, self.ratio, self.bins)
    }
}

fn default_realizations() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "default_realizations")]
    pub realizations: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            realizations: default_realizations(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridConfig,
    pub initial: InitialDistributionSpec,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn field_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field_error(path, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn new(initial: InitialDistributionSpec, kernel: KernelSpec) -> Self {
        Self {
            grid: GridConfig::default(),
            initial,
            kernel,
            engine: EngineConfig::default(),
            ensemble: EnsembleConfig::default(),
            output: OutputConfig::default(),
        }
    }

    /// Checks every field, reporting the first failure with its key path.
    pub fn validate(&self) -> Result<()> {
        positive("grid.x_min_g", self.grid.x_min_g)?;
        if !(self.grid.ratio.is_finite() && self.grid.ratio > 1.0) {
            return Err(field_error(
                "grid.ratio",
                format!("must exceed 1, got {}", self.grid.ratio),
            ));
        }
        if self.grid.bins < 2 {
            return Err(field_error("grid.bins", format!("must be at least 2, got {}", self.grid.bins)));
        }
        let grid = self.grid.build().map_err(|e| field_error("grid", e.to_string()))?;
        if !grid.boundaries().iter().all(|b| b.is_finite()) {
            return Err(field_error("grid", "boundaries overflow"));
        }

        positive("initial.mean_mass_g", self.initial.mean_mass)?;
        positive("initial.total_number", self.initial.total_number)?;
        positive("initial.shape", self.initial.shape)?;
        positive("initial.scale_factor", self.initial.scale_factor)?;

        positive("kernel.coefficient", self.kernel.coefficient)?;
        let e = self.kernel.efficiency;
        if !(e > 0.0 && e <= 1.0) {
            return Err(field_error("kernel.efficiency", format!("must lie in (0, 1], got {e}")));
        }

        positive("engine.volume_cm3", self.engine.volume)?;
        if let Some(t) = self.engine.max_time {
            positive("engine.max_time_s", t)?;
        }
        if self.engine.max_time.is_none() && self.engine.max_events.unwrap_or(0) == 0 {
            return Err(field_error(
                "engine.max_events",
                "must be positive when engine.max_time_s is null",
            ));
        }
        for (k, t) in self.engine.snapshot_times.iter().enumerate() {
            if !(t.is_finite() && *t >= 0.0) {
                return Err(field_error(
                    &format!("engine.snapshot_times_s[{k}]"),
                    format!("must be non-negative, got {t}"),
                ));
            }
        }
        if self.engine.rate_check_interval == Some(0) {
            return Err(field_error("engine.rate_check_interval", "must be positive"));
        }
        if self.ensemble.realizations == 0 {
            return Err(field_error("ensemble.realizations", "must be at least 1"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form of the resolved configuration with
    /// the `output` section reset, so the destination does not change it.
    pub fn hash(&self) -> String {
        let physics = Self {
            output: OutputConfig::default(),
            ..self.clone()
        };
        let compact = serde_json::to_string(&physics).expect("config serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        field_error(if path == "." { "<root>" } else { &path }, e.into_inner().to_string())
    })?;
    de.end().map_err(|e| field_error("<root>", e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Mode;
    use crate::grid::DistributionKind;

    const MINIMAL: &str = r#"{
        "initial": {"kind": "gamma", "shape": 2.0, "mean_mass_g": 4.19e-9, "total_number": 1e4},
        "kernel": {"kind": "golovin_sum", "coefficient": 1500}
    }"#;

    fn message(err: Error) -> (String, String) {
        match err {
            Error::Config { path, message } => (path, message),
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.grid.bins, 70);
        assert_eq!(c.grid.ratio, 2f64.sqrt());
        assert_eq!(c.grid.x_min_g, 4.19e-12);
        assert_eq!(c.engine.mode, Mode::Refined);
        assert_eq!(c.engine.volume, 1.0);
        assert_eq!(c.initial.kind, DistributionKind::Gamma);
        assert_eq!(c.initial.scale_factor, 1.0);
        assert_eq!(c.ensemble.realizations, 100);
        assert_eq!(c.output.format, OutputFormat::Csv);
    }

    #[test]
    fn bad_ratio_names_the_field() {
        let text = MINIMAL.replacen('{', r#"{"grid": {"ratio": 0.5},"#, 1);
        let (path, msg) = message(parse_config_str(&text).unwrap_err());
        assert_eq!(path, "grid.ratio");
        assert!(msg.contains("0.5"));
    }

    #[test]
    fn legacy_mode_selected() {
        let text = MINIMAL.replacen('{', r#"{"engine": {"mode": "legacy"},"#, 1);
        assert_eq!(parse_config_str(&text).unwrap().engine.mode, Mode::Legacy);
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let text = MINIMAL.replacen('{', r#"{"engine": {"volume": 2.0},"#, 1);
        let (path, msg) = message(parse_config_str(&text).unwrap_err());
        assert!(msg.contains("unknown field"), "{msg}");
        assert!(path.starts_with("engine"), "{path}");

        let text = MINIMAL.replacen('{', r#"{"extra": 1,"#, 1);
        assert!(parse_config_str(&text).is_err());
    }

    #[test]
    fn missing_and_malformed() {
        let (path, _) = message(parse_config_str(r#"{"kernel": {"kind": "constant"}}"#).unwrap_err());
        assert_eq!(path, "<root>");
        assert!(parse_config_str("{not json").is_err());
        let text = MINIMAL.replace("golovin_sum", "bogus");
        let (path, _) = message(parse_config_str(&text).unwrap_err());
        assert_eq!(path, "kernel.kind");
        assert!(matches!(parse_config("/nonexistent/config.json"), Err(Error::Io { .. })));
    }

    #[test]
    fn invariant_violations_name_fields() {
        let text = MINIMAL.replace("1e4", "-1");
        assert_eq!(message(parse_config_str(&text).unwrap_err()).0, "initial.total_number");
        let text = MINIMAL.replacen('{', r#"{"engine": {"snapshot_times_s": [0, -2]},"#, 1);
        assert_eq!(message(parse_config_str(&text).unwrap_err()).0, "engine.snapshot_times_s[1]");
        let text = MINIMAL.replacen('{', r#"{"engine": {"max_time_s": null},"#, 1);
        assert_eq!(message(parse_config_str(&text).unwrap_err()).0, "engine.max_events");
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut c = parse_config_str(MINIMAL).unwrap();
        c.engine.snapshot_times = vec![0.0, 0.1, 1.0 / 3.0];
        c.engine.max_events = Some(12);
        let again = parse_config_str(&c.to_json()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);

        let mut moved = c.clone();
        moved.output.dir = "elsewhere".into();
        assert_eq!(moved.hash(), c.hash());
        moved.engine.seed += 1;
        assert_ne!(moved.hash(), c.hash());
    }
}
