//! Droplet-mass grid and discretization of initial spectra.
//!
//! Bin `i` spans the half-open mass range `[boundaries[i], boundaries[i + 1])`.
//! An initial number density is integrated bin by bin into aggregate
//! droplet number and aggregate mass; the resulting numbers are real-valued
//! and need not be integers.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::spectrum::{BinState, SpectrumState};

/// Mass of a water droplet of radius 1 μm, in grams.
pub const ONE_MICRON_DROPLET_MASS: f64 = 4.19e-12;

pub const DEFAULT_RATIO: f64 = std::f64::consts::SQRT_2;
pub const DEFAULT_BINS: usize = 70;

/// Per-bin relative tolerance used when integrating initial densities.
pub const QUADRATURE_RTOL: f64 = 1e-10;

/// Bins whose integrated droplet number falls below this are zeroed.
pub const NUMBER_FLOOR: f64 = 1e-12;

/// Where a droplet mass falls relative to a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinLocation {
    Bin(usize),
    Overflow,
    Underflow,
}

impl BinLocation {
    pub fn bin(self) -> Option<usize> {
        match self {
            BinLocation::Bin(i) => Some(i),
            _ => None,
        }
    }
}

/// Ordered bin boundaries on the droplet-mass axis, in grams.
#[derive(Debug, Clone, PartialEq)]
pub struct MassGrid {
    boundaries: Vec<f64>,
}

impl MassGrid {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least two boundaries, got {}",
                boundaries.len()
            )));
        }
        if let Some(b) = boundaries.iter().find(|b| !b.is_finite() || **b <= 0.0) {
            return Err(Error::InvalidGrid(format!(
                "boundaries must be positive and finite, got {b}"
            )));
        }
        if let Some(w) = boundaries.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(format!(
                "boundaries must be strictly increasing (index {w}: {} >= {})",
                boundaries[w],
                boundaries[w + 1]
            )));
        }
        Ok(Self { boundaries })
    }

    /// Builds `n` bins with boundaries `x_min * ratio^k`, `k = 0..=n`.
    pub fn geometric(x_min: f64, ratio: f64, n: usize) -> Result<Self> {
        if !x_min.is_finite() || x_min <= 0.0 {
            return Err(Error::InvalidGrid(format!("x_min must be positive, got {x_min}")));
        }
        if !ratio.is_finite() || ratio <= 1.0 {
            return Err(Error::InvalidGrid(format!("ratio must exceed 1, got {ratio}")));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 bins, got {n}")));
        }
        let boundaries = (0..=n as i32).map(|k| x_min * ratio.powi(k)).collect();
        Self::new(boundaries)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lower and upper boundary of bin `i`.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        (self.boundaries[i], self.boundaries[i + 1])
    }

    pub fn lower(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn upper(&self) -> f64 {
        self.boundaries[self.boundaries.len() - 1]
    }

    pub fn bin_index_of(&self, mass: f64) -> Result<BinLocation> {
        if !mass.is_finite() || mass <= 0.0 {
            return Err(Error::NonPositiveMass(mass));
        }
        let above = self.boundaries.partition_point(|&b| b <= mass);
        Ok(if above == 0 {
            BinLocation::Underflow
        } else if above == self.boundaries.len() {
            BinLocation::Overflow
        } else {
            BinLocation::Bin(above - 1)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Gamma,
    Exponential,
    Monodisperse,
}

fn default_shape() -> f64 {
    1.0
}

fn default_scale_factor() -> f64 {
    1.0
}

/// Initial droplet number density.
///
/// The gamma density is `n(x) ∝ x^(shape-1) exp(-x/θ)` with `θ = mean_mass / shape`,
/// normalized so that its integral over `(0, ∞)` is `total_number * scale_factor`.
/// `exponential` is the `shape = 1` case (the `shape` field is ignored), and
/// `monodisperse` places every droplet at `mean_mass`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDistributionSpec {
    pub kind: DistributionKind,
    #[serde(default = "default_shape")]
    pub shape: f64,
    #[serde(rename = "mean_mass_g")]
    pub mean_mass: f64,
    pub total_number: f64,
    #[serde(default = "default_scale_factor")]
    pub scale_factor: f64,
}

impl InitialDistributionSpec {
    pub fn gamma(shape: f64, mean_mass: f64, total_number: f64) -> Self {
        Self {
            kind: DistributionKind::Gamma,
            shape,
            mean_mass,
            total_number,
            scale_factor: 1.0,
        }
    }

    pub fn exponential(mean_mass: f64, total_number: f64) -> Self {
        Self {
            kind: DistributionKind::Exponential,
            ..Self::gamma(1.0, mean_mass, total_number)
        }
    }

    pub fn monodisperse(mass: f64, total_number: f64) -> Self {
        Self {
            kind: DistributionKind::Monodisperse,
            ..Self::gamma(1.0, mass, total_number)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidDistribution(format!("{name} must be positive, got {v}")))
            }
        };
        positive("shape", self.shape)?;
        positive("mean_mass_g", self.mean_mass)?;
        positive("total_number", self.total_number)?;
        positive("scale_factor", self.scale_factor)
    }

    fn effective_shape(&self) -> f64 {
        match self.kind {
            DistributionKind::Exponential => 1.0,
            _ => self.shape,
        }
    }

    /// Number density `n(x)` in droplets per gram. Zero for monodisperse.
    pub fn number_density(&self, x: f64) -> f64 {
        if self.kind == DistributionKind::Monodisperse || x <= 0.0 {
            return 0.0;
        }
        let k = self.effective_shape();
        let theta = self.mean_mass / k;
        let log_n = (k - 1.0) * x.ln() - x / theta - ln_gamma(k) - k * theta.ln();
        self.total_number * self.scale_factor * log_n.exp()
    }
}

/// Integrates `spec` over each bin of `grid`.
pub fn discretize(spec: &InitialDistributionSpec, grid: &MassGrid) -> Result<SpectrumState> {
    spec.validate()?;
    let mut bins = vec![BinState::default(); grid.len()];
    match spec.kind {
        DistributionKind::Monodisperse => {
            let i = grid
                .bin_index_of(spec.mean_mass)?
                .bin()
                .ok_or(Error::EmptySpectrum)?;
            let number = spec.total_number * spec.scale_factor;
            bins[i] = BinState::new(number * spec.mean_mass, number);
        }
        DistributionKind::Gamma | DistributionKind::Exponential => {
            for (i, bin) in bins.iter_mut().enumerate() {
                let (lo, hi) = grid.bounds(i);
                let number =
                    quadrature::integrate(|x| spec.number_density(x), lo, hi, QUADRATURE_RTOL);
                if number < NUMBER_FLOOR {
                    continue;
                }
                let mass = quadrature::integrate(
                    |x| x * spec.number_density(x),
                    lo,
                    hi,
                    QUADRATURE_RTOL,
                );
                *bin = BinState::new(mass, number);
            }
        }
    }
    if bins.iter().all(|b| b.number() == 0.0) {
        return Err(Error::EmptySpectrum);
    }
    Ok(SpectrumState::new(bins))
}
