//! Collision kernels `K(x, y)` in cm³ s⁻¹, with droplet masses in grams.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Density of liquid water, g cm⁻³.
pub const WATER_DENSITY: f64 = 1.0;

/// Stokes-regime fall speed coefficient: `v(r) = STOKES_COEFFICIENT * r²`,
/// with `r` in cm and `v` in cm s⁻¹.
pub const STOKES_COEFFICIENT: f64 = 1.19e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Constant,
    GolovinSum,
    Product,
    Hydrodynamic,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Constant => "constant",
            KernelKind::GolovinSum => "golovin_sum",
            KernelKind::Product => "product",
            KernelKind::Hydrodynamic => "hydrodynamic",
        }
    }
}

fn default_efficiency() -> f64 {
    1.0
}

fn default_coefficient() -> f64 {
    1.0
}

/// Kernel selection and coefficients.
///
/// `coefficient` is in cm³ s⁻¹ for `constant`, cm³ s⁻¹ g⁻¹ for `golovin_sum`
/// and cm³ s⁻¹ g⁻² for `product`. `hydrodynamic` ignores it and uses
/// `efficiency` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default = "default_coefficient")]
    pub coefficient: f64,
    #[serde(default = "default_efficiency")]
    pub efficiency: f64,
}

impl KernelSpec {
    pub fn constant(c: f64) -> Self {
        Self::with(KernelKind::Constant, c)
    }

    pub fn golovin_sum(b: f64) -> Self {
        Self::with(KernelKind::GolovinSum, b)
    }

    pub fn product(p: f64) -> Self {
        Self::with(KernelKind::Product, p)
    }

    pub fn hydrodynamic(efficiency: f64) -> Self {
        Self {
            kind: KernelKind::Hydrodynamic,
            coefficient: 1.0,
            efficiency,
        }
    }

    fn with(kind: KernelKind, coefficient: f64) -> Self {
        Self {
            kind,
            coefficient,
            efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coefficient.is_finite() && self.coefficient > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "coefficient must be positive, got {}",
                self.coefficient
            )));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::InvalidKernel(format!(
                "efficiency must lie in (0, 1], got {}",
                self.efficiency
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64> {
        for m in [x, y] {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::NonPositiveMass(m));
            }
        }
        Ok(self.evaluate_unchecked(x, y))
    }

    /// Evaluates without validating the masses.
    pub(crate) fn evaluate_unchecked(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            KernelKind::Constant => self.coefficient,
            KernelKind::GolovinSum => self.coefficient * (x + y),
            KernelKind::Product => self.coefficient * (x * y),
            KernelKind::Hydrodynamic => {
                let (rx, ry) = (radius(x), radius(y));
                let dv = (fall_speed(rx) - fall_speed(ry)).abs();
                self.efficiency * PI * (rx + ry).powi(2) * dv
            }
        }
    }
}

/// Radius (cm) of a water sphere of mass `m` grams.
pub fn radius(m: f64) -> f64 {
    (3.0 * m / (4.0 * PI * WATER_DENSITY)).cbrt()
}

/// Terminal fall speed (cm s⁻¹) of a droplet of radius `r` cm.
pub fn fall_speed(r: f64) -> f64 {
    STOKES_COEFFICIENT * r * r
}
