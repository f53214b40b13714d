//! Intra-bin selection intervals for the mass of a removed droplet.
//!
//! A source droplet is drawn uniformly from an interval centred on the bin's
//! mean mass `x̄ = L / N`. The base interval is the widest such interval that
//! fits inside the bin. On its own it does not stop the remaining droplets
//! from ending up with a mean outside the bin when `1 < N < 2`. The refined
//! interval additionally intersects it with
//!
//! ```text
//! e_lo = L - x_hi (N - 1)    (removing more keeps the remaining mean <= x_hi)
//! e_hi = L - x_lo (N - 1)    (removing less keeps the remaining mean >= x_lo)
//! ```
//!
//! and then shrinks the intersection to be symmetric about `x̄` again, so that
//! draws stay unbiased. The result nests as `[s_lo, s_hi] ⊆ [r_lo, r_hi] ⊆
//! [d_lo, d_hi] ⊆ [x_lo, x_hi]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::within_bin;

/// The nested selection intervals for one bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionInterval {
    pub mean: f64,
    /// Base interval, symmetric about `mean`.
    pub d_lo: f64,
    pub d_hi: f64,
    /// Remaining-mean constraints.
    pub e_lo: f64,
    pub e_hi: f64,
    /// Base interval intersected with the constraints.
    pub r_lo: f64,
    pub r_hi: f64,
    /// Interval actually sampled.
    pub s_lo: f64,
    pub s_hi: f64,
    pub half_width: f64,
}

impl SelectionInterval {
    /// A zero-width interval at `mass`; all bounds coincide.
    pub fn point(mass: f64) -> Self {
        Self {
            mean: mass,
            d_lo: mass,
            d_hi: mass,
            e_lo: mass,
            e_hi: mass,
            r_lo: mass,
            r_hi: mass,
            s_lo: mass,
            s_hi: mass,
            half_width: 0.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.s_hi - self.s_lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.s_lo <= x && x <= self.s_hi
    }
}

/// Widest interval inside `[x_lo, x_hi]` symmetric about `mean`.
pub fn base_interval(x_lo: f64, x_hi: f64, mean: f64) -> Result<(f64, f64)> {
    if !within_bin(mean, x_lo, x_hi) {
        return Err(Error::MeanOutsideBin { mean, x_lo, x_hi });
    }
    let dm = (x_hi - mean).min(mean - x_lo).max(0.0);
    Ok((mean - dm, mean + dm))
}

/// Range of removable masses that keep the remaining mean inside the bin.
pub fn constraint_bounds(mass: f64, number: f64, x_lo: f64, x_hi: f64) -> Result<(f64, f64)> {
    if number.is_nan() || number <= 1.0 {
        return Err(Error::NotARemovableSource(number));
    }
    let rest = number - 1.0;
    Ok((mass - x_hi * rest, mass - x_lo * rest))
}

fn remaining_mean_inside(mass: f64, number: f64, x: f64, x_lo: f64, x_hi: f64) -> bool {
    // Same arithmetic as SpectrumState::remove_droplet.
    let m = (mass - x) / (number - 1.0);
    m >= x_lo && m <= x_hi
}

/// The bounded selection interval for a bin holding `mass` grams in `number > 1`
/// droplets.
///
/// Both constraints are reflected about the mean: the half-width is
/// `min(x̄ - r_lo, r_hi - x̄)`, so whichever side binds more tightly sets the
/// width. When the constraints bind, the half-width is additionally trimmed by
/// at most a few ulps until both endpoints pass the remaining-mean test in
/// floating point.
pub fn refined_interval(mass: f64, number: f64, x_lo: f64, x_hi: f64) -> Result<SelectionInterval> {
    let (e_lo, e_hi) = constraint_bounds(mass, number, x_lo, x_hi)?;
    let mean = mass / number;
    let (d_lo, d_hi) = base_interval(x_lo, x_hi, mean)?;
    let r_lo = d_lo.max(e_lo);
    let r_hi = d_hi.min(e_hi);

    let mut w = mean - d_lo;
    let mut constrained = false;
    if e_lo > d_lo {
        w = w.min(mean - e_lo);
        constrained = true;
    }
    if e_hi < d_hi {
        w = w.min(e_hi - mean);
        constrained = true;
    }
    let mut w = w.max(0.0);

    let (mut s_lo, mut s_hi) = if constrained {
        (mean - w, mean + w)
    } else {
        // keeps the unconstrained case bit-identical to the base interval
        (d_lo, d_hi)
    };

    if constrained {
        let full = w;
        for k in 0..=52 {
            if remaining_mean_inside(mass, number, s_lo, x_lo, x_hi)
                && remaining_mean_inside(mass, number, s_hi, x_lo, x_hi)
            {
                break;
            }
            w = (full * (1.0 - f64::EPSILON * 2f64.powi(k))).max(0.0);
            s_lo = mean - w;
            s_hi = mean + w;
        }
    }

    Ok(SelectionInterval {
        mean,
        d_lo,
        d_hi,
        e_lo,
        e_hi,
        r_lo,
        r_hi,
        s_lo,
        s_hi,
        half_width: w,
    })
}

/// The base interval alone, as used by the original bin method. The
/// constraints are computed and reported but not applied.
pub fn legacy_interval(mass: f64, number: f64, x_lo: f64, x_hi: f64) -> Result<SelectionInterval> {
    let (e_lo, e_hi) = constraint_bounds(mass, number, x_lo, x_hi)?;
    let mean = mass / number;
    let (d_lo, d_hi) = base_interval(x_lo, x_hi, mean)?;
    Ok(SelectionInterval {
        mean,
        d_lo,
        d_hi,
        e_lo,
        e_hi,
        r_lo: d_lo,
        r_hi: d_hi,
        s_lo: d_lo,
        s_hi: d_hi,
        half_width: mean - d_lo,
    })
}

/// Maps `u ∈ [0, 1)` affinely onto the sampled interval.
pub fn draw_source_mass(interval: &SelectionInterval, u: f64) -> f64 {
    (interval.s_lo + u * (interval.s_hi - interval.s_lo)).clamp(interval.s_lo, interval.s_hi)
}
