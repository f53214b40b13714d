//! Per-bin aggregate state of the droplet spectrum.

use serde::{Deserialize, Serialize};

use crate::engine::{Mode, ViolationRecord, ViolationSide};
use crate::error::{Error, Result};
use crate::grid::{BinLocation, MassGrid};

/// Relative slack allowed when testing whether a mean mass lies in its bin.
pub const BOUNDARY_RTOL: f64 = 1e-12;

/// Relative tolerance for matching a removal against the whole content of a
/// single-droplet bin.
pub const FULL_REMOVAL_RTOL: f64 = 1e-12;

/// Whether `mean` lies in `[x_lo, x_hi]` up to [`BOUNDARY_RTOL`].
/// Correctly rounded sum (running non-overlapping partials).
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut kept = 0;
        for k in 0..partials.len() {
            let mut y = partials[k];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    let mut hi = 0.0;
    while let Some(x) = partials.pop() {
        let prev = hi;
        hi = prev + x;
        let lo = x - (hi - prev);
        if lo != 0.0 {
            if let Some(&next) = partials.last() {
                // round-half-even correction across the remaining partials
                if (lo < 0.0) == (next < 0.0) {
                    let y = lo * 2.0;
                    let corrected = hi + y;
                    if y == corrected - hi {
                        hi = corrected;
                    }
                }
            }
            break;
        }
    }
    hi
}

pub fn within_bin(mean: f64, x_lo: f64, x_hi: f64) -> bool {
    mean >= x_lo * (1.0 - BOUNDARY_RTOL) && mean <= x_hi * (1.0 + BOUNDARY_RTOL)
}

/// Aggregate mass (grams) and droplet number of one bin.
///
/// The number is held as a whole count plus a fractional residue in `[0, 1)`
/// fixed at construction, so adding or removing a droplet changes it by
/// exactly one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BinState {
    pub mass: f64,
    count: u64,
    residue: f64,
}

impl BinState {
    /// A bin with total `mass` and `number` droplets (non-negative, below 2^53).
    pub fn new(mass: f64, number: f64) -> Self {
        debug_assert!((0.0..9.007_199_254_740_992e15).contains(&number), "{number}");
        let whole = number.floor();
        Self {
            mass,
            count: whole as u64,
            residue: number - whole,
        }
    }

    pub fn number(&self) -> f64 {
        self.count as f64 + self.residue
    }

    /// Whole droplets in the bin.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Fractional droplet number, unchanged by collisions.
    pub fn residue(&self) -> f64 {
        self.residue
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0 && self.residue == 0.0
    }

    /// Mean droplet mass, `None` for an empty bin.
    pub fn mean(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.mass / self.number())
    }

    /// A bin can give up a droplet only if it holds at least one whole droplet.
    pub fn is_eligible_source(&self) -> bool {
        self.count >= 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumState {
    pub bins: Vec<BinState>,
    pub overflow_mass: f64,
    pub overflow_number: f64,
    pub time: f64,
}

impl SpectrumState {
    pub fn new(bins: Vec<BinState>) -> Self {
        Self {
            bins,
            overflow_mass: 0.0,
            overflow_number: 0.0,
            time: 0.0,
        }
    }

    pub fn empty(n: usize) -> Self {
        Self::new(vec![BinState::default(); n])
    }

    fn bin(&self, i: usize) -> Result<&BinState> {
        self.bins.get(i).ok_or(Error::BinOutOfRange {
            index: i,
            bins: self.bins.len(),
        })
    }

    pub fn mean_mass(&self, i: usize) -> Result<f64> {
        self.bin(i)?.mean().ok_or(Error::EmptyBin(i))
    }

    /// Total mass in the bins plus the overflow reservoir.
    pub fn total_mass(&self) -> f64 {
        exact_sum(self.bins.iter().map(|b| b.mass).chain([self.overflow_mass]))
    }

    /// Total droplet number in the bins plus the overflow reservoir.
    pub fn total_number(&self) -> f64 {
        exact_sum(
            self.bins
                .iter()
                .flat_map(|b| [b.count as f64, b.residue])
                .chain([self.overflow_number]),
        )
    }

    /// Whole droplets in the bins and the overflow reservoir.
    pub fn whole_count(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum::<u64>() + self.overflow_number as u64
    }

    /// Sum of the fractional bin residues.
    pub fn residue_total(&self) -> f64 {
        exact_sum(self.bins.iter().map(|b| b.residue))
    }

    /// Removes one droplet of mass `x` from bin `i`.
    ///
    /// A bin holding exactly one droplet must give up its whole content. For
    /// `N > 1` the remaining mean `(L - x) / (N - 1)` must stay inside the bin:
    /// in refined mode a breach is an [`Error::InvariantBreach`], in legacy
    /// mode the removal is applied and reported as a [`ViolationRecord`].
    pub fn remove_droplet(
        &mut self,
        grid: &MassGrid,
        i: usize,
        x: f64,
        mode: Mode,
    ) -> Result<Option<ViolationRecord>> {
        let before = *self.bin(i)?;
        let (x_lo, x_hi) = grid.bounds(i);
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::NonPositiveMass(x));
        }
        if !before.is_eligible_source() {
            return Err(Error::InvalidRemoval {
                bin: i,
                reason: format!("bin holds {} droplets, fewer than one", before.number()),
            });
        }
        if mode == Mode::Refined && !within_bin(x, x_lo, x_hi) {
            return Err(Error::InvalidRemoval {
                bin: i,
                reason: format!("removed mass {x:e} g outside [{x_lo:e}, {x_hi:e}] g"),
            });
        }

        if before.number() == 1.0 {
            if (x - before.mass).abs() > FULL_REMOVAL_RTOL * before.mass.abs() {
                return Err(Error::InvalidRemoval {
                    bin: i,
                    reason: format!(
                        "single droplet of mass {:e} g cannot lose {x:e} g",
                        before.mass
                    ),
                });
            }
            self.bins[i] = BinState::default();
            return Ok(None);
        }

        let after = BinState {
            mass: before.mass - x,
            count: before.count - 1,
            residue: before.residue,
        };
        let post_mean = after.mass / after.number();
        let inside = within_bin(post_mean, x_lo, x_hi);
        if !inside && mode == Mode::Refined {
            return Err(Error::InvariantBreach {
                time: self.time,
                bin: i,
                post_mean,
                x_lo,
                x_hi,
            });
        }
        self.bins[i] = after;
        Ok((!inside).then(|| ViolationRecord {
            time: self.time,
            bin: i,
            pre_mass: before.mass,
            pre_number: before.number(),
            removed: x,
            post_mean,
            side: if post_mean < x_lo {
                ViolationSide::BelowLower
            } else {
                ViolationSide::AboveUpper
            },
        }))
    }

    /// Adds one droplet of mass `x` to the bin containing it, or to the
    /// overflow reservoir past the last boundary.
    pub fn deposit_droplet(&mut self, grid: &MassGrid, x: f64) -> Result<BinLocation> {
        let location = grid.bin_index_of(x)?;
        match location {
            BinLocation::Bin(k) => {
                let bin = &mut self.bins[k];
                bin.mass += x;
                bin.count += 1;
            }
            BinLocation::Overflow => {
                self.overflow_mass += x;
                self.overflow_number += 1.0;
            }
            BinLocation::Underflow => return Err(Error::BelowGrid(x)),
        }
        Ok(location)
    }

    /// Moment of order `k` of the spectrum.
    ///
    /// Orders 0 and 1 are exact and include the overflow reservoir. Higher
    /// orders use each bin's mean mass as a stand-in for its unknown
    /// intra-bin distribution, and leave out the reservoir.
    pub fn moment(&self, k: u32) -> f64 {
        match k {
            0 => self.total_number(),
            1 => self.total_mass(),
            _ => self
                .bins
                .iter()
                .filter_map(|b| b.mean().map(|m| b.number() * m.powi(k as i32)))
                .sum(),
        }
    }

    /// One record per bin, in grid order.
    pub fn records(&self, grid: &MassGrid) -> Vec<BinRecord> {
        self.bins
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let (x_lo, x_hi) = grid.bounds(i);
                BinRecord {
                    bin: i,
                    x_lo_g: x_lo,
                    x_hi_g: x_hi,
                    mass_g: b.mass,
                    number: b.number(),
                    mean_mass_g: b.mean(),
                }
            })
            .collect()
    }
}

/// Serialized view of one bin in a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRecord {
    pub bin: usize,
    pub x_lo_g: f64,
    pub x_hi_g: f64,
    pub mass_g: f64,
    pub number: f64,
    pub mean_mass_g: Option<f64>,
}
