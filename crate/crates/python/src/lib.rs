//! Python bindings for the `coalesce` simulator.

use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;

use coalesce::config::{parse_config_str, RunConfig};
use coalesce::engine::{self, Mode};
use coalesce::grid::{self as cgrid, BinLocation, DistributionKind, InitialDistributionSpec};
use coalesce::kernels::{KernelKind, KernelSpec};
use coalesce::selection;
use coalesce::spectrum::{self, BinState};

fn py_err(e: coalesce::Error) -> PyErr {
    match e {
        coalesce::Error::BinOutOfRange { .. } => PyIndexError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse().map_err(|e: String| PyValueError::new_err(e))
}

fn kernel_spec(kind: &str, coefficient: f64, efficiency: f64) -> PyResult<KernelSpec> {
    let kind = match kind {
        "constant" => KernelKind::Constant,
        "golovin_sum" => KernelKind::GolovinSum,
        "product" => KernelKind::Product,
        "hydrodynamic" => KernelKind::Hydrodynamic,
        other => return Err(PyValueError::new_err(format!("unknown kernel kind {other:?}"))),
    };
    let spec = KernelSpec {
        kind,
        coefficient,
        efficiency,
    };
    spec.validate().map_err(py_err)?;
    Ok(spec)
}

/// Geometric (or explicit) bin boundaries in grams.
#[pyclass(name = "MassGrid", module = "coalesce", frozen)]
struct PyMassGrid {
    inner: cgrid::MassGrid,
}

#[pymethods]
impl PyMassGrid {
    #[new]
    fn new(boundaries: Vec<f64>) -> PyResult<Self> {
        let inner = cgrid::MassGrid::new(boundaries).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (x_min=cgrid::ONE_MICRON_DROPLET_MASS, ratio=cgrid::DEFAULT_RATIO, bins=cgrid::DEFAULT_BINS))]
    fn geometric(x_min: f64, ratio: f64, bins: usize) -> PyResult<Self> {
        let inner = cgrid::MassGrid::geometric(x_min, ratio, bins).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn boundaries(&self) -> Vec<f64> {
        self.inner.boundaries().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn bounds(&self, i: usize) -> PyResult<(f64, f64)> {
        if i >= self.inner.len() {
            return Err(PyIndexError::new_err(format!("bin {i} out of range")));
        }
        Ok(self.inner.bounds(i))
    }

    /// Bin index holding `mass`, or `"overflow"` / `"underflow"` outside the grid.
    fn bin_index_of(&self, py: Python<'_>, mass: f64) -> PyResult<Py<PyAny>> {
        let out = match self.inner.bin_index_of(mass).map_err(py_err)? {
            BinLocation::Bin(i) => i.into_pyobject(py)?.into_any().unbind(),
            BinLocation::Overflow => "overflow".into_pyobject(py)?.into_any().unbind(),
            BinLocation::Underflow => "underflow".into_pyobject(py)?.into_any().unbind(),
        };
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "MassGrid(bins={}, lower={:e}, upper={:e})",
            self.inner.len(),
            self.inner.lower(),
            self.inner.upper()
        )
    }
}

/// Per-bin mass and number plus the overflow reservoir.
#[pyclass(name = "SpectrumState", module = "coalesce")]
struct PySpectrumState {
    inner: spectrum::SpectrumState,
}

#[pymethods]
impl PySpectrumState {
    /// Builds a state from `(mass_g, number)` pairs.
    #[new]
    fn new(bins: Vec<(f64, f64)>) -> PyResult<Self> {
        if bins.iter().any(|&(m, n)| !(m >= 0.0 && n >= 0.0 && m.is_finite() && n.is_finite())) {
            return Err(PyValueError::new_err("bin mass and number must be finite and non-negative"));
        }
        let bins = bins.into_iter().map(|(m, n)| BinState::new(m, n)).collect();
        Ok(Self {
            inner: spectrum::SpectrumState::new(bins),
        })
    }

    #[getter]
    fn bins(&self) -> Vec<(f64, f64)> {
        self.inner.bins.iter().map(|b| (b.mass, b.number())).collect()
    }

    #[getter]
    fn overflow(&self) -> (f64, f64) {
        (self.inner.overflow_mass, self.inner.overflow_number)
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time
    }

    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    fn total_number(&self) -> f64 {
        self.inner.total_number()
    }

    fn moment(&self, k: u32) -> f64 {
        self.inner.moment(k)
    }

    fn mean_mass(&self, i: usize) -> PyResult<f64> {
        self.inner.mean_mass(i).map_err(py_err)
    }

    /// Removes a droplet of mass `x` from bin `i`. Returns the violation as a
    /// dict in legacy mode, `None` otherwise.
    #[pyo3(signature = (grid, i, x, mode="refined"))]
    fn remove_droplet(
        &mut self,
        py: Python<'_>,
        grid: &PyMassGrid,
        i: usize,
        x: f64,
        mode: &str,
    ) -> PyResult<Option<Py<PyAny>>> {
        let record = self
            .inner
            .remove_droplet(&grid.inner, i, x, parse_mode(mode)?)
            .map_err(py_err)?;
        record
            .map(|v| {
                let d = pyo3::types::PyDict::new(py);
                d.set_item("time", v.time)?;
                d.set_item("bin", v.bin)?;
                d.set_item("pre_mass", v.pre_mass)?;
                d.set_item("pre_number", v.pre_number)?;
                d.set_item("removed", v.removed)?;
                d.set_item("post_mean", v.post_mean)?;
                d.set_item("side", v.side.name())?;
                Ok(d.into_any().unbind())
            })
            .transpose()
    }

    /// Adds a droplet of mass `x`; returns the bin index or `"overflow"`.
    fn deposit_droplet(&mut self, py: Python<'_>, grid: &PyMassGrid, x: f64) -> PyResult<Py<PyAny>> {
        let out = match self.inner.deposit_droplet(&grid.inner, x).map_err(py_err)? {
            BinLocation::Bin(i) => i.into_pyobject(py)?.into_any().unbind(),
            _ => "overflow".into_pyobject(py)?.into_any().unbind(),
        };
        Ok(out)
    }

    fn __len__(&self) -> usize {
        self.inner.bins.len()
    }
}

/// Integrates an initial distribution over the bins of `grid`.
#[pyfunction]
#[pyo3(signature = (grid, kind, mean_mass_g, total_number, shape=1.0, scale_factor=1.0))]
fn discretize(
    grid: &PyMassGrid,
    kind: &str,
    mean_mass_g: f64,
    total_number: f64,
    shape: f64,
    scale_factor: f64,
) -> PyResult<PySpectrumState> {
    let kind = match kind {
        "gamma" => DistributionKind::Gamma,
        "exponential" => DistributionKind::Exponential,
        "monodisperse" => DistributionKind::Monodisperse,
        other => return Err(PyValueError::new_err(format!("unknown distribution {other:?}"))),
    };
    let spec = InitialDistributionSpec {
        kind,
        shape,
        mean_mass: mean_mass_g,
        total_number,
        scale_factor,
    };
    let inner = cgrid::discretize(&spec, &grid.inner).map_err(py_err)?;
    Ok(PySpectrumState { inner })
}

/// Selection interval for one bin, with every intermediate bound.
#[pyclass(name = "SelectionInterval", module = "coalesce", frozen, get_all)]
struct PySelectionInterval {
    mean: f64,
    d_lo: f64,
    d_hi: f64,
    e_lo: f64,
    e_hi: f64,
    r_lo: f64,
    r_hi: f64,
    s_lo: f64,
    s_hi: f64,
    half_width: f64,
}

impl From<selection::SelectionInterval> for PySelectionInterval {
    fn from(s: selection::SelectionInterval) -> Self {
        Self {
            mean: s.mean,
            d_lo: s.d_lo,
            d_hi: s.d_hi,
            e_lo: s.e_lo,
            e_hi: s.e_hi,
            r_lo: s.r_lo,
            r_hi: s.r_hi,
            s_lo: s.s_lo,
            s_hi: s.s_hi,
            half_width: s.half_width,
        }
    }
}

impl PySelectionInterval {
    fn to_core(&self) -> selection::SelectionInterval {
        selection::SelectionInterval {
            mean: self.mean,
            d_lo: self.d_lo,
            d_hi: self.d_hi,
            e_lo: self.e_lo,
            e_hi: self.e_hi,
            r_lo: self.r_lo,
            r_hi: self.r_hi,
            s_lo: self.s_lo,
            s_hi: self.s_hi,
            half_width: self.half_width,
        }
    }
}

#[pymethods]
impl PySelectionInterval {
    /// Maps a uniform `u` in `[0, 1)` onto the interval.
    fn draw(&self, u: f64) -> f64 {
        selection::draw_source_mass(&self.to_core(), u)
    }

    fn __repr__(&self) -> String {
        format!("SelectionInterval(s_lo={:e}, s_hi={:e}, mean={:e})", self.s_lo, self.s_hi, self.mean)
    }
}

#[pyfunction]
fn base_interval(x_lo: f64, x_hi: f64, mean: f64) -> PyResult<(f64, f64)> {
    selection::base_interval(x_lo, x_hi, mean).map_err(py_err)
}

#[pyfunction]
fn constraint_bounds(mass: f64, number: f64, x_lo: f64, x_hi: f64) -> PyResult<(f64, f64)> {
    selection::constraint_bounds(mass, number, x_lo, x_hi).map_err(py_err)
}

#[pyfunction]
fn refined_interval(mass: f64, number: f64, x_lo: f64, x_hi: f64) -> PyResult<PySelectionInterval> {
    selection::refined_interval(mass, number, x_lo, x_hi)
        .map(Into::into)
        .map_err(py_err)
}

#[pyfunction]
fn legacy_interval(mass: f64, number: f64, x_lo: f64, x_hi: f64) -> PyResult<PySelectionInterval> {
    selection::legacy_interval(mass, number, x_lo, x_hi)
        .map(Into::into)
        .map_err(py_err)
}

/// Collection kernel value in cm³ s⁻¹ for droplet masses `x` and `y` in grams.
#[pyfunction]
#[pyo3(signature = (kind, x, y, coefficient=1.0, efficiency=1.0))]
fn kernel(kind: &str, x: f64, y: f64, coefficient: f64, efficiency: f64) -> PyResult<f64> {
    kernel_spec(kind, coefficient, efficiency)?.evaluate(x, y).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (kind, n0, l0, volume, t, coefficient=1.0))]
fn analytic_number(kind: &str, n0: f64, l0: f64, volume: f64, t: f64, coefficient: f64) -> PyResult<f64> {
    let spec = kernel_spec(kind, coefficient, 1.0)?;
    coalesce::ensemble::analytic_number(&spec, n0, l0, volume, t).map_err(py_err)
}

fn load(config_json: &str, seed: Option<u64>, mode: Option<&str>) -> PyResult<RunConfig> {
    let mut config = parse_config_str(config_json).map_err(py_err)?;
    if let Some(seed) = seed {
        config.engine.seed = seed;
    }
    if let Some(mode) = mode {
        config.engine.mode = parse_mode(mode)?;
    }
    Ok(config)
}

/// Runs one realization from a JSON config and returns a JSON summary with
/// the ledger, the snapshot moments and the violation log.
#[pyfunction]
#[pyo3(signature = (config_json, seed=None, mode=None))]
fn run(py: Python<'_>, config_json: &str, seed: Option<u64>, mode: Option<&str>) -> PyResult<String> {
    let config = load(config_json, seed, mode)?;
    let grid = config.grid.build().map_err(py_err)?;
    let initial = cgrid::discretize(&config.initial, &grid).map_err(py_err)?;
    let stats = py
        .detach(|| engine::run(&config.engine, &initial, &grid, &config.kernel))
        .map_err(py_err)?;
    let snapshots: Vec<_> = stats
        .snapshots
        .iter()
        .map(|s| {
            serde_json::json!({
                "time_s": s.time,
                "moments": (0..4).map(|k| s.state.moment(k)).collect::<Vec<_>>(),
                "number": s.state.bins.iter().map(|b| b.number()).collect::<Vec<_>>(),
                "mass_g": s.state.bins.iter().map(|b| b.mass).collect::<Vec<_>>(),
            })
        })
        .collect();
    let body = serde_json::json!({
        "seed": stats.seed,
        "mode": stats.mode,
        "termination": stats.termination,
        "ledger": stats.ledger,
        "violations": stats.violations,
        "snapshots": snapshots,
    });
    Ok(body.to_string())
}

/// Runs `ensemble.realizations` realizations and returns the aggregate as JSON.
#[pyfunction]
#[pyo3(signature = (config_json, seed=None, mode=None, realizations=None))]
fn ensemble(
    py: Python<'_>,
    config_json: &str,
    seed: Option<u64>,
    mode: Option<&str>,
    realizations: Option<usize>,
) -> PyResult<String> {
    let config = load(config_json, seed, mode)?;
    let grid = config.grid.build().map_err(py_err)?;
    let initial = cgrid::discretize(&config.initial, &grid).map_err(py_err)?;
    let n = realizations.unwrap_or(config.ensemble.realizations);
    let result = py
        .detach(|| {
            coalesce::ensemble::run_ensemble(&config.engine, &initial, &grid, &config.kernel, n, config.engine.seed)
        })
        .map_err(py_err)?;
    serde_json::to_string(&result).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Stochastic coalescence on a mass grid with exact bin-mean bookkeeping.
#[pymodule(name = "coalesce")]
mod coalesce_module {
    #[pymodule_export]
    use super::{
        analytic_number, base_interval, constraint_bounds, discretize, ensemble, kernel, legacy_interval,
        refined_interval, run, PyMassGrid, PySelectionInterval, PySpectrumState,
    };

    #[pymodule_init]
    fn init(m: &pyo3::Bound<'_, pyo3::types::PyModule>) -> pyo3::PyResult<()> {
        use pyo3::types::PyModuleMethods;
        m.add("__version__", coalesce::VERSION)?;
        m.add("RNG_ALGORITHM", coalesce::rng::RNG_ALGORITHM)
    }
}
