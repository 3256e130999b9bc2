//! Python bindings: series, events, curves, fits and generators.
//!
//! Arrays cross the boundary as Python lists of floats/ints; errors become
//! `ValueError` (bad input) or `RuntimeError` (fit failures).

use std::fs::File;
use std::io::BufReader;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use volrelax as vr;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn core_err(e: vr::Error) -> PyErr {
    match e {
        vr::Error::AtBound { .. } | vr::Error::NonPositiveValue { .. } | vr::Error::BootstrapFailures { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => value_err(other),
    }
}

fn direction(s: &str) -> PyResult<vr::Direction> {
    s.parse().map_err(value_err)
}

fn window(curve: &vr::RelaxationCurve, fit_window: Option<(usize, usize)>) -> vr::FitWindow {
    match fit_window {
        Some((lo, hi)) => vr::FitWindow::new(lo, hi),
        None => vr::FitWindow::new(1, curve.max_lag()),
    }
}

#[pyclass(name = "PriceSeries", module = "volrelax", frozen)]
struct PyPriceSeries(vr::PriceSeries);

#[pymethods]
impl PyPriceSeries {
    /// Reads a `timestamp,price` CSV; `bar_interval` is minutes per bar, 0 for daily.
    #[staticmethod]
    #[pyo3(signature = (path, bar_interval = 0))]
    fn read_csv(path: &str, bar_interval: u32) -> PyResult<Self> {
        let file = File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        vr::ingest_prices(BufReader::new(file), bar_interval).map(Self).map_err(core_err)
    }

    /// Parses CSV text.
    #[staticmethod]
    #[pyo3(signature = (text, bar_interval = 0))]
    fn from_csv(text: &str, bar_interval: u32) -> PyResult<Self> {
        vr::ingest_prices(text.as_bytes(), bar_interval).map(Self).map_err(core_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn prices(&self) -> Vec<f64> {
        self.0.prices().to_vec()
    }

    #[getter]
    fn timestamps(&self) -> Vec<String> {
        self.0.timestamps().iter().map(|t| t.format("%Y-%m-%dT%H:%M:%S").to_string()).collect()
    }

    #[getter]
    fn is_daily(&self) -> bool {
        self.0.is_daily()
    }

    #[getter]
    fn n_days(&self) -> usize {
        self.0.n_days()
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    /// Absolute log returns, optionally with overnight bars excluded.
    #[pyo3(signature = (exclude_overnight = false))]
    fn volatility(&self, exclude_overnight: bool) -> PyResult<PyVolatility> {
        let vol = vr::compute_returns(&self.0).map_err(core_err)?;
        Ok(PyVolatility(vr::apply_overnight_policy(&vol, exclude_overnight)))
    }

    fn __repr__(&self) -> String {
        format!("PriceSeries(len={}, daily={})", self.0.len(), self.0.is_daily())
    }
}

#[pyclass(name = "VolatilitySeries", module = "volrelax", frozen)]
struct PyVolatility(vr::VolatilitySeries);

#[pymethods]
impl PyVolatility {
    /// From signed returns; `|r|` becomes the volatility.
    #[staticmethod]
    fn from_returns(returns: Vec<f64>) -> Self {
        Self(vr::VolatilitySeries::from_returns(returns))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn returns(&self) -> Vec<f64> {
        self.0.returns().to_vec()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma()
    }

    #[getter]
    fn normalized(&self) -> bool {
        self.0.normalized()
    }

    /// Intraday pattern `D(slot)` estimated from this series.
    fn intraday_pattern(&self) -> PyResult<Vec<f64>> {
        vr::estimate_pattern(&self.0).map(|p| p.pattern().to_vec()).map_err(core_err)
    }

    /// The series divided by its own intraday pattern.
    fn detrended(&self) -> PyResult<Self> {
        let pattern = vr::estimate_pattern(&self.0).map_err(core_err)?;
        vr::normalize(&self.0, &pattern).map(Self).map_err(core_err)
    }

    /// Bars with `|R| > zeta * sigma`.
    fn select_events(&self, zeta: f64) -> PyResult<PyEventSet> {
        vr::select_events(&self.0, zeta).map(PyEventSet).map_err(core_err)
    }

    fn __repr__(&self) -> String {
        format!("VolatilitySeries(len={}, sigma={})", self.0.len(), self.0.sigma())
    }
}

#[pyclass(name = "EventSet", module = "volrelax", frozen)]
struct PyEventSet(vr::EventSet);

#[pymethods]
impl PyEventSet {
    #[staticmethod]
    fn from_indices(indices: Vec<usize>) -> Self {
        Self(vr::EventSet::from_indices(&indices))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn indices(&self) -> Vec<usize> {
        self.0.indices()
    }

    #[getter]
    fn signs(&self) -> Vec<String> {
        self.0.events().iter().map(|e| e.sign.to_string()).collect()
    }

    #[getter]
    fn origins(&self) -> Vec<String> {
        self.0.events().iter().map(|e| e.origin.to_string()).collect()
    }

    #[getter]
    fn zeta(&self) -> f64 {
        self.0.zeta()
    }

    /// Subset by `all`, `crash`, `rally`, `endogenous` or `exogenous`.
    fn filter(&self, name: &str) -> PyResult<Self> {
        let filter: vr::EventFilter = name.parse().map_err(value_err)?;
        Ok(Self(vr::filter_events(&self.0, filter)))
    }

    /// Marks events on calendar dates (`date,origin,note` CSV) as exogenous.
    fn tag(&self, calendar_csv: &str, prices: &PyPriceSeries) -> PyResult<Self> {
        let cal = vr::EventCalendar::parse(calendar_csv.as_bytes()).map_err(core_err)?;
        vr::tag_origins(&self.0, &cal, &prices.0).map(|(set, _)| Self(set)).map_err(core_err)
    }

    fn __repr__(&self) -> String {
        format!("EventSet(len={}, zeta={})", self.0.len(), self.0.zeta())
    }
}

#[pyclass(name = "RelaxationCurve", module = "volrelax", frozen)]
struct PyCurve(vr::RelaxationCurve);

#[pymethods]
impl PyCurve {
    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn kind(&self) -> String {
        self.0.kind().to_string()
    }

    #[getter]
    fn direction(&self) -> String {
        self.0.direction().to_string()
    }

    #[getter]
    fn lags(&self) -> Vec<usize> {
        self.0.lags().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn contributing(&self) -> Vec<usize> {
        self.0.contributing().to_vec()
    }

    fn value_at(&self, lag: usize) -> Option<f64> {
        self.0.value_at(lag)
    }

    fn to_tsv(&self) -> String {
        self.0.to_tsv()
    }

    fn __repr__(&self) -> String {
        format!("RelaxationCurve(kind={}, direction={}, len={})", self.0.kind(), self.0.direction(), self.0.len())
    }
}

#[pyclass(name = "PowerLawFit", module = "volrelax", frozen)]
struct PyFit(vr::PowerLawFit);

#[pymethods]
impl PyFit {
    #[getter]
    fn p(&self) -> f64 {
        self.0.p
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau
    }

    #[getter]
    fn amplitude(&self) -> f64 {
        self.0.amplitude
    }

    #[getter]
    fn method(&self) -> String {
        self.0.method.to_string()
    }

    #[getter]
    fn window(&self) -> (usize, usize) {
        (self.0.window.t_min, self.0.window.t_max)
    }

    #[getter]
    fn residual_rms(&self) -> f64 {
        self.0.residual_rms
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.0.n_points
    }

    /// Model value at lag `t`.
    fn model(&self, t: f64) -> f64 {
        self.0.model(t)
    }

    fn __repr__(&self) -> String {
        format!("PowerLawFit(p={}, tau={}, A={})", self.0.p, self.0.tau, self.0.amplitude)
    }
}

#[pyclass(name = "BootstrapResult", module = "volrelax", frozen, get_all)]
struct PyBootstrap {
    p_err: f64,
    p_values: Vec<f64>,
    failures: usize,
    ks_d: Option<f64>,
    ks_p_value: Option<f64>,
}

#[pymethods]
impl PyBootstrap {
    fn __repr__(&self) -> String {
        let ks = self.ks_p_value.map_or("None".to_string(), |p| p.to_string());
        format!("BootstrapResult(p_err={}, replicates={}, ks_p_value={ks})", self.p_err, self.p_values.len())
    }
}

/// Remanent volatility `v(t)` for `t = 0..=t_max`; direction `plus` or `minus`.
#[pyfunction]
fn remanent(vol: &PyVolatility, events: &PyEventSet, direction: &str, t_max: usize) -> PyResult<PyCurve> {
    vr::remanent(&vol.0, &events.0, self::direction(direction)?, t_max).map(PyCurve).map_err(core_err)
}

/// Cumulative `V(t)` of a remanent curve.
#[pyfunction]
fn cumulate(curve: &PyCurve) -> PyResult<PyCurve> {
    vr::cumulate(&curve.0).map(PyCurve).map_err(core_err)
}

/// Mean exceedance count `N(t)` of `zeta1 * sigma` after/before each event.
#[pyfunction]
fn omori_count(
    vol: &PyVolatility,
    events: &PyEventSet,
    zeta1: f64,
    direction: &str,
    t_max: usize,
) -> PyResult<PyCurve> {
    vr::omori_count(&vol.0, &events.0, zeta1, self::direction(direction)?, t_max).map(PyCurve).map_err(core_err)
}

/// Full-model fit of a cumulative curve over `window = (lo, hi)`.
#[pyfunction]
#[pyo3(signature = (curve, window = None))]
fn fit_cumulative(curve: &PyCurve, window: Option<(usize, usize)>) -> PyResult<PyFit> {
    vr::fit_cumulative(&curve.0, self::window(&curve.0, window)).map(PyFit).map_err(core_err)
}

/// Pure power-law slope of a cumulative curve over `window`.
#[pyfunction]
#[pyo3(signature = (curve, window = None))]
fn tail_slope(curve: &PyCurve, window: Option<(usize, usize)>) -> PyResult<PyFit> {
    vr::tail_slope(&curve.0, self::window(&curve.0, window)).map(PyFit).map_err(core_err)
}

/// Event-resampling bootstrap of `p`, plus the goodness-of-fit test when
/// `fit` is given. Runs without the GIL.
#[pyfunction]
#[pyo3(signature = (vol, events, direction, t_max, window, replicates = 200, seed = 0, fit = None))]
#[allow(clippy::too_many_arguments)]
fn bootstrap(
    py: Python<'_>,
    vol: &PyVolatility,
    events: &PyEventSet,
    direction: &str,
    t_max: usize,
    window: (usize, usize),
    replicates: usize,
    seed: u64,
    fit: Option<&PyFit>,
) -> PyResult<PyBootstrap> {
    let direction = self::direction(direction)?;
    let config = vr::BootstrapConfig {
        replicates,
        seed,
        t_max,
        window: vr::FitWindow::new(window.0, window.1),
        method: vr::FitMethod::FullModel,
    };
    let (vol, events) = (&vol.0, &events.0);
    let fit = fit.map(|f| f.0.clone());
    py.detach(move || {
        let boot = vr::bootstrap_error(vol, events, direction, &config)?;
        let ks = match fit {
            Some(fit) => {
                let curve = vr::cumulate(&vr::remanent(vol, events, direction, t_max)?)?;
                Some(vr::ks_test(&curve, &fit, &boot.curves)?)
            }
            None => None,
        };
        Ok(PyBootstrap {
            p_err: boot.p_err,
            p_values: boot.p_values,
            failures: boot.failures,
            ks_d: ks.as_ref().map(|k| k.d),
            ks_p_value: ks.as_ref().map(|k| k.p_value),
        })
    })
    .map_err(core_err)
}

/// Signed returns from a JSON generator spec.
#[pyfunction]
fn generate_returns(spec_json: &str) -> PyResult<Vec<f64>> {
    let spec: vr::GeneratorSpec = serde_json::from_str(spec_json).map_err(value_err)?;
    vr::generate_returns(&spec).map_err(core_err)
}

/// Price series from a JSON generator spec.
#[pyfunction]
fn generate(spec_json: &str) -> PyResult<PyPriceSeries> {
    let spec: vr::GeneratorSpec = serde_json::from_str(spec_json).map_err(value_err)?;
    vr::generate(&spec).map(PyPriceSeries).map_err(core_err)
}

/// `count` shock times at least `min_spacing` apart and `margin` from the ends.
#[pyfunction]
fn spaced_shock_times(
    n_bars: usize,
    count: usize,
    min_spacing: usize,
    margin: usize,
    seed: u64,
) -> PyResult<Vec<usize>> {
    vr::spaced_shock_times(n_bars, count, min_spacing, margin, seed).map_err(core_err)
}

#[pymodule]
#[pyo3(name = "volrelax")]
pub fn volrelax_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPriceSeries>()?;
    m.add_class::<PyVolatility>()?;
    m.add_class::<PyEventSet>()?;
    m.add_class::<PyCurve>()?;
    m.add_class::<PyFit>()?;
    m.add_class::<PyBootstrap>()?;
    m.add_function(wrap_pyfunction!(remanent, m)?)?;
    m.add_function(wrap_pyfunction!(cumulate, m)?)?;
    m.add_function(wrap_pyfunction!(omori_count, m)?)?;
    m.add_function(wrap_pyfunction!(fit_cumulative, m)?)?;
    m.add_function(wrap_pyfunction!(tail_slope, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(generate_returns, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(spaced_shock_times, m)?)?;
    Ok(())
}
