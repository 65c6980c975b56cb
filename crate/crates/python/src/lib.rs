//! Python bindings: delay-domain processing, condensed metrics, fitting,
//! the channel-parameter generator and synthetic scenes.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use thzchan::chanmodel::{self, Condition, LinkBudgetSpec, View};
use thzchan::metrics::{self, Aps, LinkRecord, ProcessingConfig, Side};
use thzchan::sounding::{self, AngleGrid, CalibrationTrace, FrequencyAxis, PowerDelayProfile};
use thzchan::statfit;
use thzchan::synthscene::{self, AntennaModel, Mpc, Scene};

fn err(e: thzchan::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn gated(powers: Vec<f64>, resolution: f64) -> PyResult<PowerDelayProfile> {
    Ok(PowerDelayProfile::uniform(powers, resolution).map_err(err)?.mark_gated())
}

/// Power delay profile of a sweep given as real and imaginary parts.
/// Returns `(delays_s, powers)`.
#[pyfunction]
#[pyo3(signature = (re, im, f_start=145e9, f_stop=146e9))]
fn compute_pdp(re: Vec<f64>, im: Vec<f64>, f_start: f64, f_stop: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    if re.len() != im.len() {
        return Err(PyValueError::new_err("re and im must have equal length"));
    }
    let axis = FrequencyAxis::new(f_start, f_stop, re.len()).map_err(err)?;
    let h: Vec<Complex64> = re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect();
    let pdp = sounding::compute_pdp(&h, &axis).map_err(err)?;
    Ok((pdp.delays, pdp.powers))
}

/// Noise floor, threshold and gated powers of a uniformly sampled profile.
#[pyfunction]
#[pyo3(signature = (powers, resolution, gate_delay=sounding::DEFAULT_GATE_DELAY, margin_db=sounding::DEFAULT_NOISE_MARGIN_DB))]
fn gate_pdp<'py>(
    py: Python<'py>,
    powers: Vec<f64>,
    resolution: f64,
    gate_delay: f64,
    margin_db: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let pdp = PowerDelayProfile::uniform(powers, resolution).map_err(err)?;
    let pdp = sounding::with_noise_floor(pdp, gate_delay).map_err(err)?;
    let g = sounding::apply_gating(&pdp, gate_delay, margin_db).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("noise_floor", g.noise_floor)?;
    d.set_item("threshold", g.threshold)?;
    d.set_item("powers", g.powers)?;
    Ok(d)
}

#[pyfunction]
fn path_loss(powers: Vec<f64>) -> PyResult<f64> {
    metrics::path_loss(&gated(powers, 1.0)?).map_err(err)
}

#[pyfunction]
fn rms_delay_spread(powers: Vec<f64>, resolution: f64) -> PyResult<f64> {
    metrics::rms_delay_spread(&gated(powers, resolution)?).map_err(err)
}

#[pyfunction]
fn kappa1(powers: Vec<f64>) -> PyResult<f64> {
    metrics::kappa1(&gated(powers, 1.0)?).map_err(err)
}

/// Fleury spread of an angular power spectrum (angles in degrees).
#[pyfunction]
fn angular_spread(angles_deg: Vec<f64>, powers: Vec<f64>) -> PyResult<f64> {
    if angles_deg.len() != powers.len() {
        return Err(PyValueError::new_err("angles and powers must have equal length"));
    }
    metrics::angular_spread(&Aps { side: Side::Tx, angles: angles_deg, power: powers }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (d, n_bins=statfit::DEFAULT_N_BINS))]
fn log_distance_weights(d: Vec<f64>, n_bins: usize) -> PyResult<Vec<f64>> {
    statfit::log_distance_weights(&d, n_bins).map_err(err)
}

fn power_law_dict<'py>(py: Python<'py>, f: &statfit::PowerLawFit) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("alpha", f.alpha)?;
    d.set_item("beta", f.beta)?;
    d.set_item("sigma_eps", f.sigma_eps)?;
    d.set_item("alpha_ci", (f.alpha_ci.lo, f.alpha_ci.hi))?;
    d.set_item("beta_ci", (f.beta_ci.lo, f.beta_ci.hi))?;
    d.set_item("n", f.n)?;
    Ok(d)
}

/// Log-distance-weighted `PL = alpha + 10 beta log10(d)` fit.
#[pyfunction]
#[pyo3(signature = (d, pl_db, n_bins=statfit::DEFAULT_N_BINS))]
fn fit_power_law<'py>(py: Python<'py>, d: Vec<f64>, pl_db: Vec<f64>, n_bins: usize) -> PyResult<Bound<'py, PyDict>> {
    power_law_dict(py, &statfit::fit_power_law_binned(&d, &pl_db, n_bins).map_err(err)?)
}

#[pyfunction]
fn fit_ols<'py>(py: Python<'py>, d: Vec<f64>, pl_db: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    power_law_dict(py, &statfit::fit_ols(&d, &pl_db).map_err(err)?)
}

#[pyfunction]
fn fit_lognormal<'py>(py: Python<'py>, values: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let f = statfit::fit_lognormal(&values).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("mu", f.mu)?;
    d.set_item("sigma", f.sigma)?;
    d.set_item("mu_ci", (f.mu_ci.lo, f.mu_ci.hi))?;
    d.set_item("sigma_ci", (f.sigma_ci.lo, f.sigma_ci.hi))?;
    d.set_item("degenerate", f.degenerate)?;
    Ok(d)
}

/// Statistical channel model table.
#[pyclass(name = "ModelTable", module = "thzchan")]
struct PyModelTable {
    inner: chanmodel::ModelTable,
}

#[pymethods]
impl PyModelTable {
    #[staticmethod]
    fn builtin() -> Self {
        Self { inner: chanmodel::ModelTable::builtin() }
    }

    #[staticmethod]
    fn from_document(text: &str) -> PyResult<Self> {
        Ok(Self { inner: chanmodel::load_model_table(text).map_err(err)? })
    }

    fn to_document(&self) -> String {
        self.inner.to_document()
    }

    fn with_sigma(&self, sigma: f64) -> Self {
        Self { inner: self.inner.with_sigma(sigma) }
    }

    /// One realization at distance `d` for condition `los`/`nlos` and view
    /// `omni`/`max_dir`.
    #[pyo3(signature = (d, condition, view="omni", seed=0))]
    fn draw<'py>(&self, py: Python<'py>, d: f64, condition: &str, view: &str, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let c: Condition = condition.parse().map_err(err)?;
        let v: View = view.parse().map_err(err)?;
        let r = chanmodel::draw_link(&self.inner, d, c, v, seed).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("path_loss_db", r.path_loss)?;
        out.set_item("shadowing_db", r.shadowing)?;
        out.set_item("delay_spread_s", r.delay_spread)?;
        out.set_item("angular_spread", r.angular_spread)?;
        out.set_item("angular_spread_clamped", r.angular_spread_clamped)?;
        out.set_item("kappa1_db", r.kappa1)?;
        out.set_item("out_of_range", r.out_of_range)?;
        Ok(out)
    }

    fn __len__(&self) -> usize {
        self.inner.rows().count()
    }
}

/// Maximum tolerable path loss for a link budget, dB.
#[pyfunction]
#[pyo3(signature = (tx_power_dbm=10.0, gain_tx_dbi=23.0, gain_rx_dbi=23.0, bandwidth_hz=1e9, noise_figure_db=5.0, required_snr_db=5.0))]
fn max_path_loss(
    tx_power_dbm: f64,
    gain_tx_dbi: f64,
    gain_rx_dbi: f64,
    bandwidth_hz: f64,
    noise_figure_db: f64,
    required_snr_db: f64,
) -> PyResult<f64> {
    let spec = LinkBudgetSpec {
        tx_power_dbm,
        gain_tx_dbi,
        gain_rx_dbi,
        bandwidth_hz,
        noise_figure_db,
        required_snr_db,
        ..LinkBudgetSpec::default()
    };
    spec.validate().map_err(err)?;
    Ok(spec.max_path_loss())
}

fn record_dict<'py>(py: Python<'py>, r: &LinkRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("distance_m", r.distance)?;
    d.set_item("los", r.los)?;
    d.set_item("pl_omni_db", r.pl_omni)?;
    d.set_item("pl_maxdir_db", r.pl_maxdir)?;
    d.set_item("ds_omni_s", r.ds_omni)?;
    d.set_item("ds_maxdir_s", r.ds_maxdir)?;
    d.set_item("as_tx", r.as_tx)?;
    d.set_item("as_rx", r.as_rx)?;
    d.set_item("k1_omni_db", r.k1_omni)?;
    d.set_item("k1_maxdir_db", r.k1_maxdir)?;
    d.set_item("maxdir_tx_deg", r.maxdir_tx_deg)?;
    d.set_item("maxdir_rx_deg", r.maxdir_rx_deg)?;
    Ok(d)
}

fn scene_from(mpcs: Vec<(f64, f64, f64, f64, f64)>, distance: f64, los: bool, noise_power: f64) -> PyResult<Scene> {
    let mpcs = mpcs
        .into_iter()
        .map(|(delay, aod, aoa, re, im)| Mpc::new(delay, aod, aoa, Complex64::new(re, im)))
        .collect::<thzchan::Result<Vec<_>>>()
        .map_err(err)?;
    Scene::new(mpcs, noise_power, distance, los).map_err(err)
}

/// Renders a scene of `(delay_s, aod_deg, aoa_deg, re, im)` MPCs on a
/// full-circle grid and condenses it with the default pipeline. With
/// `oracle=True` the analytic parameters are returned instead.
#[pyfunction]
#[pyo3(signature = (mpcs, distance, los=true, noise_power=0.0, step_deg=10.0, seed=0, oracle=false))]
fn condense_scene<'py>(
    py: Python<'py>,
    mpcs: Vec<(f64, f64, f64, f64, f64)>,
    distance: f64,
    los: bool,
    noise_power: f64,
    step_deg: f64,
    seed: u64,
    oracle: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let scene = scene_from(mpcs, distance, los, noise_power)?;
    let axis = FrequencyAxis::default();
    let angles = AngleGrid::full_circle(step_deg).map_err(err)?;
    let antenna = AntennaModel::default();
    let config = ProcessingConfig::default();
    let record = py.detach(|| {
        if oracle {
            synthscene::oracle_params(&scene, &angles, &antenna, &axis, &config)
        } else {
            let grid = synthscene::scene_to_sweeps(&scene, &antenna, &axis, &angles, seed)?;
            metrics::condense(&grid, &CalibrationTrace::unit(axis), &config)
        }
    });
    record_dict(py, &record.map_err(err)?)
}

#[pymodule]
#[pyo3(name = "thzchan")]
fn thzchan_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SPEED_OF_LIGHT", thzchan::SPEED_OF_LIGHT)?;
    m.add_function(wrap_pyfunction!(compute_pdp, m)?)?;
    m.add_function(wrap_pyfunction!(gate_pdp, m)?)?;
    m.add_function(wrap_pyfunction!(path_loss, m)?)?;
    m.add_function(wrap_pyfunction!(rms_delay_spread, m)?)?;
    m.add_function(wrap_pyfunction!(kappa1, m)?)?;
    m.add_function(wrap_pyfunction!(angular_spread, m)?)?;
    m.add_function(wrap_pyfunction!(log_distance_weights, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ols, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lognormal, m)?)?;
    m.add_function(wrap_pyfunction!(max_path_loss, m)?)?;
    m.add_function(wrap_pyfunction!(condense_scene, m)?)?;
    m.add_class::<PyModelTable>()?;
    Ok(())
}
