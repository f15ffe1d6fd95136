#![allow(clippy::useless_conversion)]

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use molfilter::channel::{self, TimingConfig};
use molfilter::config::{parse_config, ExperimentConfig};
use molfilter::detection::BerModel;
use molfilter::filters::{self, FilterKind};
use molfilter::montecarlo::SimConfig;
use molfilter::{DetectorSpec, Filter};

fn err(e: molfilter::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Channel parameters in SI units; `enzyme_conc` is in molecule/um^3.
#[pyclass(name = "ChannelParams", module = "molfilter")]
#[derive(Clone)]
struct PyChannelParams {
    inner: channel::ChannelParams,
}

#[pymethods]
impl PyChannelParams {
    #[new]
    #[pyo3(signature = (
        n_tx,
        v_rx = channel::sphere_volume(channel::DEFAULT_RX_RADIUS),
        distance = channel::DEFAULT_DISTANCE,
        diff_coeff = channel::DEFAULT_DIFF_COEFF,
        enzyme_conc = channel::DEFAULT_ENZYME_PER_UM3,
        kappa = channel::DEFAULT_KAPPA,
        v_par = channel::DEFAULT_V_PAR,
        v_perp = channel::DEFAULT_V_PERP,
        c_ext = channel::DEFAULT_C_EXT,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n_tx: f64,
        v_rx: f64,
        distance: f64,
        diff_coeff: f64,
        enzyme_conc: f64,
        kappa: f64,
        v_par: f64,
        v_perp: f64,
        c_ext: f64,
    ) -> PyResult<Self> {
        let inner = channel::ChannelParams::from_table_units(
            n_tx,
            v_rx,
            distance,
            diff_coeff,
            enzyme_conc,
            kappa,
            v_par,
            v_perp,
            c_ext,
        );
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_tx(&self) -> f64 {
        self.inner.n_tx
    }

    #[getter]
    fn degradation_rate(&self) -> f64 {
        self.inner.degradation_rate
    }

    #[getter]
    fn c_ext(&self) -> f64 {
        self.inner.c_ext
    }

    /// Expected concentration at time `t` (seconds).
    fn concentration(&self, t: f64) -> f64 {
        channel::expected_concentration(t, &self.inner)
    }

    fn reference_time(&self) -> PyResult<f64> {
        channel::reference_time(&self.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Sampled channel impulse response, `L` rows of `M` samples.
#[pyclass(name = "Cir", module = "molfilter")]
#[derive(Clone)]
struct PyCir {
    inner: molfilter::Cir,
}

#[pymethods]
impl PyCir {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: molfilter::Cir::from_rows(&rows).map_err(err)?,
        })
    }

    #[getter]
    fn l_taps(&self) -> usize {
        self.inner.l_taps()
    }

    #[getter]
    fn m_samples(&self) -> usize {
        self.inner.m_samples()
    }

    fn signal(&self) -> Vec<f64> {
        self.inner.signal().iter().copied().collect()
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    fn __repr__(&self) -> String {
        format!(
            "Cir(l_taps={}, m_samples={})",
            self.inner.l_taps(),
            self.inner.m_samples()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (params, m_samples = 6, l_taps = 3, dt_norm = 0.25, t_symb_norm = 1.5))]
fn build_cir(
    params: &PyChannelParams,
    m_samples: usize,
    l_taps: usize,
    dt_norm: f64,
    t_symb_norm: f64,
) -> PyResult<PyCir> {
    let tc = TimingConfig {
        m_samples,
        l_taps,
        dt_norm,
        t_symb_norm,
    };
    Ok(PyCir {
        inner: channel::build_cir(&params.inner, &tc).map_err(err)?,
    })
}

#[pyfunction]
fn interference_covariance(cir: &PyCir, c_ext: f64) -> PyResult<Vec<Vec<f64>>> {
    let cov = molfilter::interference_covariance(&cir.inner, c_ext).map_err(err)?;
    let m = cov.matrix();
    Ok((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
}

fn weights_of(f: &Filter) -> Vec<f64> {
    f.weights().iter().copied().collect()
}

/// Filter weights for `kind` in {"matched", "sum", "correlator", "peak"}.
#[pyfunction]
fn design_filter(kind: &str, cir: &PyCir, c_ext: f64) -> PyResult<Vec<f64>> {
    let kind: FilterKind = kind.parse().map_err(err)?;
    let cov = molfilter::interference_covariance(&cir.inner, c_ext).map_err(err)?;
    Ok(weights_of(&filters::design(kind, &cir.inner, &cov).map_err(err)?))
}

#[pyfunction]
fn sinr(weights: Vec<f64>, cir: &PyCir, c_ext: f64) -> PyResult<f64> {
    let f = Filter::custom(&weights).map_err(err)?;
    let cov = molfilter::interference_covariance(&cir.inner, c_ext).map_err(err)?;
    filters::sinr(&f, &cir.inner, &cov).map_err(err)
}

#[pyfunction]
fn optimal_sinr(cir: &PyCir, c_ext: f64) -> PyResult<f64> {
    let cov = molfilter::interference_covariance(&cir.inner, c_ext).map_err(err)?;
    filters::optimal_sinr(&cir.inner, &cov).map_err(err)
}

#[pyfunction]
fn analytical_ber(weights: Vec<f64>, cir: &PyCir, c_ext: f64, threshold: f64) -> PyResult<f64> {
    let f = Filter::custom(&weights).map_err(err)?;
    molfilter::analytical_ber(&f, &cir.inner, c_ext, threshold).map_err(err)
}

#[pyfunction]
fn optimize_threshold(weights: Vec<f64>, cir: &PyCir, c_ext: f64) -> PyResult<f64> {
    let f = Filter::custom(&weights).map_err(err)?;
    Ok(BerModel::new(&f, &cir.inner, c_ext).map_err(err)?.optimal_threshold())
}

/// Monte Carlo BER and SINR of a thresholded linear detector.
#[pyfunction]
#[pyo3(signature = (weights, threshold, cir, c_ext, trials, seed, workers = 0, warmup = 8))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    weights: Vec<f64>,
    threshold: f64,
    cir: &PyCir,
    c_ext: f64,
    trials: usize,
    seed: u64,
    workers: usize,
    warmup: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = DetectorSpec::new(Filter::custom(&weights).map_err(err)?, threshold).map_err(err)?;
    let cfg = SimConfig {
        trials,
        warmup,
        seed,
        workers,
    };
    let cir = cir.inner.clone();
    let res = py
        .allow_threads(|| molfilter::run_trials(&cir, c_ext, &spec, &cfg))
        .map_err(err)?;
    let d = PyDict::new_bound(py);
    d.set_item("ber", res.empirical_ber)?;
    d.set_item("ber_halfwidth", res.ber_halfwidth)?;
    d.set_item("sinr", res.empirical_sinr)?;
    d.set_item("sinr_halfwidth", res.sinr_halfwidth)?;
    d.set_item("trials", res.trials_run)?;
    d.set_item("errors", res.errors)?;
    Ok(d)
}

#[pyfunction]
fn q_function(x: f64) -> f64 {
    molfilter::q_function(x)
}

/// Runs a full sweep from a config file (or defaults) and returns the
/// written file paths.
#[pyfunction]
#[pyo3(signature = (config = None, out_dir = None, trials = None, seed = None))]
fn run_sweep(
    py: Python<'_>,
    config: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    trials: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Vec<String>> {
    let mut cfg = match config {
        Some(p) => parse_config(p).map_err(err)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = out_dir {
        cfg.out_dir = o;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(err)?;
    let report = py.allow_threads(|| molfilter::run_sweep(&cfg)).map_err(err)?;
    Ok(report.files.iter().map(|p| p.display().to_string()).collect())
}

#[pymodule]
#[pyo3(name = "molfilter")]
fn molfilter_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannelParams>()?;
    m.add_class::<PyCir>()?;
    m.add_function(wrap_pyfunction!(build_cir, m)?)?;
    m.add_function(wrap_pyfunction!(interference_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(design_filter, m)?)?;
    m.add_function(wrap_pyfunction!(sinr, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_sinr, m)?)?;
    m.add_function(wrap_pyfunction!(analytical_ber, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(q_function, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
