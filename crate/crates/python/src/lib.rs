//! Python bindings. Validation failures raise `ValueError`; estimation
//! failures raise `RuntimeError`.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tripledd::{
    Design, DgpConfig, Error, Matrix, NuisanceConfig, OutcomeFamily, PanelColumns, PanelEstimator, PropensityFamily, RcColumns,
    RcEstimator, Scenario, Specification,
};

fn py_err(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    Matrix::from_rows(rows).map_err(py_err)
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

#[pyclass(name = "PanelDataset", module = "tripledd", frozen)]
struct PyPanel {
    inner: tripledd::PanelDataset,
}

#[pymethods]
impl PyPanel {
    #[new]
    #[pyo3(signature = (x, g, d, y0, y1, names=None))]
    fn new(x: Vec<Vec<f64>>, g: Vec<u8>, d: Vec<u8>, y0: Vec<f64>, y1: Vec<f64>, names: Option<Vec<String>>) -> PyResult<Self> {
        let x = matrix(&x)?;
        let inner = match names {
            Some(n) => tripledd::PanelDataset::with_names(x, n, g, d, y0, y1),
            None => tripledd::PanelDataset::new(x, g, d, y0, y1),
        }
        .map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Loads a CSV; `cols` is `g=..,d=..,y0=..,y1=..`.
    #[staticmethod]
    #[pyo3(signature = (path, cols=None, covariates=None))]
    fn from_csv(path: PathBuf, cols: Option<&str>, covariates: Option<Vec<String>>) -> PyResult<Self> {
        let mut c = match cols {
            Some(s) => s.parse::<PanelColumns>().map_err(py_err)?,
            None => PanelColumns::standard(),
        };
        c.covariates = covariates;
        Ok(Self {
            inner: tripledd::load_panel_csv(path, &c).map_err(py_err)?,
        })
    }

    fn to_csv(&self, path: PathBuf) -> PyResult<()> {
        tripledd::write_panel_csv(&self.inner, path).map_err(py_err)
    }

    /// Both periods as two cross-sections of the same units.
    fn stack_periods(&self) -> PyResult<PyRc> {
        Ok(PyRc {
            inner: self.inner.stack_periods().map_err(py_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn covariate_names(&self) -> Vec<String> {
        self.inner.covariate_names().to_vec()
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        rows(self.inner.x())
    }

    #[getter]
    fn g(&self) -> Vec<u8> {
        self.inner.g().to_vec()
    }

    #[getter]
    fn d(&self) -> Vec<u8> {
        self.inner.d().to_vec()
    }

    #[getter]
    fn y0(&self) -> Vec<f64> {
        self.inner.y0().to_vec()
    }

    #[getter]
    fn y1(&self) -> Vec<f64> {
        self.inner.y1().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("PanelDataset(n={}, k={})", self.inner.n(), self.inner.k())
    }
}

#[pyclass(name = "RcDataset", module = "tripledd", frozen)]
struct PyRc {
    inner: tripledd::RcDataset,
}

#[pymethods]
impl PyRc {
    #[new]
    #[pyo3(signature = (x, g, d, t, y, names=None))]
    fn new(x: Vec<Vec<f64>>, g: Vec<u8>, d: Vec<u8>, t: Vec<u8>, y: Vec<f64>, names: Option<Vec<String>>) -> PyResult<Self> {
        let x = matrix(&x)?;
        let inner = match names {
            Some(n) => tripledd::RcDataset::with_names(x, n, g, d, t, y),
            None => tripledd::RcDataset::new(x, g, d, t, y),
        }
        .map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Loads a CSV; `cols` is `g=..,d=..,t=..,y=..`.
    #[staticmethod]
    #[pyo3(signature = (path, cols=None, covariates=None))]
    fn from_csv(path: PathBuf, cols: Option<&str>, covariates: Option<Vec<String>>) -> PyResult<Self> {
        let mut c = match cols {
            Some(s) => s.parse::<RcColumns>().map_err(py_err)?,
            None => RcColumns::standard(),
        };
        c.covariates = covariates;
        Ok(Self {
            inner: tripledd::load_rc_csv(path, &c).map_err(py_err)?,
        })
    }

    fn to_csv(&self, path: PathBuf) -> PyResult<()> {
        tripledd::write_rc_csv(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn covariate_names(&self) -> Vec<String> {
        self.inner.covariate_names().to_vec()
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        rows(self.inner.x())
    }

    #[getter]
    fn g(&self) -> Vec<u8> {
        self.inner.g().to_vec()
    }

    #[getter]
    fn d(&self) -> Vec<u8> {
        self.inner.d().to_vec()
    }

    #[getter]
    fn t(&self) -> Vec<u8> {
        self.inner.t().to_vec()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y().to_vec()
    }

    #[getter]
    fn time_share(&self) -> f64 {
        self.inner.time_share()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("RcDataset(n={}, k={})", self.inner.n(), self.inner.k())
    }
}

#[pyclass(name = "EstimateResult", module = "tripledd", frozen)]
struct PyEstimate {
    inner: tripledd::EstimateResult,
}

#[pymethods]
impl PyEstimate {
    #[getter]
    fn estimator(&self) -> &str {
        &self.inner.estimator
    }

    #[getter]
    fn estimate(&self) -> f64 {
        self.inner.estimate
    }

    #[getter]
    fn se(&self) -> Option<f64> {
        self.inner.se
    }

    #[getter]
    fn ci(&self) -> Option<(f64, f64)> {
        self.inner.ci.map(|[lo, hi]| (lo, hi))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn n_treated(&self) -> usize {
        self.inner.n_treated
    }

    /// Per-unit influence function at the estimate, when the estimator has one.
    #[getter]
    fn influence(&self) -> Option<Vec<f64>> {
        self.inner.influence.clone()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.diagnostics.warnings.clone()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        match self.inner.se {
            Some(se) => format!("EstimateResult({}: {:.6} (se {:.6}))", self.inner.estimator, self.inner.estimate, se),
            None => format!("EstimateResult({}: {:.6})", self.inner.estimator, self.inner.estimate),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn nuisance_config(
    propensity: &str,
    outcome: &str,
    crossfit: usize,
    clip: bool,
    trim_floor: f64,
    hajek: bool,
    ridge: f64,
    seed: u64,
) -> PyResult<NuisanceConfig> {
    let propensity_family = match propensity {
        "logit" => PropensityFamily::LogitLinear,
        "saturated" => PropensityFamily::Saturated,
        _ => return Err(PyValueError::new_err(format!("unknown propensity family {propensity:?}"))),
    };
    let outcome_family = match outcome {
        "ols" => OutcomeFamily::Ols,
        "saturated" => OutcomeFamily::Saturated,
        _ => return Err(PyValueError::new_err(format!("unknown outcome family {outcome:?}"))),
    };
    Ok(NuisanceConfig {
        propensity_family,
        outcome_family,
        folds: crossfit,
        clip,
        trim_floor,
        hajek,
        ridge,
        seed,
        ..NuisanceConfig::default()
    })
}

/// Estimates the ATT from a panel. `bootstrap` replaces the
/// influence-function standard error with `bootstrap` resamples.
#[pyfunction]
#[pyo3(signature = (data, estimator="dr", *, propensity="logit", outcome="ols", crossfit=1, clip=false,
                    trim_floor=1e-3, hajek=false, ridge=1e-8, seed=0, bootstrap=None))]
#[allow(clippy::too_many_arguments)]
fn estimate_panel(
    py: Python<'_>,
    data: &PyPanel,
    estimator: &str,
    propensity: &str,
    outcome: &str,
    crossfit: usize,
    clip: bool,
    trim_floor: f64,
    hajek: bool,
    ridge: f64,
    seed: u64,
    bootstrap: Option<usize>,
) -> PyResult<PyEstimate> {
    let est: PanelEstimator = estimator.parse().map_err(py_err)?;
    let config = nuisance_config(propensity, outcome, crossfit, clip, trim_floor, hajek, ridge, seed)?;
    let data = &data.inner;
    let inner = py
        .detach(|| {
            let run = |d: &tripledd::PanelDataset| est.fit_estimate(d, &config, Specification::default());
            match bootstrap {
                Some(b) => tripledd::bootstrap_se(run, data, b, seed),
                None => run(data),
            }
        })
        .map_err(py_err)?;
    Ok(PyEstimate { inner })
}

/// Estimates the ATT from repeated cross-sections.
#[pyfunction]
#[pyo3(signature = (data, estimator="dr", *, propensity="logit", outcome="ols", crossfit=1, clip=false,
                    trim_floor=1e-3, hajek=false, ridge=1e-8, seed=0, bootstrap=None))]
#[allow(clippy::too_many_arguments)]
fn estimate_rc(
    py: Python<'_>,
    data: &PyRc,
    estimator: &str,
    propensity: &str,
    outcome: &str,
    crossfit: usize,
    clip: bool,
    trim_floor: f64,
    hajek: bool,
    ridge: f64,
    seed: u64,
    bootstrap: Option<usize>,
) -> PyResult<PyEstimate> {
    let est: RcEstimator = estimator.parse().map_err(py_err)?;
    let config = nuisance_config(propensity, outcome, crossfit, clip, trim_floor, hajek, ridge, seed)?;
    let data = &data.inner;
    let inner = py
        .detach(|| {
            let run = |d: &tripledd::RcDataset| est.fit_estimate(d, &config, Specification::default());
            match bootstrap {
                Some(b) => tripledd::bootstrap_se(run, data, b, seed),
                None => run(data),
            }
        })
        .map_err(py_err)?;
    Ok(PyEstimate { inner })
}

/// Compositional-change report as a JSON string.
#[pyfunction]
fn compositional_change_diagnostic(data: &PyRc) -> PyResult<String> {
    Ok(tripledd::compositional_change_diagnostic(&data.inner).map_err(py_err)?.to_json())
}

/// Draws a dataset. `config` is key-value DGP text; the reference panel
/// design when omitted. Returns `(dataset, true_att)`.
#[pyfunction]
#[pyo3(signature = (config=None, seed=0))]
fn simulate<'py>(py: Python<'py>, config: Option<&str>, seed: u64) -> PyResult<(Bound<'py, PyAny>, f64)> {
    let cfg = match config {
        Some(text) => DgpConfig::from_kv_str(text).map_err(py_err)?,
        None => DgpConfig::default(),
    };
    match cfg.design {
        Design::Panel => {
            let (inner, att) = tripledd::generate_panel(&cfg, seed).map_err(py_err)?;
            Ok((Bound::new(py, PyPanel { inner })?.into_any(), att))
        }
        Design::Rc => {
            let (inner, att) = tripledd::generate_rc(&cfg, seed).map_err(py_err)?;
            Ok((Bound::new(py, PyRc { inner })?.into_any(), att))
        }
    }
}

/// Runs a key-value scenario; returns the report as a JSON string.
#[pyfunction]
fn run_scenario(py: Python<'_>, scenario: &str) -> PyResult<String> {
    let s = Scenario::from_kv_str(scenario).map_err(py_err)?;
    let report = py.detach(|| tripledd::run_scenario(&s)).map_err(py_err)?;
    Ok(report.to_json())
}

/// Runs the 2x2 misspecification grid; returns the report as a JSON string.
#[pyfunction]
fn robustness_grid(py: Python<'_>, scenario: &str) -> PyResult<String> {
    let s = Scenario::from_kv_str(scenario).map_err(py_err)?;
    let report = py.detach(|| tripledd::robustness_grid(&s)).map_err(py_err)?;
    Ok(report.to_json())
}

#[pymodule]
fn _native(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPanel>()?;
    m.add_class::<PyRc>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(estimate_panel, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_rc, m)?)?;
    m.add_function(wrap_pyfunction!(compositional_change_diagnostic, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(robustness_grid, m)?)?;
    Ok(())
}
