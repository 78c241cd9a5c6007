//! Python bindings. Laws, generating functions and coefficient vectors are
//! classes; estimates and reports come back as plain dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use khintchine::entropy::{self, Driver, FieldModel, FiniteMetricSpace};
use khintchine::genfun::{kappa as kappa_estimate, KappaConfig};
use khintchine::khinch::{self, NormSpec, SearchConfig, TrialConfig};
use khintchine::norms::{self, Engine, EngineConfig, LambdaGrid};

fn err(e: khintchine::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn engine_config(engine: &str, samples: usize, budget: usize, seed: u64) -> PyResult<EngineConfig> {
    Ok(EngineConfig {
        engine: engine.parse::<Engine>().map_err(err)?,
        samples,
        budget,
        seed,
    })
}

#[pyclass(name = "Distribution", module = "khintchine", frozen, from_py_object)]
#[derive(Clone)]
struct PyDistribution(khintchine::Distribution);

#[pymethods]
impl PyDistribution {
    /// `rademacher`, `gaussian:SIGMA`, `centered-poisson:MU`, ...
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(Self).map_err(err)
    }

    #[staticmethod]
    fn discrete(support: Vec<f64>, probs: Vec<f64>) -> PyResult<Self> {
        khintchine::Distribution::discrete(support, probs)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance()
    }

    fn ln_mgf(&self, lam: f64) -> f64 {
        self.0.ln_mgf(lam)
    }

    fn abs_moment(&self, p: f64) -> PyResult<f64> {
        self.0.abs_moment(p).map_err(err)
    }

    fn lp_norm(&self, p: f64) -> PyResult<f64> {
        self.0.lp_norm(p).map_err(err)
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        self.0.sample(n, seed).values
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Distribution('{}')", self.0)
    }
}

#[pyclass(name = "GeneratingFunction", module = "khintchine", frozen, from_py_object)]
#[derive(Clone)]
struct PyGeneratingFunction(khintchine::GeneratingFunction);

#[pymethods]
impl PyGeneratingFunction {
    /// `subgaussian`, `power:M`, `natural` (needs `law`) or `tabulated:...`.
    #[new]
    #[pyo3(signature = (spec, law = None))]
    fn new(spec: &str, law: Option<&PyDistribution>) -> PyResult<Self> {
        khintchine::GeneratingFunction::parse(spec, law.map(|d| &d.0))
            .map(Self)
            .map_err(err)
    }

    fn __call__(&self, lam: f64) -> f64 {
        self.0.eval(lam)
    }

    fn inverse(&self, y: f64) -> PyResult<f64> {
        self.0.inverse(y).map_err(err)
    }

    fn legendre<'py>(&self, py: Python<'py>, u: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.legendre(u))
    }

    fn conv_class<'py>(&self, py: Python<'py>, r: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.conv_r_class(r).map_err(err)?)
    }

    fn overline<'py>(&self, py: Python<'py>, lam: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.overline(lam).map_err(err)?)
    }

    fn tail_envelope(&self, tau: f64, u: f64) -> PyResult<f64> {
        self.0.tail_envelope(tau, u).map_err(err)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("GeneratingFunction('{}')", self.0)
    }
}

#[pyclass(name = "CoefficientVector", module = "khintchine", frozen, from_py_object)]
#[derive(Clone)]
struct PyCoefficientVector(khintchine::CoefficientVector);

#[pymethods]
impl PyCoefficientVector {
    /// Rescaled to unit l2 norm unless `normalize` is false.
    #[new]
    #[pyo3(signature = (entries, normalize = true))]
    fn new(entries: Vec<f64>, normalize: bool) -> PyResult<Self> {
        let v = if normalize {
            khintchine::CoefficientVector::normalized(entries)
        } else {
            khintchine::CoefficientVector::new(entries)
        };
        v.map(Self).map_err(err)
    }

    #[staticmethod]
    fn equal(n: usize) -> Self {
        Self(khintchine::CoefficientVector::equal(n))
    }

    #[getter]
    fn entries(&self) -> Vec<f64> {
        self.0.entries().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("CoefficientVector({:?})", self.0.entries())
    }
}

#[pyfunction]
fn bphi_norm<'py>(py: Python<'py>, law: &PyDistribution, phi: &PyGeneratingFunction) -> PyResult<Bound<'py, PyAny>> {
    let est = py
        .detach(|| norms::bphi_norm(&law.0, &phi.0, &LambdaGrid::default()))
        .map_err(err)?;
    to_py(py, &est)
}

#[pyfunction]
#[pyo3(signature = (law, a, p, engine = "auto", samples = 1_000_000, budget = norms::DEFAULT_BUDGET, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn weighted_sum_lp<'py>(
    py: Python<'py>,
    law: &PyDistribution,
    a: &PyCoefficientVector,
    p: f64,
    engine: &str,
    samples: usize,
    budget: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = engine_config(engine, samples, budget, seed)?;
    let est = py
        .detach(|| norms::weighted_sum_lp(&law.0, &a.0, p, &cfg))
        .map_err(err)?;
    to_py(py, &est)
}

fn khinchine_search<'py>(
    py: Python<'py>,
    law: &PyDistribution,
    norm: &str,
    cfg: SearchConfig,
    sup: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = NormSpec::parse(norm, Some(&law.0)).map_err(err)?;
    let est = py
        .detach(|| {
            if sup {
                khinch::khinchine_sup(&law.0, &spec, &cfg)
            } else {
                khinch::khinchine_inf(&law.0, &spec, &cfg)
            }
        })
        .map_err(err)?;
    to_py(py, &est)
}

/// Lower estimate of `sup_a ||sum a_k xi_k||` over unit coefficient vectors.
#[pyfunction]
#[pyo3(signature = (law, norm, n_max = 32, restarts = 4, seed = 0))]
fn khinchine_sup<'py>(
    py: Python<'py>,
    law: &PyDistribution,
    norm: &str,
    n_max: usize,
    restarts: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SearchConfig {
        n_max,
        restarts,
        seed,
        ..Default::default()
    };
    khinchine_search(py, law, norm, cfg, true)
}

/// Upper estimate of the matching infimum.
#[pyfunction]
#[pyo3(signature = (law, norm, n_max = 32, restarts = 4, seed = 0))]
fn khinchine_inf<'py>(
    py: Python<'py>,
    law: &PyDistribution,
    norm: &str,
    n_max: usize,
    restarts: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SearchConfig {
        n_max,
        restarts,
        seed,
        ..Default::default()
    };
    khinchine_search(py, law, norm, cfg, false)
}

#[pyfunction]
#[pyo3(signature = (phis, lam, n_max = 32, restarts = 4, seed = 0))]
fn kappa<'py>(
    py: Python<'py>,
    phis: Vec<PyGeneratingFunction>,
    lam: f64,
    n_max: usize,
    restarts: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let phis: Vec<_> = phis.into_iter().map(|p| p.0).collect();
    let cfg = KappaConfig { n_max, restarts, seed };
    let est = py.detach(|| kappa_estimate(&phis, lam, &cfg)).map_err(err)?;
    to_py(py, &est)
}

/// Runs one verification suite. `verdict` in the returned dict is `pass`,
/// `fail` or `refused`.
#[pyfunction]
#[pyo3(signature = (suite, law, phi = None, p = 4.0, a = None, trials = 1000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn verify<'py>(
    py: Python<'py>,
    suite: &str,
    law: &PyDistribution,
    phi: Option<&PyGeneratingFunction>,
    p: f64,
    a: Option<&PyCoefficientVector>,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let tc = TrialConfig {
        trials,
        seed,
        ..Default::default()
    };
    let phi = phi.map(|f| f.0.clone());
    let need_phi = || {
        phi.clone()
            .ok_or_else(|| PyValueError::new_err(format!("suite {suite} needs phi")))
    };
    let a = a.map_or_else(|| khintchine::CoefficientVector::equal(1), |v| v.0.clone());
    let cfg = EngineConfig {
        seed,
        ..Default::default()
    };
    let d = &law.0;
    let rep = match suite {
        "thm31" => {
            let f = need_phi()?;
            py.detach(|| khinch::verify_thm31(d, &f, &tc))
        }
        "thm32" => {
            let f = need_phi()?;
            py.detach(|| khinch::verify_thm32(d, &f, &tc, &KappaConfig::default()))
        }
        "rosenthal" | "thm51" => py.detach(|| khinch::rosenthal_verify(suite, d, p, &a, None, &cfg)),
        "tail" => {
            let f = need_phi()?;
            let u: Vec<f64> = (1..=6).map(|k| 0.5 * k as f64).collect();
            py.detach(|| khinch::tail_compare(d, &a, &f, &u, &cfg))
        }
        "pythagoras" => {
            let f = need_phi()?;
            py.detach(|| khinch::pythagoras_check(&f, std::slice::from_ref(d), &tc))
        }
        other => return Err(PyValueError::new_err(format!("unknown suite {other}"))),
    }
    .map_err(err)?;
    to_py(py, &rep)
}

#[pyclass(name = "MetricSpace", module = "khintchine", frozen)]
struct PyMetricSpace(FiniteMetricSpace);

#[pymethods]
impl PyMetricSpace {
    /// From a symmetric distance matrix.
    #[new]
    #[pyo3(signature = (rho, labels = None))]
    fn new(rho: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> PyResult<Self> {
        match labels {
            Some(l) => FiniteMetricSpace::new(l, rho),
            None => FiniteMetricSpace::unlabeled(rho),
        }
        .map(Self)
        .map_err(err)
    }

    #[staticmethod]
    fn from_points(points: Vec<f64>) -> PyResult<Self> {
        FiniteMetricSpace::from_points(&points).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_path(path: std::path::PathBuf) -> PyResult<Self> {
        FiniteMetricSpace::from_path(&path).map(Self).map_err(err)
    }

    #[getter]
    fn diameter(&self) -> f64 {
        self.0.diameter()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn covering_number<'py>(&self, py: Python<'py>, eps: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &entropy::covering_number(&self.0, eps).map_err(err)?)
    }

    fn entropy_profile<'py>(&self, py: Python<'py>, eps: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &entropy::entropy_profile(&self.0, &eps).map_err(err)?)
    }

    #[pyo3(signature = (sigma_scale = 1.0, eps_steps = 256))]
    fn dudley_integral<'py>(&self, py: Python<'py>, sigma_scale: f64, eps_steps: usize) -> PyResult<Bound<'py, PyAny>> {
        to_py(
            py,
            &entropy::dudley_integral(&self.0, sigma_scale, eps_steps).map_err(err)?,
        )
    }
}

/// Moment statistics of `sup_t |sum_k a_k Y_k(t)|` for a finite field
/// `Y(t) = sum_j features[t][j] eta_j`.
#[pyfunction]
#[pyo3(signature = (features, coefficient_sets, driver = "gaussian", samples = 100_000, seed = 0, eps_steps = 256))]
fn field_sup_stats<'py>(
    py: Python<'py>,
    features: Vec<Vec<f64>>,
    coefficient_sets: Vec<PyCoefficientVector>,
    driver: &str,
    samples: usize,
    seed: u64,
    eps_steps: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let driver = match driver {
        "gaussian" => Driver::Gaussian,
        "rademacher" => Driver::Rademacher,
        other => return Err(PyValueError::new_err(format!("unknown driver {other}"))),
    };
    let model = FieldModel::new(features, driver).map_err(err)?;
    let sets: Vec<_> = coefficient_sets.into_iter().map(|c| c.0).collect();
    let rep = py
        .detach(|| entropy::field_sup_stats(&model, &sets, samples, seed, eps_steps))
        .map_err(err)?;
    to_py(py, &rep)
}

#[pymodule]
#[pyo3(name = "khintchine")]
fn khintchine_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyGeneratingFunction>()?;
    m.add_class::<PyCoefficientVector>()?;
    m.add_class::<PyMetricSpace>()?;
    m.add_function(wrap_pyfunction!(bphi_norm, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_sum_lp, m)?)?;
    m.add_function(wrap_pyfunction!(khinchine_sup, m)?)?;
    m.add_function(wrap_pyfunction!(khinchine_inf, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(field_sup_stats, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
