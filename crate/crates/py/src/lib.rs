//! Python bindings. Matrices cross the boundary as lists of rows.

use faer::Mat;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use agop::harness::{self, ExperimentConfig, KernelKind};
use agop::hermite::{self, Link};
use agop::kernel::{Bandwidth, KernelSpec};
use agop::krr::{self, KrrModel};
use agop::model::{Dataset, InputDist, Subspace, SubspaceKind};
use agop::{agop as agop_mod, linalg, rfm, verify};

fn py_err(e: agop::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Mat<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(linalg::from_rows(rows))
}

fn rows(m: faer::MatRef<'_, f64>) -> Vec<Vec<f64>> {
    linalg::to_rows(m)
}

fn parse<T: std::str::FromStr<Err = agop::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

#[derive(FromPyObject)]
enum BandwidthArg {
    Number(f64),
    Text(String),
}

fn kernel_spec(kernel: &str, bandwidth: Option<BandwidthArg>, d: usize, metric: Option<Vec<Vec<f64>>>) -> PyResult<KernelSpec> {
    let kind = match kernel {
        "gaussian" => KernelKind::Gaussian,
        "laplace" => KernelKind::Laplace,
        "exp_inner" => KernelKind::ExpInner,
        other => return Err(PyValueError::new_err(format!("unknown kernel '{other}'"))),
    };
    let bw = match bandwidth {
        None => None,
        Some(BandwidthArg::Number(h)) => Some(parse::<Bandwidth>(&h.to_string())?),
        Some(BandwidthArg::Text(s)) => Some(parse::<Bandwidth>(&s)?),
    };
    let spec = kind.spec(bw, d).map_err(py_err)?;
    match metric {
        Some(m) => spec.with_metric(matrix(&m)?).map_err(py_err),
        None => Ok(spec),
    }
}

fn subspace(name: &str, d: usize, r: usize, seed: u64) -> PyResult<Subspace> {
    match name {
        "axis" => Subspace::axis_aligned(d, r),
        other => parse::<SubspaceKind>(other)?.generate(d, r, seed),
    }
    .map_err(py_err)
}

/// Probabilists' Hermite polynomial He_n(t).
#[pyfunction]
fn hermite_eval(n: u32, t: f64) -> f64 {
    hermite::hermite_eval(n, t)
}

/// Latent gradient covariance of link "L1" or "L2" truncated at degree p.
#[pyfunction]
fn latent_sigma(link: &str, p: u32) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(parse::<Link>(link)?.poly().latent_sigma(p).as_ref()))
}

#[pyfunction]
fn gaussian_norm_sq(link: &str) -> PyResult<f64> {
    Ok(parse::<Link>(link)?.poly().gaussian_l2_norm_sq())
}

/// Orthonormal `r × d` basis as rows; `kind` is "haar", "sparse" or "axis".
#[pyfunction]
#[pyo3(signature = (d, r, kind="haar", seed=0))]
fn make_subspace(d: usize, r: usize, kind: &str, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(subspace(kind, d, r, seed)?.basis()))
}

#[pyfunction]
#[pyo3(signature = (d, r, kind="haar", seed=0))]
fn coherence(d: usize, r: usize, kind: &str, seed: u64) -> PyResult<f64> {
    Ok(subspace(kind, d, r, seed)?.coherence())
}

/// Walsh coefficients of `h(Ux)` on the cube as `(subset, coefficient)` pairs.
#[pyfunction]
fn walsh_coefficients(link: &str, u: Vec<Vec<f64>>) -> PyResult<Vec<(Vec<usize>, f64)>> {
    let u = Subspace::from_rows(&u).map_err(py_err)?;
    let poly = verify::multilinear_target(&parse::<Link>(link)?.poly(), &u).map_err(py_err)?;
    Ok(poly.terms().map(|(s, c)| (s.members().to_vec(), c)).collect())
}

/// Kernel matrix `K(a_i, b_j)`.
#[pyfunction]
#[pyo3(signature = (a, b, kernel="gaussian", bandwidth=None, metric=None))]
fn kernel_matrix(
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    kernel: &str,
    bandwidth: Option<BandwidthArg>,
    metric: Option<Vec<Vec<f64>>>,
) -> PyResult<Vec<Vec<f64>>> {
    let (a, b) = (matrix(&a)?, matrix(&b)?);
    let spec = kernel_spec(kernel, bandwidth, a.ncols(), metric)?;
    Ok(rows(spec.matrix(a.as_ref(), b.as_ref()).map_err(py_err)?.as_ref()))
}

/// A fitted kernel ridge regressor.
#[pyclass(frozen, name = "Krr")]
struct PyKrr {
    model: KrrModel,
}

#[pymethods]
impl PyKrr {
    #[staticmethod]
    #[pyo3(signature = (x, y, kernel="gaussian", bandwidth=None, ridge=1e-6, metric=None))]
    fn fit(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        kernel: &str,
        bandwidth: Option<BandwidthArg>,
        ridge: f64,
        metric: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let x = matrix(&x)?;
        let spec = kernel_spec(kernel, bandwidth, x.ncols(), metric)?;
        let data = Dataset::new(x, y, InputDist::Hypercube).map_err(py_err)?;
        Ok(Self { model: krr::fit(&data, &spec, ridge).map_err(py_err)? })
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.model.predict(matrix(&x)?.as_ref()).map_err(py_err)
    }

    /// Gradient of the predictor at each row of `x`.
    fn gradients(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(self.model.gradient_field(matrix(&x)?.as_ref()).map_err(py_err)?.as_ref()))
    }

    /// AGOP at the training inputs.
    fn training_agop(&self) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(rfm::training_agop(&self.model).map_err(py_err)?.matrix()))
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.model.alpha().to_vec()
    }

    #[getter]
    fn jitter_used(&self) -> f64 {
        self.model.jitter_used()
    }
}

/// `(matrix, eigenvalues)` of `GᵀG/m` for gradients `G`, eigenvalues descending.
#[pyfunction]
fn empirical_agop(grads: Vec<Vec<f64>>) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let res = agop_mod::empirical_agop(matrix(&grads)?.as_ref()).map_err(py_err)?;
    Ok((rows(res.matrix()), res.eigenvalues().to_vec()))
}

/// Largest principal-angle sine between two row-orthonormal bases.
#[pyfunction]
fn sin_theta(u_hat: Vec<Vec<f64>>, u: Vec<Vec<f64>>) -> PyResult<f64> {
    let u_hat = Subspace::from_rows(&u_hat).map_err(py_err)?;
    let u = Subspace::from_rows(&u).map_err(py_err)?;
    agop_mod::sin_theta_op(&u_hat, &u).map_err(py_err)
}

#[pyfunction]
fn metric_update(agop: Vec<Vec<f64>>, eta: f64) -> PyResult<Vec<Vec<f64>>> {
    let m = matrix(&agop)?;
    Ok(rows(rfm::metric_update(m.as_ref(), eta, m.ncols()).map_err(py_err)?.as_ref()))
}

/// Runs RFM on the given data and returns one dict per fit.
#[pyfunction]
#[pyo3(signature = (x, y, x_test, y_test, u, kernel="gaussian", bandwidth=None, ridge=1e-6, eta=None, iterations=5))]
#[allow(clippy::too_many_arguments)]
fn run_rfm<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    x_test: Vec<Vec<f64>>,
    y_test: Vec<f64>,
    u: Vec<Vec<f64>>,
    kernel: &str,
    bandwidth: Option<BandwidthArg>,
    ridge: f64,
    eta: Option<f64>,
    iterations: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let train = Dataset::new(matrix(&x)?, y, InputDist::Hypercube).map_err(py_err)?;
    let test = Dataset::new(matrix(&x_test)?, y_test, InputDist::Hypercube).map_err(py_err)?;
    let d = train.dim();
    let spec = kernel_spec(kernel, bandwidth, d, None)?;
    let u = Subspace::from_rows(&u).map_err(py_err)?;
    let params = rfm::RfmParams { ridge, eta: eta.unwrap_or(0.01 * d as f64), iterations };
    let history = rfm::run_rfm(&train, &spec, params, &test, &u).map_err(py_err)?;
    history
        .records
        .iter()
        .map(|rec| {
            let dict = PyDict::new(py);
            dict.set_item("iteration", rec.iteration)?;
            dict.set_item("test_mse", rec.test_mse)?;
            dict.set_item("sin_theta", rec.sin_theta)?;
            dict.set_item("top_eigenvalues", rec.top_eigenvalues.to_vec())?;
            dict.set_item("c_eta", rec.c_eta)?;
            dict.set_item("metric", rows(rec.metric.as_ref()))?;
            Ok(dict)
        })
        .collect()
}

/// Runs an experiment from a TOML config string; returns one dict per CSV row.
#[pyfunction]
#[pyo3(signature = (config, jobs=1))]
fn run_experiment<'py>(py: Python<'py>, config: &str, jobs: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg: ExperimentConfig = toml::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let rows = py.detach(|| harness::run_experiment(&cfg, jobs)).map_err(py_err)?;
    rows.iter()
        .map(|r| {
            let dict = PyDict::new(py);
            dict.set_item("link", &r.link)?;
            dict.set_item("input", &r.input)?;
            dict.set_item("subspace", &r.subspace)?;
            dict.set_item("kernel", &r.kernel)?;
            dict.set_item("alpha", r.alpha)?;
            dict.set_item("trial", r.trial)?;
            dict.set_item("iteration", r.iteration)?;
            dict.set_item("n", r.n)?;
            dict.set_item("test_mse", r.test_mse)?;
            dict.set_item("sin_theta", r.sin_theta)?;
            dict.set_item("eig", vec![r.eig1, r.eig2, r.eig3])?;
            dict.set_item("seed", r.seed)?;
            dict.set_item("runtime_s", r.runtime_s)?;
            dict.set_item("status", &r.status)?;
            Ok(dict)
        })
        .collect()
}

/// Runs the numerical check suite; returns one dict per check.
#[pyfunction]
#[pyo3(signature = (fast=true))]
fn run_checks(py: Python<'_>, fast: bool) -> PyResult<Vec<Bound<'_, PyDict>>> {
    let records = py.detach(|| verify::run_suite(fast));
    records
        .iter()
        .map(|rec| {
            let dict = PyDict::new(py);
            dict.set_item("name", &rec.name)?;
            dict.set_item("passed", rec.passed)?;
            dict.set_item("detail", &rec.detail)?;
            dict.set_item("scalars", rec.scalars.clone())?;
            dict.set_item("runtime_s", rec.runtime_s)?;
            Ok(dict)
        })
        .collect()
}

#[pymodule]
fn agop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKrr>()?;
    m.add_function(wrap_pyfunction!(hermite_eval, m)?)?;
    m.add_function(wrap_pyfunction!(latent_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_norm_sq, m)?)?;
    m.add_function(wrap_pyfunction!(make_subspace, m)?)?;
    m.add_function(wrap_pyfunction!(coherence, m)?)?;
    m.add_function(wrap_pyfunction!(walsh_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_agop, m)?)?;
    m.add_function(wrap_pyfunction!(sin_theta, m)?)?;
    m.add_function(wrap_pyfunction!(metric_update, m)?)?;
    m.add_function(wrap_pyfunction!(run_rfm, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    Ok(())
}
