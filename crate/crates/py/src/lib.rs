//! Python bindings. Matrices cross the boundary as row-major nested lists.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use icl_core::bayes;
use icl_core::flow::{self, FlowState};
use icl_core::predictors as pred;
use icl_core::risk;
use icl_core::runner;
use icl_core::task::{self, substream};
use icl_core::{IclError, Mat, PsdMatrix, Vector};

fn err(e: IclError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_mat(rows: &[Vec<f64>]) -> PyResult<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

fn from_mat(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|row| row.iter().copied().collect()).collect()
}

fn to_vec(v: Vec<f64>) -> Vector {
    Vector::from_vec(v)
}

fn from_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn to_psd(rows: &[Vec<f64>]) -> PyResult<PsdMatrix> {
    PsdMatrix::new(to_mat(rows)?).map_err(err)
}

#[pyclass(name = "TaskSpec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTaskSpec(task::TaskSpec);

#[pymethods]
impl PyTaskSpec {
    #[new]
    fn new(h: Vec<Vec<f64>>, psi: Vec<Vec<f64>>, beta_star: Vec<f64>, sigma2: f64, context_len: usize) -> PyResult<Self> {
        task::TaskSpec::new(to_psd(&h)?, to_psd(&psi)?, to_vec(beta_star), sigma2, context_len)
            .map(PyTaskSpec)
            .map_err(err)
    }

    #[staticmethod]
    fn isotropic(d: usize, context_len: usize, sigma2: f64) -> PyResult<Self> {
        task::TaskSpec::isotropic(d, context_len, sigma2).map(PyTaskSpec).map_err(err)
    }

    fn with_beta_star(&self, beta_star: Vec<f64>) -> PyResult<Self> {
        self.0.with_beta_star(to_vec(beta_star)).map(PyTaskSpec).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn context_len(&self) -> usize {
        self.0.context_len()
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.0.sigma2()
    }

    #[getter]
    fn beta_star(&self) -> Vec<f64> {
        from_vec(self.0.beta_star())
    }

    #[getter]
    fn h(&self) -> Vec<Vec<f64>> {
        from_mat(self.0.h().matrix())
    }

    #[getter]
    fn psi(&self) -> Vec<Vec<f64>> {
        from_mat(self.0.psi().matrix())
    }

    /// Draws one prompt from substream `(seed, stream)`.
    #[pyo3(signature = (seed, stream = 0))]
    fn sample_prompt(&self, seed: u64, stream: u64) -> PyPrompt {
        PyPrompt(task::sample_prompt(&self.0, &mut substream(seed, stream)))
    }

    fn __repr__(&self) -> String {
        format!("TaskSpec(d={}, M={}, sigma2={})", self.0.dim(), self.0.context_len(), self.0.sigma2())
    }
}

#[pyclass(name = "Prompt", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPrompt(task::Prompt);

#[pymethods]
impl PyPrompt {
    #[new]
    fn new(context_x: Vec<Vec<f64>>, context_y: Vec<f64>, query_x: Vec<f64>, query_y: f64) -> PyResult<Self> {
        let x = to_mat(&context_x)?;
        if x.nrows() != context_y.len() || x.ncols() != query_x.len() {
            return Err(PyValueError::new_err("context_x must be M×d with M labels and a length-d query"));
        }
        Ok(PyPrompt(task::Prompt {
            context_x: x,
            context_y: to_vec(context_y),
            beta_task: Vector::zeros(query_x.len()),
            query_x: to_vec(query_x),
            query_y,
        }))
    }

    #[getter]
    fn context_x(&self) -> Vec<Vec<f64>> {
        from_mat(&self.0.context_x)
    }

    #[getter]
    fn context_y(&self) -> Vec<f64> {
        from_vec(&self.0.context_y)
    }

    #[getter]
    fn query_x(&self) -> Vec<f64> {
        from_vec(&self.0.query_x)
    }

    #[getter]
    fn query_y(&self) -> f64 {
        self.0.query_y
    }

    /// `(d+1)×(M+1)` token matrix with the query label masked.
    fn token_matrix(&self) -> Vec<Vec<f64>> {
        from_mat(task::build_token_matrix(&self.0).matrix())
    }
}

#[pyclass(name = "GdBetaParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGdBeta(pred::GdBetaParams);

#[pymethods]
impl PyGdBeta {
    #[new]
    fn new(beta: Vec<f64>, gamma: Vec<Vec<f64>>) -> PyResult<Self> {
        pred::GdBetaParams::new(to_vec(beta), to_mat(&gamma)?).map(PyGdBeta).map_err(err)
    }

    /// `(β*, Γ*)` for `spec`.
    #[staticmethod]
    fn optimal(spec: &PyTaskSpec) -> PyResult<Self> {
        Ok(PyGdBeta(pred::GdBetaParams {
            beta: spec.0.beta_star().clone(),
            gamma: risk::optimal_gamma(&spec.0).map_err(err)?,
        }))
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        from_vec(&self.0.beta)
    }

    #[getter]
    fn gamma(&self) -> Vec<Vec<f64>> {
        from_mat(&self.0.gamma)
    }

    fn predict(&self, prompt: &PyPrompt) -> PyResult<f64> {
        pred::predict_gd_beta_prompt(&self.0, &prompt.0).map_err(err)
    }
}

#[pyclass(name = "LsaParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLsa(pred::LsaParamsReduced);

#[pymethods]
impl PyLsa {
    #[new]
    fn new(u11: Vec<Vec<f64>>, u12: Vec<f64>, u21: Vec<f64>, u_last: f64) -> PyResult<Self> {
        let p = pred::LsaParamsReduced {
            u11: to_mat(&u11)?,
            u12: to_vec(u12),
            u21: to_vec(u21),
            u_last,
        };
        p.validate(p.u12.len()).map_err(err)?;
        Ok(PyLsa(p))
    }

    #[getter]
    fn u11(&self) -> Vec<Vec<f64>> {
        from_mat(&self.0.u11)
    }

    #[getter]
    fn u12(&self) -> Vec<f64> {
        from_vec(&self.0.u12)
    }

    #[getter]
    fn u21(&self) -> Vec<f64> {
        from_vec(&self.0.u21)
    }

    #[getter]
    fn u_last(&self) -> f64 {
        self.0.u_last
    }

    fn predict(&self, prompt: &PyPrompt) -> PyResult<f64> {
        pred::predict_lsa_prompt(&self.0, &prompt.0).map_err(err)
    }
}

#[pyclass(name = "LtbParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLtb(pred::LtbParamsReduced);

#[pymethods]
impl PyLtb {
    #[new]
    fn new(v11: Vec<Vec<f64>>, v12: Vec<f64>, v21: Vec<f64>, v_last: f64, gamma: Vec<f64>) -> PyResult<Self> {
        let p = pred::LtbParamsReduced {
            v11: to_mat(&v11)?,
            v12: to_vec(v12),
            v21: to_vec(v21),
            v_last,
            gamma: to_vec(gamma),
        };
        p.validate(p.gamma.len()).map_err(err)?;
        Ok(PyLtb(p))
    }

    /// Canonical optimum with `v−1 = scale`.
    #[staticmethod]
    #[pyo3(signature = (spec, scale = 1.0))]
    fn canonical_optimum(spec: &PyTaskSpec, scale: f64) -> PyResult<Self> {
        risk::canonical_ltb_optimum(&spec.0, scale).map(PyLtb).map_err(err)
    }

    #[getter]
    fn v_last(&self) -> f64 {
        self.0.v_last
    }

    #[getter]
    fn gamma(&self) -> Vec<f64> {
        from_vec(&self.0.gamma)
    }

    fn predict(&self, prompt: &PyPrompt) -> PyResult<f64> {
        pred::predict_ltb_reduced_prompt(&self.0, &prompt.0).map_err(err)
    }
}

#[derive(FromPyObject)]
enum AnyParams<'py> {
    Gd(PyRef<'py, PyGdBeta>),
    Lsa(PyRef<'py, PyLsa>),
    Ltb(PyRef<'py, PyLtb>),
}

/// Owned copy of [`AnyParams`] that can leave the interpreter thread.
enum Owned {
    Gd(pred::GdBetaParams),
    Lsa(pred::LsaParamsReduced),
    Ltb(pred::LtbParamsReduced),
}

impl AnyParams<'_> {
    fn to_owned(&self) -> Owned {
        match self {
            AnyParams::Gd(x) => Owned::Gd(x.0.clone()),
            AnyParams::Lsa(x) => Owned::Lsa(x.0.clone()),
            AnyParams::Ltb(x) => Owned::Ltb(x.0.clone()),
        }
    }
}

impl Owned {
    fn predict(&self, p: &task::Prompt) -> f64 {
        match self {
            Owned::Gd(x) => pred::predict_gd_beta_prompt(x, p),
            Owned::Lsa(x) => pred::predict_lsa_prompt(x, p),
            Owned::Ltb(x) => pred::predict_ltb_reduced_prompt(x, p),
        }
        .expect("validated shapes")
    }

    fn validate(&self, d: usize) -> icl_core::Result<()> {
        match self {
            Owned::Gd(x) => x.validate(d),
            Owned::Lsa(x) => x.validate(d),
            Owned::Ltb(x) => x.validate(d),
        }
    }
}

/// Closed-form population risk of any parameter family.
#[pyfunction]
fn risk_closed(spec: &PyTaskSpec, params: AnyParams<'_>) -> PyResult<f64> {
    match &params {
        AnyParams::Gd(x) => risk::risk_gd_beta_closed(&spec.0, &x.0),
        AnyParams::Lsa(x) => risk::risk_lsa_closed(&spec.0, &x.0),
        AnyParams::Ltb(x) => risk::risk_ltb_closed(&spec.0, &x.0),
    }
    .map_err(err)
}

#[pyfunction]
fn excess_risk_gd_beta(spec: &PyTaskSpec, params: &PyGdBeta) -> PyResult<f64> {
    risk::excess_risk_gd_beta(&spec.0, &params.0).map_err(err)
}

#[pyfunction]
fn min_risk_gd_beta(spec: &PyTaskSpec) -> PyResult<f64> {
    risk::min_risk_gd_beta(&spec.0).map_err(err)
}

#[pyfunction]
fn optimal_gamma(spec: &PyTaskSpec) -> PyResult<Vec<Vec<f64>>> {
    risk::optimal_gamma(&spec.0).map(|g| from_mat(&g)).map_err(err)
}

#[pyfunction]
fn omega(spec: &PyTaskSpec) -> PyResult<Vec<Vec<f64>>> {
    risk::omega(&spec.0).map(|o| from_mat(o.matrix())).map_err(err)
}

#[pyfunction]
fn h_gamma(spec: &PyTaskSpec, gamma: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    risk::h_gamma(&spec.0, &to_mat(&gamma)?).map(|m| from_mat(m.matrix())).map_err(err)
}

#[pyfunction]
fn gap_lower_bound(spec: &PyTaskSpec) -> f64 {
    risk::gap_lower_bound(&spec.0)
}

#[pyfunction]
fn fourth_moment_closed(h: Vec<Vec<f64>>, a: Vec<Vec<f64>>, context_len: usize) -> PyResult<Vec<Vec<f64>>> {
    risk::fourth_moment_closed(&to_psd(&h)?, &to_mat(&a)?, context_len)
        .map(|m| from_mat(&m))
        .map_err(err)
}

/// `(estimate, std_err)` of the squared query error over `n` prompts.
#[pyfunction]
fn monte_carlo_risk(py: Python<'_>, spec: &PyTaskSpec, params: AnyParams<'_>, n: u64, seed: u64) -> PyResult<(f64, f64)> {
    let params = params.to_owned();
    params.validate(spec.0.dim()).map_err(err)?;
    let s = spec.0.clone();
    let r = py
        .detach(move || risk::monte_carlo_risk(&s, |p: &task::Prompt| params.predict(p), n, seed))
        .map_err(err)?;
    Ok((r.estimate, r.std_err))
}

/// Best LSA parameters over `restarts` starts and their closed-form risk.
#[pyfunction]
#[pyo3(signature = (spec, restarts = 8, seed = 0))]
fn minimize_lsa_risk(py: Python<'_>, spec: &PyTaskSpec, restarts: usize, seed: u64) -> PyResult<(PyLsa, f64)> {
    let s = spec.0.clone();
    let r = py
        .detach(move || risk::minimize_lsa_risk(&s, restarts, seed))
        .map_err(err)?;
    Ok((PyLsa(r.params), r.risk))
}

#[pyfunction]
#[pyo3(signature = (spec, params, tol = None))]
fn check_optimality(spec: &PyTaskSpec, params: AnyParams<'_>, tol: Option<f64>) -> PyResult<bool> {
    let tol = match tol {
        Some(t) => t,
        None => risk::default_tolerance(&spec.0).map_err(err)?,
    };
    match &params {
        AnyParams::Gd(x) => risk::check_gd_beta_optimality(&spec.0, &x.0, tol),
        AnyParams::Ltb(x) => risk::check_ltb_optimality(&spec.0, &x.0, tol),
        AnyParams::Lsa(_) => Err(IclError::NotApplicable("no optimality checker for LSA parameters".into())),
    }
    .map_err(err)
}

#[pyfunction]
fn bayes_predict(spec: &PyTaskSpec, prompt: &PyPrompt) -> PyResult<f64> {
    bayes::bayes_predict(&spec.0, &prompt.0).map_err(err)
}

/// `{"phi": [...], "phi_bar": x, "rate": x}`.
#[pyfunction]
fn bayes_rate(py: Python<'_>, spec: &PyTaskSpec) -> PyResult<Py<PyAny>> {
    let r = bayes::bayes_rate(&spec.0).map_err(err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("phi", r.phi)?;
    d.set_item("phi_bar", r.phi_bar)?;
    d.set_item("rate", r.rate)?;
    Ok(d.into_any().unbind())
}

/// `(dβ, dΓ)` at `(beta, gamma)`.
#[pyfunction]
fn flow_rhs(spec: &PyTaskSpec, beta: Vec<f64>, gamma: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let r = flow::flow_rhs(&spec.0, &FlowState::new(to_vec(beta), to_mat(&gamma)?)).map_err(err)?;
    Ok((from_vec(&r.d_beta), from_mat(&r.d_gamma)))
}

/// RK4 trajectory; `dt` and `t_end` default to the automatic schedule.
/// Returns the recorded metrics and the final `(β, Γ)`.
#[pyfunction]
#[pyo3(signature = (spec, beta0, gamma0, dt = None, t_end = None, record_every = 10))]
#[allow(clippy::type_complexity)]
fn integrate_flow(
    py: Python<'_>,
    spec: &PyTaskSpec,
    beta0: Vec<f64>,
    gamma0: Vec<Vec<f64>>,
    dt: Option<f64>,
    t_end: Option<f64>,
    record_every: usize,
) -> PyResult<(Vec<BTreeMap<&'static str, f64>>, (Vec<f64>, Vec<Vec<f64>>))> {
    let init = FlowState::new(to_vec(beta0), to_mat(&gamma0)?);
    let auto = |v: Option<f64>| v.map_or(runner::Auto::Auto, runner::Auto::Value);
    let (dt, t_end) = runner::flow_schedule(&spec.0, &init, auto(dt), auto(t_end)).map_err(err)?;
    let s = spec.0.clone();
    let traj = py
        .detach(move || flow::integrate_flow(&s, &init, dt, t_end, record_every))
        .map_err(err)?;
    let metrics = traj
        .metrics
        .iter()
        .map(|m| {
            BTreeMap::from([
                ("t", m.t),
                ("excess_risk", m.excess_risk),
                ("beta_img_dist", m.beta_img_dist),
                ("gamma_img_dist", m.gamma_img_dist),
                ("beta_null_drift", m.beta_null_drift),
                ("gamma_null_drift", m.gamma_null_drift),
                ("rate_bound", m.rate_bound),
            ])
        })
        .collect();
    let last = traj.final_state();
    Ok((metrics, (from_vec(&last.beta), from_mat(&last.gamma))))
}

/// Runs a suite from config text. Writes reports when `out` is given and
/// returns `(pass, records_csv)`.
#[pyfunction]
#[pyo3(signature = (suite, config, out = None, seed = None))]
fn run_suite(py: Python<'_>, suite: &str, config: &str, out: Option<PathBuf>, seed: Option<u64>) -> PyResult<(bool, String)> {
    let mut cfg = runner::parse_config(config, seed).map_err(err)?;
    cfg.suite = suite.parse().map_err(err)?;
    let report = py
        .detach(move || match out {
            Some(dir) => {
                cfg.out = dir;
                runner::run_suite(&cfg)
            }
            None => runner::run_suite_in_memory(&cfg).map(|o| o.report),
        })
        .map_err(err)?;
    Ok((report.pass, report.to_csv()))
}

#[pymodule]
fn icl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTaskSpec>()?;
    m.add_class::<PyPrompt>()?;
    m.add_class::<PyGdBeta>()?;
    m.add_class::<PyLsa>()?;
    m.add_class::<PyLtb>()?;
    m.add_function(wrap_pyfunction!(risk_closed, m)?)?;
    m.add_function(wrap_pyfunction!(excess_risk_gd_beta, m)?)?;
    m.add_function(wrap_pyfunction!(min_risk_gd_beta, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(omega, m)?)?;
    m.add_function(wrap_pyfunction!(h_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(gap_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(fourth_moment_closed, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_risk, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_lsa_risk, m)?)?;
    m.add_function(wrap_pyfunction!(check_optimality, m)?)?;
    m.add_function(wrap_pyfunction!(bayes_predict, m)?)?;
    m.add_function(wrap_pyfunction!(bayes_rate, m)?)?;
    m.add_function(wrap_pyfunction!(flow_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_flow, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    Ok(())
}
