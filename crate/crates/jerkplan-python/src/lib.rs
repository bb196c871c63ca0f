//! Python bindings: instances, generators, the solver, and the checker.
//!
//! The compiled library is importable as the `jerkplan` module once the
//! shared object is renamed to `jerkplan.so` on the Python path; see
//! `python/smoke_test.py` at the repository root.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use jerkplan::descent::Direction;
use jerkplan::instance::{self, Instance as CoreInstance};
use jerkplan::linearize::Mode;
use jerkplan::objective;
use jerkplan::sca::{self, SolveConfig, StopReason};

/// A problem instance: squared-speed caps on a uniform grid plus the
/// acceleration and jerk limits.
#[pyclass(frozen)]
struct Instance {
    inner: CoreInstance,
}

#[pymethods]
impl Instance {
    /// Builds an instance from a path length, per-point squared-speed
    /// caps, and the two limits. The end caps are forced to zero.
    #[new]
    fn new(s_f: f64, u: Vec<f64>, a_max: f64, j_max: f64) -> PyResult<Self> {
        CoreInstance::new(s_f, u, a_max, j_max)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Parses the JSON instance format (caps either direct or derived
    /// from curvature).
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        CoreInstance::from_json(text)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Serializes to the JSON instance format, cap vector included.
    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Grid points.
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    /// Grid spacing in meters.
    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    /// Path length in meters.
    #[getter]
    fn s_f(&self) -> f64 {
        self.inner.s_f()
    }

    /// Squared-speed caps, m²/s².
    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.u.clone()
    }

    /// Acceleration limit, m/s².
    #[getter]
    fn a_max(&self) -> f64 {
        self.inner.a_max
    }

    /// Jerk limit, m/s³.
    #[getter]
    fn j_max(&self) -> f64 {
        self.inner.j_max
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(n={}, s_f={}, a_max={}, j_max={})",
            self.inner.n,
            self.inner.s_f(),
            self.inner.a_max,
            self.inner.j_max
        )
    }
}

/// Outcome of a solve: the profile plus the certificate and counters.
#[pyclass(frozen)]
struct SolveResult {
    /// Final squared-speed profile, m²/s².
    #[pyo3(get)]
    profile: Vec<f64>,
    /// Travel time after each outer iteration; starts at infinity.
    #[pyo3(get)]
    objective_trail: Vec<f64>,
    /// Final travel time in seconds.
    #[pyo3(get)]
    travel_time: f64,
    /// KKT residual at the final profile.
    #[pyo3(get)]
    kkt_residual: f64,
    /// Outer iterations performed.
    #[pyo3(get)]
    iterations: usize,
    /// Steps that needed the line-search safety net.
    #[pyo3(get)]
    backtracks: usize,
    /// Inner re-solves forced by the neighbor-growth condition.
    #[pyo3(get)]
    growth_restrictions: usize,
    /// One of "kkt_certified", "small_step", "iteration_budget",
    /// "degenerate".
    #[pyo3(get)]
    reason: String,
    /// Wall-clock seconds spent solving.
    #[pyo3(get)]
    solve_seconds: f64,
}

#[pymethods]
impl SolveResult {
    fn __repr__(&self) -> String {
        format!(
            "SolveResult(travel_time={}, kkt_residual={:e}, iterations={}, reason={:?})",
            self.travel_time, self.kkt_residual, self.iterations, self.reason
        )
    }
}

/// Feasibility of a profile, split by constraint family. Each family
/// reports `(violation, index)`; negative violations are slack.
#[pyclass(frozen)]
struct Feasibility {
    /// All families within tolerance.
    #[pyo3(get)]
    feasible: bool,
    /// Tolerance the flag was evaluated at (relative to `1 + rhs`).
    #[pyo3(get)]
    tol: f64,
    /// Box rows `0 ≤ w_i ≤ u_i`.
    #[pyo3(get)]
    bounds: (f64, usize),
    /// Acceleration rows, both directions.
    #[pyo3(get)]
    acc: (f64, usize),
    /// Positive jerk rows.
    #[pyo3(get)]
    jerk_par: (f64, usize),
    /// Negative jerk rows.
    #[pyo3(get)]
    jerk_nar: (f64, usize),
}

#[pymethods]
impl Feasibility {
    /// The worst family as `(name, index, violation)`.
    fn worst(&self) -> (String, usize, f64) {
        let all = [
            ("bounds", self.bounds),
            ("acc", self.acc),
            ("jerk_par", self.jerk_par),
            ("jerk_nar", self.jerk_nar),
        ];
        let (name, (violation, index)) = all
            .iter()
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .copied()
            .expect("four families");
        (name.to_string(), index, violation)
    }

    fn __repr__(&self) -> String {
        let (name, index, violation) = self.worst();
        format!(
            "Feasibility(feasible={}, worst=({name:?}, {index}, {violation:e}))",
            self.feasible
        )
    }
}

fn reason_label(reason: StopReason) -> &'static str {
    match reason {
        StopReason::KktCertified => "kkt_certified",
        StopReason::SmallStep => "small_step",
        StopReason::IterationBudget => "iteration_budget",
        StopReason::Degenerate => "degenerate",
    }
}

/// Random seven-plateau cap profile on a 60 m path.
#[pyfunction]
fn gen_experiment1(seed: u64, n: usize) -> PyResult<Instance> {
    instance::gen_experiment1(seed, n)
        .map(|inner| Instance { inner })
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Random road-like instance: 1 km path, five curvature segments.
#[pyfunction]
fn gen_experiment2(seed: u64, n: usize) -> PyResult<Instance> {
    instance::gen_experiment2(seed, n)
        .map(|inner| Instance { inner })
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Sine-shaped path; deterministic.
#[pyfunction]
fn gen_sine_path(n: usize) -> PyResult<Instance> {
    instance::gen_sine_path(n)
        .map(|inner| Instance { inner })
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Straight-clothoid-circle path; deterministic.
#[pyfunction]
fn gen_clothoid_path(n: usize) -> PyResult<Instance> {
    instance::gen_clothoid_path(n)
        .map(|inner| Instance { inner })
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Minimum-time speed profile for an instance.
///
/// `mode` selects the jerk-row linearization ("theta-beta" or "eta");
/// `direction` selects the trust-region direction engine ("heuristic"
/// or "lp"). The remaining keywords override solver tolerances and
/// budgets; unset ones keep their defaults.
#[pyfunction]
#[pyo3(signature = (
    inst,
    *,
    mode = "theta-beta",
    direction = "heuristic",
    eps = None,
    eps1 = None,
    max_outer = None,
    step_tol_rel = None,
    kkt_target = None,
))]
#[allow(clippy::too_many_arguments)]
fn solve(
    inst: PyRef<'_, Instance>,
    mode: &str,
    direction: &str,
    eps: Option<f64>,
    eps1: Option<f64>,
    max_outer: Option<usize>,
    step_tol_rel: Option<f64>,
    kkt_target: Option<f64>,
) -> PyResult<SolveResult> {
    let mut cfg = SolveConfig {
        mode: match mode {
            "theta-beta" | "theta_beta" => Mode::ThetaBeta,
            "eta" => Mode::Eta,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown mode {other:?} (expected \"theta-beta\" or \"eta\")"
                )))
            }
        },
        direction: match direction {
            "heuristic" => Direction::Heuristic,
            "lp" => Direction::Lp,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown direction {other:?} (expected \"heuristic\" or \"lp\")"
                )))
            }
        },
        ..SolveConfig::default()
    };
    if let Some(eps) = eps {
        cfg.eps = eps;
    }
    if let Some(eps1) = eps1 {
        cfg.eps1 = eps1;
    }
    if let Some(max_outer) = max_outer {
        cfg.max_outer = max_outer;
    }
    if let Some(step_tol_rel) = step_tol_rel {
        cfg.step_tol_rel = step_tol_rel;
    }
    if let Some(kkt_target) = kkt_target {
        cfg.kkt_target = kkt_target;
    }

    let report =
        sca::solve(&inst.inner, &cfg).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(SolveResult {
        profile: report.profile,
        objective_trail: report.objective,
        travel_time: report.travel_time,
        kkt_residual: report.kkt_residual,
        iterations: report.iterations,
        backtracks: report.backtracks,
        growth_restrictions: report.growth_restrictions,
        reason: reason_label(report.reason).to_string(),
        solve_seconds: report.solve_seconds,
    })
}

/// Checks a squared-speed profile against an instance's constraints.
#[pyfunction]
#[pyo3(signature = (w, inst, tol = 1e-8))]
fn check_feasibility(w: Vec<f64>, inst: PyRef<'_, Instance>, tol: f64) -> PyResult<Feasibility> {
    if w.len() != inst.inner.n {
        return Err(PyValueError::new_err(format!(
            "profile has {} points, instance has {}",
            w.len(),
            inst.inner.n
        )));
    }
    let report = objective::check_feasibility(&w, &inst.inner, tol);
    Ok(Feasibility {
        feasible: report.feasible,
        tol: report.tol,
        bounds: (report.bounds.max, report.bounds.index),
        acc: (report.acc.max, report.acc.index),
        jerk_par: (report.jerk_par.max, report.jerk_par.index),
        jerk_nar: (report.jerk_nar.max, report.jerk_nar.index),
    })
}

/// Travel time of a squared-speed profile on grid spacing `h`; infinite
/// when adjacent points are both at standstill.
#[pyfunction]
fn eval_objective(w: Vec<f64>, h: f64) -> f64 {
    objective::eval_objective(&w, h)
}

/// Minimum-time speed profiles under speed, acceleration, and jerk
/// limits.
#[pymodule]
#[pyo3(name = "jerkplan")]
fn bindings(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<SolveResult>()?;
    m.add_class::<Feasibility>()?;
    m.add_function(wrap_pyfunction!(gen_experiment1, m)?)?;
    m.add_function(wrap_pyfunction!(gen_experiment2, m)?)?;
    m.add_function(wrap_pyfunction!(gen_sine_path, m)?)?;
    m.add_function(wrap_pyfunction!(gen_clothoid_path, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(check_feasibility, m)?)?;
    m.add_function(wrap_pyfunction!(eval_objective, m)?)?;
    Ok(())
}
