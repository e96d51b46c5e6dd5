//! Python bindings for `qpf-core`.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qpf_core::bifurcation::{self, BifurcationOptions};
use qpf_core::curves::{self, CurveOptions};
use qpf_core::maps::{CylinderPoint, Expr};
use qpf_core::{cohomology, dynamics};

create_exception!(qpf, ConvergenceError, PyRuntimeError, "An iterative solve failed to converge.");

fn to_py(err: qpf_core::Error) -> PyErr {
    if err.is_convergence_failure() {
        ConvergenceError::new_err(err.to_string())
    } else {
        PyValueError::new_err(err.to_string())
    }
}

/// Rotation number α: "golden", "sqrt2m1", "p/q" or a decimal.
#[pyclass(frozen, skip_from_py_object, module = "qpf")]
#[derive(Clone)]
struct Frequency(qpf_core::Frequency);

#[pymethods]
impl Frequency {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        qpf_core::Frequency::parse(spec).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn golden() -> Self {
        Self(qpf_core::Frequency::golden())
    }

    #[staticmethod]
    fn rational(p: i64, q: i64) -> PyResult<Self> {
        qpf_core::Frequency::rational(p, q).map(Self).map_err(to_py)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta()
    }

    #[getter]
    fn is_rational(&self) -> bool {
        self.0.is_rational()
    }

    #[getter]
    fn partial_quotients(&self) -> Vec<u64> {
        self.0.partial_quotients().to_vec()
    }

    /// `|e^{2πinα} − 1|`.
    fn divisor(&self, n: i64) -> f64 {
        self.0.divisor(n)
    }

    fn __repr__(&self) -> String {
        format!("Frequency({})", self.0)
    }
}

/// Real trigonometric polynomial of fixed order.
#[pyclass(frozen, skip_from_py_object, module = "qpf")]
#[derive(Clone)]
struct PeriodicFunction(qpf_core::PeriodicFunction);

#[pymethods]
impl PeriodicFunction {
    #[staticmethod]
    #[pyo3(signature = (a0, cos, sin, order))]
    fn from_cos_sin(a0: f64, cos: Vec<f64>, sin: Vec<f64>, order: usize) -> Self {
        Self(qpf_core::PeriodicFunction::from_cos_sin(a0, &cos, &sin, order))
    }

    #[staticmethod]
    fn from_samples(values: Vec<f64>, order: usize) -> PyResult<Self> {
        qpf_core::PeriodicFunction::from_samples(&values, order).map(Self).map_err(to_py)
    }

    #[getter]
    fn order(&self) -> usize {
        self.0.order()
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean()
    }

    /// Coefficients `û_n` for `n = 0..order` as `(re, im)` pairs.
    fn coeffs(&self) -> Vec<(f64, f64)> {
        self.0.coeffs().iter().map(|c| (c.re, c.im)).collect()
    }

    fn __call__(&self, theta: f64) -> f64 {
        self.0.eval(theta)
    }

    fn samples(&self, m: usize) -> Vec<f64> {
        self.0.samples(m)
    }

    fn derivative(&self) -> Self {
        Self(self.0.derivative())
    }

    /// `θ ↦ f(θ + 2π·turns)`.
    fn shift(&self, turns: f64) -> Self {
        Self(self.0.shift(turns))
    }

    fn sobolev_norm(&self, k: u32) -> f64 {
        self.0.sobolev_norm(k)
    }
}

/// Forcing `F(r, θ; ε)` of the cylinder map `r₁ = r + ω₀ + εF`, `θ₁ = θ + 2πα`.
#[pyclass(frozen, skip_from_py_object, module = "qpf")]
#[derive(Clone)]
struct ForcedMap(qpf_core::ForcedMap);

#[pymethods]
impl ForcedMap {
    #[staticmethod]
    fn zero() -> Self {
        Self(qpf_core::ForcedMap::zero())
    }

    #[staticmethod]
    fn arnold(omega: f64, k: f64, b: f64) -> Self {
        Self(qpf_core::ForcedMap::arnold(omega, k, b))
    }

    #[staticmethod]
    fn arnold_scaled(omega0: f64, omega1: f64, b: f64) -> Self {
        Self(qpf_core::ForcedMap::arnold_scaled(omega0, omega1, b))
    }

    #[staticmethod]
    fn transformed_arnold(omega1: f64, b0: f64, b1: f64, alpha: &Frequency) -> PyResult<Self> {
        qpf_core::ForcedMap::transformed_arnold(omega1, b0, b1, &alpha.0).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn linear_test(g: &PeriodicFunction) -> Self {
        Self(qpf_core::ForcedMap::linear_test(g.0.clone()))
    }

    #[staticmethod]
    fn theta_only(p: &PeriodicFunction) -> Self {
        Self(qpf_core::ForcedMap::theta_only(p.0.clone()))
    }

    #[staticmethod]
    fn rational_counterexample(q: u32) -> PyResult<Self> {
        qpf_core::ForcedMap::rational_counterexample(q).map(Self).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (f, periodic_in_r = false))]
    fn expression(f: &str, periodic_in_r: bool) -> PyResult<Self> {
        let expr = Expr::parse(f).map_err(to_py)?;
        qpf_core::ForcedMap::expression(expr, periodic_in_r).map(Self).map_err(to_py)
    }

    fn with_offset(&self, omega1: f64) -> Self {
        Self(self.0.with_offset(omega1))
    }

    #[getter]
    fn periodic_in_r(&self) -> bool {
        self.0.periodic_in_r()
    }

    fn __call__(&self, r: f64, theta: f64, eps: f64) -> f64 {
        self.0.eval(r, theta, eps)
    }

    /// One step of the map from `(r, θ)`.
    fn step(&self, eps: f64, alpha: &Frequency, r: f64, theta: f64) -> (f64, f64) {
        let x = self.0.step(eps, &alpha.0, CylinderPoint::new(r, theta));
        (x.r, x.theta)
    }

    fn __repr__(&self) -> String {
        format!("ForcedMap({})", self.0.describe())
    }
}

/// A curve `r = ψ(θ)` mapped onto itself up to the vertical translation `λ`.
#[pyclass(frozen, module = "qpf")]
struct TranslatedCurve(qpf_core::TranslatedCurve);

#[pymethods]
impl TranslatedCurve {
    #[getter]
    fn psi(&self) -> PeriodicFunction {
        PeriodicFunction(self.0.psi.clone())
    }

    #[getter]
    fn c(&self) -> f64 {
        self.0.c
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.0.epsilon
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.0.lambda
    }

    #[getter]
    fn residual_sup(&self) -> f64 {
        self.0.residual_sup
    }

    #[getter]
    fn d2_norm(&self) -> f64 {
        self.0.d2_norm
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }

    #[getter]
    fn breakdown(&self) -> Option<String> {
        self.0.breakdown.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "TranslatedCurve(c={}, epsilon={}, lambda={:e}, iterations={}, converged={})",
            self.0.c, self.0.epsilon, self.0.lambda, self.0.iterations, self.0.converged
        )
    }
}

fn curve_options(order: usize, max_iter: usize) -> CurveOptions {
    CurveOptions { max_iter, ..CurveOptions::default().with_order(order) }
}

#[pyfunction]
#[pyo3(signature = (map, eps, alpha, c, order = 256, max_iter = 200))]
fn translated_curve(
    py: Python<'_>,
    map: &ForcedMap,
    eps: f64,
    alpha: &Frequency,
    c: f64,
    order: usize,
    max_iter: usize,
) -> PyResult<TranslatedCurve> {
    let opts = curve_options(order, max_iter);
    py.detach(|| curves::translated_curve(&map.0, eps, &alpha.0, c, &opts)).map(TranslatedCurve).map_err(to_py)
}

/// Zero-mean `G` with `G(θ + 2πα) − G(θ) = p(θ)`.
#[pyfunction]
fn solve_constant(p: &PeriodicFunction, alpha: &Frequency) -> PyResult<PeriodicFunction> {
    cohomology::solve_constant(&p.0, &alpha.0).map(PeriodicFunction).map_err(to_py)
}

/// `(φ, ν)` solving the linearised equation with coefficients `a`, `p`.
#[pyfunction]
fn solve_linde(a: &PeriodicFunction, p: &PeriodicFunction, alpha: &Frequency) -> PyResult<(PeriodicFunction, f64)> {
    cohomology::solve_linde(&a.0, &p.0, &alpha.0).map(|s| (PeriodicFunction(s.phi), s.nu)).map_err(to_py)
}

/// Invariant curves with `c` in `[c_lo, c_hi]`, as a list of dicts.
#[pyfunction]
#[pyo3(signature = (map, eps, alpha, c_lo, c_hi, order = 64, samples_per_period = 128))]
#[allow(clippy::too_many_arguments)]
fn find_invariant_curves<'py>(
    py: Python<'py>,
    map: &ForcedMap,
    eps: f64,
    alpha: &Frequency,
    c_lo: f64,
    c_hi: f64,
    order: usize,
    samples_per_period: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let opts = BifurcationOptions { samples_per_period, curve: CurveOptions::default().with_order(order), ..Default::default() };
    let report = py
        .detach(|| bifurcation::find_invariant_curves(&map.0, eps, &alpha.0, (c_lo, c_hi), &opts))
        .map_err(to_py)?;
    report
        .roots
        .into_iter()
        .map(|root| {
            let d = PyDict::new(py);
            d.set_item("c", root.c)?;
            d.set_item("phi", root.phi)?;
            d.set_item("dphi_dc", root.dphi_dc)?;
            d.set_item("chi_plus", root.chi_plus)?;
            d.set_item("classification", format!("{:?}", root.classification).to_lowercase())?;
            d.set_item("degenerate_suspect", root.degenerate_suspect)?;
            d.set_item("curve", TranslatedCurve(root.curve))?;
            Ok(d)
        })
        .collect()
}

/// `(ω_*, ω*)` such that `map + ω₁` has an invariant curve exactly for `ω₁` in between.
#[pyfunction]
#[pyo3(signature = (map, eps, alpha, order = 64, samples_per_period = 128))]
fn mode_lock_interval(
    py: Python<'_>,
    map: &ForcedMap,
    eps: f64,
    alpha: &Frequency,
    order: usize,
    samples_per_period: usize,
) -> PyResult<(f64, f64)> {
    let opts = BifurcationOptions { samples_per_period, curve: CurveOptions::default().with_order(order), ..Default::default() };
    let base = map.0.clone();
    let family = move |w: f64| base.with_offset(w);
    py.detach(|| bifurcation::mode_lock_interval(&family, eps, &alpha.0, &opts))
        .map(|m| (m.omega_lower, m.omega_upper))
        .map_err(to_py)
}

/// Finite-time Lyapunov averages `(n, average)` along the orbit of `θ₀`.
#[pyfunction]
fn lyapunov(curve: &TranslatedCurve, map: &ForcedMap, alpha: &Frequency, theta0: f64, n_max: usize) -> PyResult<Vec<(usize, f64)>> {
    dynamics::lyapunov(&curve.0, &map.0, &alpha.0, theta0, n_max).map(|p| p.log_products).map_err(to_py)
}

/// Points `(r, θ)` after `n_transient` silent steps.
#[pyfunction]
#[pyo3(signature = (map, eps, alpha, r0, theta0, n_keep, n_transient = 0))]
#[allow(clippy::too_many_arguments)]
fn orbit(
    map: &ForcedMap,
    eps: f64,
    alpha: &Frequency,
    r0: f64,
    theta0: f64,
    n_keep: usize,
    n_transient: usize,
) -> PyResult<Vec<(f64, f64)>> {
    dynamics::orbit_sample(&map.0, eps, &alpha.0, CylinderPoint::new(r0, theta0), n_transient, n_keep)
        .map(|pts| pts.into_iter().map(|p| (p.r, p.theta)).collect())
        .map_err(to_py)
}

/// `(θ*, θ_*)` proving that no translated curve exists, or `None` if inconclusive.
#[pyfunction]
fn rational_obstruction(map: &ForcedMap, eps: f64, alpha: &Frequency) -> PyResult<Option<(f64, f64)>> {
    curves::rational_obstruction(&map.0, eps, &alpha.0)
        .map(|c| c.map(|c| (c.theta_upper, c.theta_lower)))
        .map_err(to_py)
}

#[pymodule]
fn qpf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConvergenceError", m.py().get_type::<ConvergenceError>())?;
    m.add_class::<Frequency>()?;
    m.add_class::<PeriodicFunction>()?;
    m.add_class::<ForcedMap>()?;
    m.add_class::<TranslatedCurve>()?;
    m.add_function(wrap_pyfunction!(translated_curve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_constant, m)?)?;
    m.add_function(wrap_pyfunction!(solve_linde, m)?)?;
    m.add_function(wrap_pyfunction!(find_invariant_curves, m)?)?;
    m.add_function(wrap_pyfunction!(mode_lock_interval, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(orbit, m)?)?;
    m.add_function(wrap_pyfunction!(rational_obstruction, m)?)?;
    Ok(())
}
