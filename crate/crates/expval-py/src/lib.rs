//! Python bindings for the `expval` crate.
//!
//! Builds as a cdylib importable as `expval`. The surface mirrors the Rust
//! API: `Space`, `Operator`, and `State` for building operators by hand,
//! `Scenario` for JSON-configured drive setups with every series method
//! attached, and free functions for constant-drive expansions, word
//! expansions, suites, and full experiment runs.

use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use expval::algebra::{closure_check, subspace_expectation};
use expval::error::Error;
use expval::experiment::{
    run_experiment as run_experiment_impl, run_suite as run_suite_impl, ExperimentConfig,
};
use expval::hilbert::{
    commutator as commutator_impl, expectation, fock_state, ladder_operator, HilbertSpace,
    LadderKind, OperatorMatrix, StateVector,
};
use expval::oracles::{dyson_series_expectation, exact_expectation, heisenberg_iteration_series};
use expval::scenario::{build_scenario, ScenarioConfig, ScenarioParts};
use expval::series::{
    bch_series as bch_series_impl, converge_series, nested_series_expectation, SeriesResult,
    SliceGrid, SlicePolicy,
};
use expval::tolerances::CLOSURE_TOL;
use expval::words::{expand_nested_commutator, NestingPattern};

fn pyerr(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_rows(op: &OperatorMatrix) -> Vec<Vec<Complex64>> {
    let m = op.matrix();
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Truncated product space of bosonic modes.
#[pyclass(module = "expval", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Space {
    inner: HilbertSpace,
}

#[pymethods]
impl Space {
    #[new]
    fn new(mode_dims: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: HilbertSpace::new(&mode_dims).map_err(pyerr)? })
    }

    fn mode_dims(&self) -> Vec<usize> {
        self.inner.mode_dims().to_vec()
    }

    fn total_dim(&self) -> usize {
        self.inner.total_dim()
    }

    fn n_modes(&self) -> usize {
        self.inner.n_modes()
    }

    fn __repr__(&self) -> String {
        format!("Space(mode_dims={:?})", self.inner.mode_dims())
    }
}

/// Dense operator on a [`Space`], with the usual ladder constructors.
#[pyclass(module = "expval", skip_from_py_object)]
#[derive(Clone)]
struct Operator {
    inner: OperatorMatrix,
}

#[pymethods]
impl Operator {
    /// Annihilation operator for one mode.
    #[staticmethod]
    fn lowering(space: &Space, mode: usize) -> PyResult<Self> {
        Ok(Self { inner: ladder_operator(&space.inner, mode, LadderKind::Lower).map_err(pyerr)? })
    }

    /// Creation operator for one mode.
    #[staticmethod]
    fn raising(space: &Space, mode: usize) -> PyResult<Self> {
        Ok(Self { inner: ladder_operator(&space.inner, mode, LadderKind::Raise).map_err(pyerr)? })
    }

    /// Number operator for one mode.
    #[staticmethod]
    fn number(space: &Space, mode: usize) -> PyResult<Self> {
        Ok(Self { inner: ladder_operator(&space.inner, mode, LadderKind::Number).map_err(pyerr)? })
    }

    #[staticmethod]
    fn identity(space: &Space) -> Self {
        Self { inner: OperatorMatrix::identity(&space.inner) }
    }

    fn space(&self) -> Space {
        Space { inner: self.inner.space().clone() }
    }

    /// Entries as a row-major list of lists of complex numbers.
    fn matrix(&self) -> Vec<Vec<Complex64>> {
        matrix_rows(&self.inner)
    }

    fn is_hermitian(&self) -> bool {
        self.inner.is_hermitian()
    }

    fn adjoint(&self) -> Self {
        Self { inner: self.inner.adjoint() }
    }

    fn scaled(&self, factor: Complex64) -> Self {
        Self { inner: self.inner.scaled(factor) }
    }

    fn commutator(&self, other: &Operator) -> PyResult<Self> {
        Ok(Self { inner: commutator_impl(&self.inner, &other.inner).map_err(pyerr)? })
    }

    fn expectation(&self, state: &State) -> PyResult<Complex64> {
        expectation(&state.inner, &self.inner).map_err(pyerr)
    }

    fn max_entry_norm(&self) -> f64 {
        self.inner.max_entry_norm()
    }

    fn hs_norm(&self) -> f64 {
        self.inner.hs_norm()
    }

    fn __add__(&self, other: &Operator) -> PyResult<Self> {
        Ok(Self { inner: self.inner.add(&other.inner).map_err(pyerr)? })
    }

    fn __sub__(&self, other: &Operator) -> PyResult<Self> {
        Ok(Self { inner: self.inner.sub(&other.inner).map_err(pyerr)? })
    }

    /// Operator product, spelled `a @ b`.
    fn __matmul__(&self, other: &Operator) -> PyResult<Self> {
        Ok(Self { inner: self.inner.mul(&other.inner).map_err(pyerr)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Operator(dim={}, hermitian={})",
            self.inner.space().total_dim(),
            self.inner.is_hermitian()
        )
    }
}

/// Normalized state vector on a [`Space`].
#[pyclass(module = "expval", skip_from_py_object)]
#[derive(Clone)]
struct State {
    inner: StateVector,
}

#[pymethods]
impl State {
    /// Build from raw amplitudes; the vector is normalized on entry.
    #[new]
    fn new(space: &Space, amplitudes: Vec<Complex64>) -> PyResult<Self> {
        let v = DVector::from_vec(amplitudes);
        Ok(Self { inner: StateVector::from_amplitudes(space.inner.clone(), v).map_err(pyerr)? })
    }

    /// Fock basis state for an occupation tuple, one entry per mode.
    #[staticmethod]
    fn fock(space: &Space, occupations: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: fock_state(&space.inner, &occupations).map_err(pyerr)? })
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.inner.amplitudes().iter().copied().collect()
    }

    fn overlap(&self, other: &State) -> PyResult<Complex64> {
        self.inner.overlap(&other.inner).map_err(pyerr)
    }

    fn expectation(&self, op: &Operator) -> PyResult<Complex64> {
        expectation(&self.inner, &op.inner).map_err(pyerr)
    }

    fn __repr__(&self) -> String {
        format!("State(dim={})", self.inner.space().total_dim())
    }
}

/// Order-by-order outcome of one series method.
#[pyclass(module = "expval", name = "SeriesResult", skip_from_py_object)]
#[derive(Clone)]
struct PySeriesResult {
    #[pyo3(get)]
    method: String,
    #[pyo3(get)]
    order_terms: Vec<Complex64>,
    #[pyo3(get)]
    partial_sums: Vec<Complex64>,
    #[pyo3(get)]
    n_slices: usize,
    #[pyo3(get)]
    leakage: f64,
    #[pyo3(get)]
    converged: bool,
}

impl From<SeriesResult> for PySeriesResult {
    fn from(r: SeriesResult) -> Self {
        Self {
            method: r.method.to_string(),
            order_terms: r.order_terms,
            partial_sums: r.partial_sums,
            n_slices: r.n_slices,
            leakage: r.leakage,
            converged: r.converged,
        }
    }
}

#[pymethods]
impl PySeriesResult {
    /// Real part of the deepest partial sum.
    fn total(&self) -> f64 {
        self.partial_sums.last().map(|z| z.re).unwrap_or(0.0)
    }

    fn __repr__(&self) -> String {
        format!(
            "SeriesResult(method='{}', orders={}, total={:.6e}, n_slices={})",
            self.method,
            self.order_terms.len().saturating_sub(1),
            self.total(),
            self.n_slices
        )
    }
}

/// A drive scenario built from the same JSON config the CLI accepts,
/// with every expansion method attached.
#[pyclass(module = "expval")]
struct Scenario {
    parts: ScenarioParts,
}

impl Scenario {
    fn grid(&self, n_slices: usize) -> PyResult<SliceGrid> {
        SliceGrid::new(self.parts.spec.horizon(), n_slices).map_err(pyerr)
    }
}

#[pymethods]
impl Scenario {
    /// Parse a scenario config, e.g.
    /// `{"scenario": "stimulated_emission", "mode_dims": [4],
    ///   "drives": [{"mode": 0, "envelope": {"kind": "constant", "amplitude": [0.3, 0.0]}}],
    ///   "horizon": 0.5}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let config: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| PyValueError::new_err(format!("bad scenario JSON: {e}")))?;
        Ok(Self { parts: build_scenario(&config).map_err(pyerr)? })
    }

    fn label(&self) -> String {
        self.parts.spec.label().to_string()
    }

    fn observable_label(&self) -> String {
        self.parts.observable_label.clone()
    }

    fn horizon(&self) -> f64 {
        self.parts.spec.horizon()
    }

    fn space(&self) -> Space {
        Space { inner: self.parts.spec.space().clone() }
    }

    fn observable(&self) -> Operator {
        Operator { inner: self.parts.observable.clone() }
    }

    fn initial_state(&self) -> State {
        State { inner: self.parts.initial.clone() }
    }

    /// Hamiltonian snapshot at time `t`.
    fn hamiltonian(&self, t: f64) -> PyResult<Operator> {
        Ok(Operator { inner: self.parts.spec.evaluate(t).map_err(pyerr)? })
    }

    /// Latest-time-first iterated-commutator series on a fixed grid.
    #[pyo3(signature = (max_order, n_slices=256))]
    fn nested(&self, max_order: usize, n_slices: usize) -> PyResult<PySeriesResult> {
        let grid = self.grid(n_slices)?;
        nested_series_expectation(
            &self.parts.spec,
            &self.parts.observable,
            &self.parts.initial,
            &grid,
            max_order,
        )
        .map(Into::into)
        .map_err(pyerr)
    }

    /// Grid-doubling refinement of the nested series until the order
    /// terms stabilize.
    #[pyo3(signature = (max_order, initial_slices=64, max_slices=65536, tolerance=1e-8))]
    fn converge(
        &self,
        max_order: usize,
        initial_slices: usize,
        max_slices: usize,
        tolerance: f64,
    ) -> PyResult<PySeriesResult> {
        let policy = SlicePolicy { initial_slices, max_slices, tolerance };
        converge_series(
            &self.parts.spec,
            &self.parts.observable,
            &self.parts.initial,
            self.parts.spec.horizon(),
            max_order,
            &policy,
        )
        .map(Into::into)
        .map_err(pyerr)
    }

    /// State-side expansion with corrections grouped by combined order.
    #[pyo3(signature = (max_order, n_slices=256))]
    fn dyson(&self, max_order: usize, n_slices: usize) -> PyResult<PySeriesResult> {
        let grid = self.grid(n_slices)?;
        dyson_series_expectation(
            &self.parts.spec,
            &self.parts.observable,
            &self.parts.initial,
            &grid,
            max_order,
        )
        .map(|r| r.to_series_result().into())
        .map_err(pyerr)
    }

    /// Series driven by the exactly-evolved observable at each slice.
    #[pyo3(signature = (max_order, n_slices=256))]
    fn heisenberg_iteration(&self, max_order: usize, n_slices: usize) -> PyResult<PySeriesResult> {
        let grid = self.grid(n_slices)?;
        heisenberg_iteration_series(
            &self.parts.spec,
            &self.parts.observable,
            &self.parts.initial,
            &grid,
            max_order,
        )
        .map(Into::into)
        .map_err(pyerr)
    }

    /// Propagator-based reference value. Returns
    /// `(value, error_estimate, n_slices, stabilized)`.
    #[pyo3(signature = (initial_slices=64, max_slices=131072, tolerance=1e-10))]
    fn exact(
        &self,
        initial_slices: usize,
        max_slices: usize,
        tolerance: f64,
    ) -> PyResult<(f64, f64, usize, bool)> {
        let policy = SlicePolicy { initial_slices, max_slices, tolerance };
        let r = exact_expectation(
            &self.parts.spec,
            &self.parts.observable,
            &self.parts.initial,
            self.parts.spec.horizon(),
            &policy,
        )
        .map_err(pyerr)?;
        Ok((r.value, r.error_estimate, r.n_slices, r.stabilized))
    }

    /// Moment-flow value over the scenario's closure basis. Returns
    /// `(value, imag_defect, max_structure_residual)`.
    #[pyo3(signature = (n_steps=400))]
    fn subspace(&self, n_steps: usize) -> PyResult<(f64, f64, f64)> {
        let r = subspace_expectation(
            &self.parts.spec,
            &self.parts.closure_basis,
            &self.parts.observable,
            &self.parts.initial,
            self.parts.spec.horizon(),
            n_steps,
        )
        .map_err(pyerr)?;
        Ok((r.value, r.imag_defect, r.max_structure_residual))
    }

    /// Checks the closure basis under iterated brackets with the drive.
    /// Returns `(closed, max_residual)`.
    #[pyo3(signature = (depth=2, times=None, tolerance=CLOSURE_TOL))]
    fn closure(
        &self,
        depth: usize,
        times: Option<Vec<f64>>,
        tolerance: f64,
    ) -> PyResult<(bool, f64)> {
        let horizon = self.parts.spec.horizon();
        let times = times.unwrap_or_else(|| vec![0.0, 0.5 * horizon, horizon]);
        let report = closure_check(&self.parts.spec, &self.parts.closure_basis, &times, depth, tolerance)
            .map_err(pyerr)?;
        Ok((report.closed, report.max_residual))
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(label='{}', observable='{}', horizon={})",
            self.parts.spec.label(),
            self.parts.observable_label,
            self.parts.spec.horizon()
        )
    }
}

/// Commutator `[a, b]` of two operators.
#[pyfunction]
fn commutator(a: &Operator, b: &Operator) -> PyResult<Operator> {
    Ok(Operator { inner: commutator_impl(&a.inner, &b.inner).map_err(pyerr)? })
}

/// Constant-drive expansion: term m is `(it)^m/m! <[H,[H,...[H,O]]]>`.
#[pyfunction]
fn bch_series(
    hamiltonian: &Operator,
    observable: &Operator,
    state: &State,
    t: f64,
    max_order: usize,
) -> PyResult<PySeriesResult> {
    bch_series_impl(&hamiltonian.inner, &observable.inner, &state.inner, t, max_order)
        .map(Into::into)
        .map_err(pyerr)
}

/// Expand a nested commutator into signed words. `pattern` is `"left"`
/// for `[[s0,s1],s2]...` or `"right"` for `[s0,[s1,[...]]]`; returns
/// lexicographically sorted `(sign, word)` pairs.
#[pyfunction]
fn expand_words(pattern: &str, symbols: &str) -> PyResult<Vec<(i8, String)>> {
    let pattern = match pattern {
        "left" => NestingPattern::LeftNested,
        "right" => NestingPattern::RightNested,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown nesting pattern '{other}' (expected 'left' or 'right')"
            )))
        }
    };
    let chars: Vec<char> = symbols.chars().collect();
    let words = expand_nested_commutator(pattern, &chars).map_err(pyerr)?;
    Ok(words.into_iter().map(|w| (w.sign, w.word())).collect())
}

/// Run a full experiment config (same JSON the CLI takes), writing
/// `report.json` and `orders.csv` under `out_dir`. Returns the report
/// as a JSON string.
#[pyfunction]
fn run_experiment(config_json: &str, out_dir: &str) -> PyResult<String> {
    let config: ExperimentConfig = serde_json::from_str(config_json)
        .map_err(|e| PyValueError::new_err(format!("bad experiment config: {e}")))?;
    let report = run_experiment_impl(&config, Path::new(out_dir)).map_err(pyerr)?;
    serde_json::to_string_pretty(&report)
        .map_err(|e| PyValueError::new_err(format!("report serialization failed: {e}")))
}

/// Run one of the named self-check suites (`linearity`, `scaling`,
/// `closure`, `distinctness`). Returns `(passed, rendered_text)`.
#[pyfunction]
#[pyo3(signature = (name, seed=0))]
fn run_suite(name: &str, seed: u64) -> PyResult<(bool, String)> {
    let report = run_suite_impl(name, seed).map_err(pyerr)?;
    Ok((report.passed(), report.render()))
}

#[pymodule]
#[pyo3(name = "expval")]
fn expval_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Space>()?;
    m.add_class::<Operator>()?;
    m.add_class::<State>()?;
    m.add_class::<PySeriesResult>()?;
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(commutator, m)?)?;
    m.add_function(wrap_pyfunction!(bch_series, m)?)?;
    m.add_function(wrap_pyfunction!(expand_words, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
