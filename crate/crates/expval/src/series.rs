//! Commutator-series expansions of observable expectation values.
//!
//! The central object is a graded family of operators S_0..S_M with
//! S_0 = O. Sweeping time slices from the latest to the earliest and
//! updating S_m += [S_{m-1}, H(t_k)] dt / i (highest order first, so each
//! update sees S_{m-1} without the current slice) accumulates exactly the
//! strictly-ordered m-fold integrals of the series in which the innermost
//! commutator carries the most recent time. Expectation values of S_m in
//! the initial state are the per-order terms; no factorials appear.
//!
//! For a constant Hamiltonian the same terms collapse to the closed form
//! (it)^m / m! <[H, [H, ... [H, O]]]>, which `bch_series` evaluates
//! directly and which doubles as an oracle for the sweep.

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::hilbert::{check_same_space, safe_projector, OperatorMatrix, StateVector};
use crate::linalg;
use crate::tolerances::{HERMITICITY_TOL, ORDER_TERM_IMAG_TOL};
use crate::C64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Uniform slicing of [0, horizon] with midpoint sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceGrid {
    horizon: f64,
    n_slices: usize,
}

impl SliceGrid {
    pub fn new(horizon: f64, n_slices: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::BadHorizon { horizon });
        }
        if n_slices == 0 {
            return Err(Error::ZeroSlices);
        }
        Ok(Self { horizon, n_slices })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_slices as f64
    }

    /// Midpoint of slice `k`, for `k` in `1..=n_slices`.
    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 - 0.5) * self.dt()
    }

    /// The same horizon with twice the slices.
    pub fn refined(&self) -> Self {
        Self { horizon: self.horizon, n_slices: self.n_slices * 2 }
    }
}

/// Which expansion produced a [`SeriesResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesMethod {
    Bch,
    Nested,
    Dyson,
    HeisenbergIteration,
}

impl std::fmt::Display for SeriesMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SeriesMethod::Bch => "bch",
            SeriesMethod::Nested => "nested",
            SeriesMethod::Dyson => "dyson",
            SeriesMethod::HeisenbergIteration => "heisenberg_iteration",
        };
        f.write_str(name)
    }
}

/// Per-order terms of one expansion. `order_terms[0]` is the unperturbed
/// expectation; `partial_sums[m]` is the cumulative sum through order m.
#[derive(Debug, Clone)]
pub struct SeriesResult {
    pub method: SeriesMethod,
    pub order_terms: Vec<C64>,
    pub partial_sums: Vec<C64>,
    pub n_slices: usize,
    /// Max entry weight the order operators (or state corrections) put on
    /// occupation tuples at the truncation edge; a diagnostic for how much
    /// of the result leans on the artificial cutoff.
    pub leakage: f64,
    /// Set only by [`converge_series`], once inter-grid changes drop below
    /// its tolerance.
    pub converged: bool,
}

impl SeriesResult {
    pub(crate) fn from_terms(
        method: SeriesMethod,
        order_terms: Vec<C64>,
        n_slices: usize,
        leakage: f64,
    ) -> Self {
        let partial_sums = cumulative(&order_terms);
        Self { method, order_terms, partial_sums, n_slices, leakage, converged: false }
    }

    pub fn max_order(&self) -> usize {
        self.order_terms.len().saturating_sub(1)
    }

    pub fn total(&self) -> C64 {
        *self.partial_sums.last().expect("series has at least order 0")
    }
}

fn cumulative(terms: &[C64]) -> Vec<C64> {
    let mut sums = Vec::with_capacity(terms.len());
    let mut acc = C64::new(0.0, 0.0);
    for t in terms {
        acc += t;
        sums.push(acc);
    }
    sums
}

/// Slice-count policy for convergence loops.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SlicePolicy {
    #[serde(default = "default_initial_slices")]
    pub initial_slices: usize,
    #[serde(default = "default_max_slices")]
    pub max_slices: usize,
    #[serde(default = "default_slice_tolerance")]
    pub tolerance: f64,
}

fn default_initial_slices() -> usize {
    64
}

fn default_max_slices() -> usize {
    65536
}

fn default_slice_tolerance() -> f64 {
    1e-8
}

impl Default for SlicePolicy {
    fn default() -> Self {
        Self {
            initial_slices: default_initial_slices(),
            max_slices: default_max_slices(),
            tolerance: default_slice_tolerance(),
        }
    }
}

fn check_order(max_order: usize) -> Result<()> {
    if max_order == 0 {
        return Err(Error::ZeroOrder);
    }
    Ok(())
}

/// Truncation-edge weight of the summed order operators: the largest entry
/// of `W - P W P` with `P` the buffer-1 safe projector.
pub(crate) fn operator_leakage(space: &crate::hilbert::HilbertSpace, summed: &DMatrix<C64>) -> f64 {
    let p = safe_projector(space, 1);
    let pm = p.matrix();
    let sandwiched = pm * summed * pm;
    linalg::max_entry_norm(&(summed - sandwiched))
}

pub(crate) fn assert_real_terms(observable: &OperatorMatrix, terms: &[C64]) {
    if observable.is_hermitian() {
        for (m, term) in terms.iter().enumerate() {
            debug_assert!(
                term.im.abs() < ORDER_TERM_IMAG_TOL,
                "order-{m} term grew imaginary part {:.3e} for a Hermitian observable",
                term.im
            );
        }
    }
}

/// Constant-Hamiltonian expectation series: term m is
/// `(it)^m / m! <psi| [H, [H, ... [H, O]]] |psi>` with m nested brackets.
pub fn bch_series(
    hamiltonian: &OperatorMatrix,
    observable: &OperatorMatrix,
    state: &StateVector,
    t: f64,
    max_order: usize,
) -> Result<SeriesResult> {
    check_order(max_order)?;
    check_same_space(hamiltonian.space(), observable.space())?;
    check_same_space(hamiltonian.space(), state.space())?;
    if !hamiltonian.is_hermitian() {
        return Err(Error::NonHermitian {
            defect: linalg::hermitian_defect(hamiltonian.matrix()),
            tolerance: HERMITICITY_TOL,
        });
    }
    let dim = hamiltonian.space().total_dim();
    let h = hamiltonian.matrix();
    let psi = state.amplitudes();

    let mut terms = Vec::with_capacity(max_order + 1);
    let mut nested = observable.matrix().clone();
    terms.push(psi.dotc(&(&nested * psi)));

    let mut weighted_sum = DMatrix::<C64>::zeros(dim, dim);
    let mut scratch = DMatrix::<C64>::zeros(dim, dim);
    let mut coeff = C64::new(1.0, 0.0);
    for m in 1..=max_order {
        // nested <- [H, nested]
        linalg::commutator_into(h, &nested, &mut scratch);
        std::mem::swap(&mut nested, &mut scratch);
        coeff *= C64::new(0.0, t) / m as f64;
        terms.push(coeff * psi.dotc(&(&nested * psi)));
        weighted_sum.zip_apply(&nested, |w, x| *w += coeff * x);
    }
    assert_real_terms(observable, &terms);
    let leakage = operator_leakage(hamiltonian.space(), &weighted_sum);
    let mut result = SeriesResult::from_terms(SeriesMethod::Bch, terms, 0, leakage);
    result.converged = true;
    Ok(result)
}

/// Runs the latest-first slice sweep and returns the order operators
/// S_1..S_max together with the per-slice Hamiltonian check already done.
pub(crate) fn sweep_order_operators(
    spec: &HamiltonianSpec,
    observable: &OperatorMatrix,
    grid: &SliceGrid,
    max_order: usize,
) -> Result<Vec<DMatrix<C64>>> {
    check_order(max_order)?;
    check_same_space(spec.space(), observable.space())?;
    let dim = spec.space().total_dim();
    let dt_over_i = C64::new(0.0, -grid.dt());

    let mut s: Vec<DMatrix<C64>> = Vec::with_capacity(max_order + 1);
    s.push(observable.matrix().clone());
    for _ in 0..max_order {
        s.push(DMatrix::zeros(dim, dim));
    }
    let mut scratch = DMatrix::<C64>::zeros(dim, dim);

    for k in (1..=grid.n_slices()).rev() {
        let h_k = spec.evaluate_raw(grid.midpoint(k))?;
        let defect = linalg::hermitian_defect(&h_k);
        if defect >= HERMITICITY_TOL {
            return Err(Error::NonHermitian { defect, tolerance: HERMITICITY_TOL });
        }
        // Highest order first: S_m sees S_{m-1} before this slice touches it,
        // which keeps the slice times strictly ordered within each term.
        for m in (1..=max_order).rev() {
            let (head, tail) = s.split_at_mut(m);
            linalg::commutator_into(&head[m - 1], &h_k, &mut scratch);
            tail[0].zip_apply(&scratch, |acc, x| *acc += dt_over_i * x);
        }
    }
    Ok(s)
}

/// Time-dependent expectation series via the latest-first slice sweep.
/// Per-order discretization error is O(dt); compare runs at N and 2N (or
/// use [`richardson_series`]) to judge it.
pub fn nested_series_expectation(
    spec: &HamiltonianSpec,
    observable: &OperatorMatrix,
    state: &StateVector,
    grid: &SliceGrid,
    max_order: usize,
) -> Result<SeriesResult> {
    check_same_space(spec.space(), state.space())?;
    let s = sweep_order_operators(spec, observable, grid, max_order)?;
    let psi = state.amplitudes();
    let terms: Vec<C64> = s.iter().map(|op| psi.dotc(&(op * psi))).collect();
    assert_real_terms(observable, &terms);

    let dim = spec.space().total_dim();
    let mut summed = DMatrix::<C64>::zeros(dim, dim);
    for op in s.iter().skip(1) {
        summed += op;
    }
    let leakage = operator_leakage(spec.space(), &summed);
    Ok(SeriesResult::from_terms(SeriesMethod::Nested, terms, grid.n_slices(), leakage))
}

/// Operator-valued orders S_1..S_max of the Heisenberg-picture expansion of
/// the observable; `O + sum_m S_m` approximates `U' O U` with combined
/// order-truncation and slicing error.
pub fn heisenberg_expansion(
    spec: &HamiltonianSpec,
    observable: &OperatorMatrix,
    grid: &SliceGrid,
    max_order: usize,
) -> Result<Vec<OperatorMatrix>> {
    let s = sweep_order_operators(spec, observable, grid, max_order)?;
    Ok(s.into_iter()
        .skip(1)
        .map(|m| OperatorMatrix::from_raw(spec.space().clone(), m))
        .collect())
}

/// Doubles the slice count from `policy.initial_slices` until every order
/// term moves less than `policy.tolerance` between successive grids, or
/// `policy.max_slices` is reached. Non-convergence is reported through the
/// `converged` flag, not an error.
pub fn converge_series(
    spec: &HamiltonianSpec,
    observable: &OperatorMatrix,
    state: &StateVector,
    horizon: f64,
    max_order: usize,
    policy: &SlicePolicy,
) -> Result<SeriesResult> {
    let mut grid = SliceGrid::new(horizon, policy.initial_slices.max(1))?;
    let mut current = nested_series_expectation(spec, observable, state, &grid, max_order)?;
    loop {
        if grid.n_slices() * 2 > policy.max_slices {
            current.converged = false;
            return Ok(current);
        }
        grid = grid.refined();
        let next = nested_series_expectation(spec, observable, state, &grid, max_order)?;
        let worst = current
            .order_terms
            .iter()
            .zip(&next.order_terms)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        current = next;
        if worst < policy.tolerance {
            current.converged = true;
            return Ok(current);
        }
    }
}

/// First-order Richardson extrapolation of per-order terms from a grid pair
/// (N, 2N): `2 T_2N - T_N`. Cancels the O(dt) slicing error, leaving
/// O(dt^2); the standard use of the N vs 2N comparison pair.
pub fn richardson_series(coarse: &SeriesResult, fine: &SeriesResult) -> Result<SeriesResult> {
    if coarse.method != fine.method
        || coarse.order_terms.len() != fine.order_terms.len()
        || fine.n_slices != 2 * coarse.n_slices
    {
        return Err(Error::InvalidConfig(
            "richardson_series needs the same method and orders on grids N and 2N".into(),
        ));
    }
    let terms: Vec<C64> = coarse
        .order_terms
        .iter()
        .zip(&fine.order_terms)
        .map(|(c, f)| 2.0 * f - c)
        .collect();
    let mut out =
        SeriesResult::from_terms(fine.method, terms, fine.n_slices, fine.leakage);
    out.converged = fine.converged;
    Ok(out)
}

/// Entrywise `2 F - C` for operator-valued series orders on grids N and 2N.
pub fn richardson_operators(
    coarse: &[OperatorMatrix],
    fine: &[OperatorMatrix],
) -> Result<Vec<OperatorMatrix>> {
    if coarse.len() != fine.len() {
        return Err(Error::InvalidConfig(
            "richardson_operators needs matching order lists".into(),
        ));
    }
    coarse
        .iter()
        .zip(fine)
        .map(|(c, f)| f.scaled(C64::new(2.0, 0.0)).sub(c))
        .collect()
}
