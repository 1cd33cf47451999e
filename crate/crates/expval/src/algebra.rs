//! Operator-algebra analysis: closure of a basis under commutation with
//! the Hamiltonian, the induced structure matrix, and the moment-flow
//! route to expectation values it enables.
//!
//! All projections here are "sandwiched": the commutator is compressed
//! with the buffer-1 safe projector before being expanded in the equally
//! compressed basis. Truncation-edge artifacts (which live exactly on the
//! states the projector removes) then cannot masquerade as closure
//! failures, while genuine failures remain visible.

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::hilbert::{
    check_same_space, hs_project, safe_projector, OperatorBasis, OperatorMatrix, StateVector,
};
use crate::linalg;
use crate::tolerances::{CLOSURE_TOL, GRAM_CONDITION_CAP, HERMITICITY_TOL};
use crate::C64;
use nalgebra::{DMatrix, DVector};

/// Precomputed sandwiched basis with its Gram factorization, so repeated
/// projections cost only inner products.
struct SandwichCache {
    projector: DMatrix<C64>,
    sandwiched: Vec<DMatrix<C64>>,
    gram_vectors: DMatrix<C64>,
    gram_values: DVector<f64>,
    condition: f64,
}

impl SandwichCache {
    fn new(basis: &OperatorBasis, buffer: usize) -> Result<Self> {
        let projector = safe_projector(basis.space(), buffer).matrix().clone();
        let sandwiched: Vec<DMatrix<C64>> = basis
            .elements()
            .iter()
            .map(|b| &projector * b.matrix() * &projector)
            .collect();
        let k = sandwiched.len();
        let mut gram = DMatrix::<C64>::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                gram[(i, j)] = linalg::hs_inner(&sandwiched[i], &sandwiched[j]);
            }
        }
        let eig = gram.symmetric_eigen();
        let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(condition < GRAM_CONDITION_CAP) {
            return Err(Error::IllConditionedBasis { condition });
        }
        Ok(Self {
            projector,
            sandwiched,
            gram_vectors: eig.eigenvectors,
            gram_values: eig.eigenvalues,
            condition,
        })
    }

    /// Sandwiches `op` and expands it in the sandwiched basis; returns the
    /// coefficients and the Hilbert-Schmidt norm left unexplained.
    fn project(&self, op: &DMatrix<C64>) -> (DVector<C64>, f64) {
        let compressed = &self.projector * op * &self.projector;
        let k = self.sandwiched.len();
        let rhs =
            DVector::from_iterator(k, self.sandwiched.iter().map(|b| linalg::hs_inner(b, &compressed)));
        let rotated = self.gram_vectors.adjoint() * rhs;
        let scaled = DVector::from_iterator(
            k,
            rotated.iter().zip(self.gram_values.iter()).map(|(p, &w)| p / w),
        );
        let coeffs = &self.gram_vectors * scaled;
        let mut rebuilt = DMatrix::<C64>::zeros(op.nrows(), op.ncols());
        for (c, b) in coeffs.iter().zip(&self.sandwiched) {
            rebuilt.zip_apply(b, |r, e| *r += c * e);
        }
        let residual = linalg::hs_norm(&(compressed - rebuilt));
        (coeffs, residual)
    }
}

/// Commutator action of the Hamiltonian on an operator basis at one time.
#[derive(Debug, Clone)]
pub struct StructureMatrix {
    /// Column alpha holds the expansion of `[B_alpha, H(t)]/i` in the basis.
    pub matrix: DMatrix<C64>,
    pub element_labels: Vec<String>,
    pub time: f64,
    /// Largest Hilbert-Schmidt norm any column's commutator left outside
    /// the basis span.
    pub max_projection_residual: f64,
    /// Condition number of the sandwiched basis Gram matrix.
    pub gram_condition: f64,
}

fn build_structure(
    spec: &HamiltonianSpec,
    basis: &OperatorBasis,
    cache: &SandwichCache,
    t: f64,
) -> Result<StructureMatrix> {
    let h = spec.evaluate_raw(t)?;
    let defect = linalg::hermitian_defect(&h);
    if defect >= HERMITICITY_TOL {
        return Err(Error::NonHermitian { defect, tolerance: HERMITICITY_TOL });
    }
    let k = basis.len();
    let dim = spec.space().total_dim();
    let mut m = DMatrix::<C64>::zeros(k, k);
    let mut scratch = DMatrix::<C64>::zeros(dim, dim);
    let mut worst = 0.0f64;
    for (alpha, b) in basis.elements().iter().enumerate() {
        linalg::commutator_into(b.matrix(), &h, &mut scratch);
        let bracket = &scratch * C64::new(0.0, -1.0);
        let (coeffs, residual) = cache.project(&bracket);
        worst = worst.max(residual);
        m.column_mut(alpha).copy_from(&coeffs);
    }
    Ok(StructureMatrix {
        matrix: m,
        element_labels: basis.element_labels.clone(),
        time: t,
        max_projection_residual: worst,
        gram_condition: cache.condition,
    })
}

/// Expands `[B_alpha, H(t)]/i` for every basis element in the (safely
/// compressed) basis itself; the resulting matrix generates the moment
/// flow used by [`subspace_expectation`].
pub fn structure_matrix(
    spec: &HamiltonianSpec,
    basis: &OperatorBasis,
    t: f64,
) -> Result<StructureMatrix> {
    check_same_space(spec.space(), basis.space())?;
    let cache = SandwichCache::new(basis, 1)?;
    build_structure(spec, basis, &cache, t)
}

/// One residual sample of a closure check.
#[derive(Debug, Clone, Copy)]
pub struct ClosureRow {
    pub time: f64,
    pub depth: usize,
    /// Worst unexplained Hilbert-Schmidt norm over all starting elements.
    pub residual: f64,
}

/// Outcome of iterating the commutator action on a basis.
#[derive(Debug, Clone)]
pub struct ClosureReport {
    pub closed: bool,
    pub max_residual: f64,
    pub rows: Vec<ClosureRow>,
    pub basis_label: String,
    pub depth: usize,
}

/// Checks whether the basis stays inside its own span under up to `depth`
/// repeated commutators with `H(t)` at each sample time. After every
/// bracket the image is re-expanded in the basis, so depth d probes the
/// d-fold iterated action; residuals report what each re-expansion could
/// not represent.
pub fn closure_check(
    spec: &HamiltonianSpec,
    basis: &OperatorBasis,
    times: &[f64],
    depth: usize,
    tolerance: f64,
) -> Result<ClosureReport> {
    check_same_space(spec.space(), basis.space())?;
    if depth == 0 {
        return Err(Error::ZeroOrder);
    }
    if times.is_empty() {
        return Err(Error::InvalidConfig("closure_check needs at least one sample time".into()));
    }
    let cache = SandwichCache::new(basis, 1)?;
    let k = basis.len();
    let dim = spec.space().total_dim();
    let mut rows = Vec::with_capacity(times.len() * depth);
    let mut max_residual = 0.0f64;

    for &t in times {
        let h = spec.evaluate_raw(t)?;
        let mut scratch = DMatrix::<C64>::zeros(dim, dim);
        // One coefficient vector per starting element, advanced in lock
        // step through the depths.
        let mut fronts: Vec<DVector<C64>> =
            (0..k).map(|alpha| DVector::from_fn(k, |i, _| if i == alpha { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })).collect();
        for d in 1..=depth {
            let mut worst = 0.0f64;
            for front in fronts.iter_mut() {
                // Assemble the current operator from full (uncompressed)
                // basis elements, bracket it, then re-expand.
                let mut current = DMatrix::<C64>::zeros(dim, dim);
                for (c, b) in front.iter().zip(basis.elements()) {
                    current.zip_apply(b.matrix(), |r, e| *r += c * e);
                }
                linalg::commutator_into(&current, &h, &mut scratch);
                let bracket = &scratch * C64::new(0.0, -1.0);
                let (coeffs, residual) = cache.project(&bracket);
                worst = worst.max(residual);
                *front = coeffs;
            }
            rows.push(ClosureRow { time: t, depth: d, residual: worst });
            max_residual = max_residual.max(worst);
        }
    }

    Ok(ClosureReport {
        closed: max_residual < tolerance,
        max_residual,
        rows,
        basis_label: basis.label.clone(),
        depth,
    })
}

/// Expectation value reconstructed from the moment flow of a closed basis.
#[derive(Debug, Clone)]
pub struct SubspaceResult {
    pub value: f64,
    /// Imaginary part discarded from the reconstructed value.
    pub imag_defect: f64,
    /// Expansion of the observable in the basis.
    pub observable_coefficients: Vec<C64>,
    /// Basis-element expectations at the end of the horizon.
    pub final_moments: Vec<C64>,
    pub n_steps: usize,
    /// Worst structure-matrix projection residual seen along the way.
    pub max_structure_residual: f64,
}

/// Integrates the closed moment system `dv/dt = M(t)^T v` with classical
/// fourth-order Runge-Kutta, where `v_alpha(t) = <B_alpha>(t)`, and reads
/// the observable off the final moments. Errors with `OutsideSpan` if the
/// observable is not a basis combination and `ClosureViolated` if any
/// structure matrix along the way leaks outside the span.
pub fn subspace_expectation(
    spec: &HamiltonianSpec,
    basis: &OperatorBasis,
    observable: &OperatorMatrix,
    state: &StateVector,
    horizon: f64,
    n_steps: usize,
) -> Result<SubspaceResult> {
    check_same_space(spec.space(), basis.space())?;
    check_same_space(spec.space(), observable.space())?;
    check_same_space(spec.space(), state.space())?;
    if n_steps == 0 {
        return Err(Error::ZeroSlices);
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::BadHorizon { horizon });
    }

    let projection = hs_project(observable, basis)?;
    if projection.residual_norm > CLOSURE_TOL {
        return Err(Error::OutsideSpan { residual: projection.residual_norm });
    }
    let coeffs = DVector::from_iterator(basis.len(), projection.coefficients.iter().copied());

    let cache = SandwichCache::new(basis, 1)?;
    let mut max_structure_residual = 0.0f64;
    let mut flow = |t: f64| -> Result<DMatrix<C64>> {
        let s = build_structure(spec, basis, &cache, t)?;
        if s.max_projection_residual > CLOSURE_TOL {
            return Err(Error::ClosureViolated {
                residual: s.max_projection_residual,
                tolerance: CLOSURE_TOL,
                time: t,
            });
        }
        max_structure_residual = max_structure_residual.max(s.max_projection_residual);
        Ok(s.matrix.transpose())
    };

    let psi = state.amplitudes();
    let mut v = DVector::from_iterator(
        basis.len(),
        basis.elements().iter().map(|b| psi.dotc(&(b.matrix() * psi))),
    );

    let h_step = horizon / n_steps as f64;
    let half = C64::new(h_step / 2.0, 0.0);
    let sixth = C64::new(h_step / 6.0, 0.0);
    let full = C64::new(h_step, 0.0);
    let two = C64::new(2.0, 0.0);
    let mut a_start = flow(0.0)?;
    for j in 0..n_steps {
        // Sample times as fractions of the horizon: j*h + h can overshoot
        // the horizon by rounding, which the evaluation guard rejects.
        let a_mid = flow(horizon * (j as f64 + 0.5) / n_steps as f64)?;
        let a_end = flow(horizon * (j as f64 + 1.0) / n_steps as f64)?;
        let k1 = &a_start * &v;
        let k2 = &a_mid * &(&v + &k1 * half);
        let k3 = &a_mid * &(&v + &k2 * half);
        let k4 = &a_end * &(&v + &k3 * full);
        v += (k1 + k2 * two + k3 * two + k4) * sixth;
        a_start = a_end;
    }

    let reconstructed: C64 = coeffs.iter().zip(v.iter()).map(|(c, m)| c * m).sum();
    Ok(SubspaceResult {
        value: reconstructed.re,
        imag_defect: reconstructed.im.abs(),
        observable_coefficients: projection.coefficients,
        final_moments: v.iter().copied().collect(),
        n_steps,
        max_structure_residual,
    })
}

/// Verdict on whether an operator acts as a plain number on the safe
/// subspace.
#[derive(Debug, Clone, Copy)]
pub struct CNumberReport {
    /// Best scalar fit on the safe subspace.
    pub scalar: C64,
    /// Largest entry of the compressed deviation from that scalar.
    pub residual: f64,
}

/// Tests whether `op`, compressed to the buffer-1 safe subspace, is a
/// multiple of the identity there. The scalar is the trace average over
/// safe states; the residual is the largest remaining matrix entry.
pub fn c_number_test(op: &OperatorMatrix) -> CNumberReport {
    let space = op.space();
    let p = safe_projector(space, 1);
    let pm = p.matrix();
    let m = op.matrix();
    let safe: Vec<usize> =
        (0..space.total_dim()).filter(|&i| pm[(i, i)].re > 0.5).collect();
    if safe.is_empty() {
        return CNumberReport { scalar: C64::new(0.0, 0.0), residual: 0.0 };
    }
    let scalar = safe.iter().map(|&i| m[(i, i)]).sum::<C64>() / safe.len() as f64;
    let mut residual = 0.0f64;
    for &i in &safe {
        for &j in &safe {
            let expected = if i == j { scalar } else { C64::new(0.0, 0.0) };
            residual = residual.max((m[(i, j)] - expected).norm());
        }
    }
    CNumberReport { scalar, residual }
}
