//! Truncated multimode bosonic Hilbert spaces and dense operators on them.
//!
//! Each mode keeps its lowest `dim` Fock levels. The product space is
//! flattened row-major with mode 0 most significant, so for dims `[3, 3]`
//! the occupation pair `(1, 2)` sits at flat index 5.

use crate::error::{Error, Result};
use crate::linalg;
use crate::tolerances::{
    DIM_CAP, EXPECTATION_IMAG_TOL, GRAM_CONDITION_CAP, HERMITICITY_TOL,
};
use crate::C64;
use nalgebra::{DMatrix, DVector};

/// A finite product of truncated single-mode Fock spaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    mode_dims: Vec<usize>,
    total_dim: usize,
}

/// Which ladder operator to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderKind {
    Lower,
    Raise,
    Number,
}

/// Dense operator tagged with its space and a Hermiticity flag.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    space: HilbertSpace,
    matrix: DMatrix<C64>,
    hermitian: bool,
}

/// Normalized state vector tagged with its space.
#[derive(Debug, Clone)]
pub struct StateVector {
    space: HilbertSpace,
    amplitudes: DVector<C64>,
}

/// A labeled list of operators used as a projection target.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    pub label: String,
    pub element_labels: Vec<String>,
    elements: Vec<OperatorMatrix>,
}

/// Result of a Hilbert-Schmidt least-squares projection.
#[derive(Debug, Clone)]
pub struct Projection {
    pub coefficients: Vec<C64>,
    pub residual_norm: f64,
    pub gram_condition: f64,
}

impl HilbertSpace {
    /// Builds a space from per-mode truncation levels, capped at
    /// [`DIM_CAP`] total dimensions.
    pub fn new(mode_dims: &[usize]) -> Result<Self> {
        Self::with_cap(mode_dims, DIM_CAP)
    }

    /// Same as [`HilbertSpace::new`] with an explicit total-dimension cap.
    pub fn with_cap(mode_dims: &[usize], cap: usize) -> Result<Self> {
        if mode_dims.is_empty() {
            return Err(Error::EmptyModeList);
        }
        if let Some(&dim) = mode_dims.iter().find(|&&d| d < 2) {
            return Err(Error::ModeDimTooSmall { dim });
        }
        let mut total: usize = 1;
        for &d in mode_dims {
            total = total
                .checked_mul(d)
                .ok_or(Error::DimensionCapExceeded { total: usize::MAX, cap })?;
        }
        if total > cap {
            return Err(Error::DimensionCapExceeded { total, cap });
        }
        Ok(Self { mode_dims: mode_dims.to_vec(), total_dim: total })
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn n_modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Flat index of an occupation tuple (mode 0 most significant).
    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        self.check_occupations(occupations)?;
        let mut idx = 0;
        for (m, &n) in occupations.iter().enumerate() {
            idx = idx * self.mode_dims[m] + n;
        }
        Ok(idx)
    }

    /// Occupation tuple at a flat index.
    pub fn occupations_of(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.n_modes()];
        for m in (0..self.n_modes()).rev() {
            occ[m] = index % self.mode_dims[m];
            index /= self.mode_dims[m];
        }
        occ
    }

    fn check_occupations(&self, occupations: &[usize]) -> Result<()> {
        if occupations.len() != self.n_modes() {
            return Err(Error::InvalidScenario(format!(
                "expected {} occupations, got {}",
                self.n_modes(),
                occupations.len()
            )));
        }
        for (mode, (&n, &d)) in occupations.iter().zip(&self.mode_dims).enumerate() {
            if n >= d {
                return Err(Error::OccupationOutOfRange { mode, occupation: n, dim: d });
            }
        }
        Ok(())
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes() {
            return Err(Error::InvalidMode { mode, n_modes: self.n_modes() });
        }
        Ok(())
    }
}

/// Builds a truncated product space; alias for [`HilbertSpace::new`].
pub fn build_space(mode_dims: &[usize]) -> Result<HilbertSpace> {
    HilbertSpace::new(mode_dims)
}

fn single_mode_ladder(dim: usize, kind: LadderKind) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    match kind {
        // a |n> = sqrt(n) |n-1>; the top level has nowhere to come from above.
        LadderKind::Lower => {
            for n in 1..dim {
                m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
            }
        }
        // a^dag |n> = sqrt(n+1) |n+1>, except the top level maps to zero.
        LadderKind::Raise => {
            for n in 0..dim - 1 {
                m[(n + 1, n)] = C64::new((n as f64 + 1.0).sqrt(), 0.0);
            }
        }
        LadderKind::Number => {
            for n in 0..dim {
                m[(n, n)] = C64::new(n as f64, 0.0);
            }
        }
    }
    m
}

/// Ladder operator for one mode, embedded in the full product space.
pub fn ladder_operator(
    space: &HilbertSpace,
    mode: usize,
    kind: LadderKind,
) -> Result<OperatorMatrix> {
    space.check_mode(mode)?;
    let mut m = DMatrix::<C64>::identity(1, 1);
    for (idx, &dim) in space.mode_dims().iter().enumerate() {
        let factor = if idx == mode {
            single_mode_ladder(dim, kind)
        } else {
            DMatrix::identity(dim, dim)
        };
        m = m.kronecker(&factor);
    }
    Ok(OperatorMatrix {
        space: space.clone(),
        hermitian: matches!(kind, LadderKind::Number),
        matrix: m,
    })
}

/// Fock basis state for an occupation tuple.
pub fn fock_state(space: &HilbertSpace, occupations: &[usize]) -> Result<StateVector> {
    let idx = space.index_of(occupations)?;
    let mut v = DVector::zeros(space.total_dim());
    v[idx] = C64::new(1.0, 0.0);
    Ok(StateVector { space: space.clone(), amplitudes: v })
}

/// Commutator `[a, b] = ab - ba`; errors on a space mismatch.
pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    check_same_space(&a.space, &b.space)?;
    let mut out = DMatrix::zeros(a.space.total_dim(), a.space.total_dim());
    linalg::commutator_into(&a.matrix, &b.matrix, &mut out);
    Ok(OperatorMatrix::from_raw(a.space.clone(), out))
}

/// `<psi| O |psi>`. For a Hermitian-flagged operator the imaginary part is
/// asserted below [`EXPECTATION_IMAG_TOL`].
pub fn expectation(state: &StateVector, op: &OperatorMatrix) -> Result<C64> {
    check_same_space(&state.space, &op.space)?;
    let value = state.amplitudes.dotc(&(&op.matrix * &state.amplitudes));
    if op.hermitian {
        debug_assert!(
            value.im.abs() < EXPECTATION_IMAG_TOL,
            "Hermitian expectation grew an imaginary part: {:.3e}",
            value.im
        );
    }
    Ok(value)
}

/// Least-squares projection of `op` onto `basis` in the Hilbert-Schmidt
/// inner product. Solved through the basis Gram matrix, whose condition
/// number is reported and capped at [`GRAM_CONDITION_CAP`].
pub fn hs_project(op: &OperatorMatrix, basis: &OperatorBasis) -> Result<Projection> {
    for b in &basis.elements {
        check_same_space(&op.space, &b.space)?;
    }
    let raw: Vec<&DMatrix<C64>> = basis.elements.iter().map(|b| &b.matrix).collect();
    project_raw(&op.matrix, &raw)
}

pub(crate) fn project_raw(op: &DMatrix<C64>, basis: &[&DMatrix<C64>]) -> Result<Projection> {
    let k = basis.len();
    if k == 0 {
        return Err(Error::EmptyBasis);
    }
    let mut gram = DMatrix::<C64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            gram[(i, j)] = linalg::hs_inner(basis[i], basis[j]);
        }
    }
    let rhs = DVector::from_iterator(k, basis.iter().map(|b| linalg::hs_inner(b, op)));
    let (coeffs, condition) = solve_gram(&gram, &rhs)?;
    let mut rebuilt = DMatrix::<C64>::zeros(op.nrows(), op.ncols());
    for (c, b) in coeffs.iter().zip(basis) {
        rebuilt.zip_apply(*b, |r, e| *r += c * e);
    }
    let residual_norm = linalg::hs_norm(&(op - rebuilt));
    Ok(Projection {
        coefficients: coeffs.iter().copied().collect(),
        residual_norm,
        gram_condition: condition,
    })
}

fn solve_gram(gram: &DMatrix<C64>, rhs: &DVector<C64>) -> Result<(DVector<C64>, f64)> {
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition < GRAM_CONDITION_CAP) {
        return Err(Error::IllConditionedBasis { condition });
    }
    let projected = eig.eigenvectors.adjoint() * rhs;
    let scaled = DVector::from_iterator(
        rhs.len(),
        projected.iter().zip(eig.eigenvalues.iter()).map(|(p, &w)| p / w),
    );
    Ok((&eig.eigenvectors * scaled, condition))
}

/// Diagonal projector onto the safe subspace: occupation tuples with every
/// mode at least `buffer` levels below its truncation edge. Sandwiching with
/// it excludes truncation-edge artifacts from residual measurements.
pub fn safe_projector(space: &HilbertSpace, buffer: usize) -> OperatorMatrix {
    let n = space.total_dim();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for idx in 0..n {
        let occ = space.occupations_of(idx);
        let safe = occ
            .iter()
            .zip(space.mode_dims())
            .all(|(&n_m, &d)| n_m + buffer < d);
        if safe {
            m[(idx, idx)] = C64::new(1.0, 0.0);
        }
    }
    OperatorMatrix { space: space.clone(), matrix: m, hermitian: true }
}

pub(crate) fn check_same_space(a: &HilbertSpace, b: &HilbertSpace) -> Result<()> {
    if a != b {
        return Err(Error::SpaceMismatch {
            left: a.mode_dims().to_vec(),
            right: b.mode_dims().to_vec(),
        });
    }
    Ok(())
}

impl OperatorMatrix {
    /// Wraps a dense matrix, auto-detecting the Hermiticity flag at
    /// [`HERMITICITY_TOL`].
    pub fn new(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != space.total_dim() || matrix.ncols() != space.total_dim() {
            return Err(Error::ShapeMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                dim: space.total_dim(),
            });
        }
        Ok(Self::from_raw(space, matrix))
    }

    /// Like [`OperatorMatrix::new`] but requires Hermiticity.
    pub fn hermitian(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let op = Self::new(space, matrix)?;
        if !op.hermitian {
            return Err(Error::NonHermitian {
                defect: linalg::hermitian_defect(&op.matrix),
                tolerance: HERMITICITY_TOL,
            });
        }
        Ok(op)
    }

    pub(crate) fn from_raw(space: HilbertSpace, matrix: DMatrix<C64>) -> Self {
        let hermitian = linalg::hermitian_defect(&matrix) < HERMITICITY_TOL;
        Self { space, matrix, hermitian }
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        let n = space.total_dim();
        Self { space: space.clone(), matrix: DMatrix::identity(n, n), hermitian: true }
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let n = space.total_dim();
        Self { space: space.clone(), matrix: DMatrix::zeros(n, n), hermitian: true }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint(), hermitian: self.hermitian }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self::from_raw(self.space.clone(), &self.matrix * factor)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_space(&self.space, &other.space)?;
        Ok(Self::from_raw(self.space.clone(), &self.matrix + &other.matrix))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_space(&self.space, &other.space)?;
        Ok(Self::from_raw(self.space.clone(), &self.matrix - &other.matrix))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_same_space(&self.space, &other.space)?;
        Ok(Self::from_raw(self.space.clone(), &self.matrix * &other.matrix))
    }

    /// `P self P` for a projector (or any operator) `P`.
    pub fn sandwich(&self, p: &Self) -> Result<Self> {
        check_same_space(&self.space, &p.space)?;
        Ok(Self::from_raw(self.space.clone(), &p.matrix * &self.matrix * &p.matrix))
    }

    pub fn max_entry_norm(&self) -> f64 {
        linalg::max_entry_norm(&self.matrix)
    }

    pub fn hs_norm(&self) -> f64 {
        linalg::hs_norm(&self.matrix)
    }

    /// Spectral norm, via the largest singular value.
    pub fn operator_norm(&self) -> f64 {
        (&self.matrix.adjoint() * &self.matrix)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(0.0, f64::max)
            .max(0.0)
            .sqrt()
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        check_same_space(&self.space, &state.space)?;
        StateVector::from_amplitudes(self.space.clone(), &self.matrix * &state.amplitudes)
    }
}

impl StateVector {
    /// Wraps and normalizes an amplitude vector; zero vectors are rejected.
    pub fn from_amplitudes(space: HilbertSpace, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(Error::ShapeMismatch {
                rows: amplitudes.len(),
                cols: 1,
                dim: space.total_dim(),
            });
        }
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNormState);
        }
        Ok(Self { space, amplitudes: amplitudes / C64::new(norm, 0.0) })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Overlap `<self|other>`.
    pub fn overlap(&self, other: &Self) -> Result<C64> {
        check_same_space(&self.space, &other.space)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }
}

impl OperatorBasis {
    pub fn new(
        label: impl Into<String>,
        element_labels: Vec<String>,
        elements: Vec<OperatorMatrix>,
    ) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::EmptyBasis);
        }
        let space = elements[0].space.clone();
        for e in &elements {
            check_same_space(&space, &e.space)?;
        }
        if element_labels.len() != elements.len() {
            return Err(Error::InvalidScenario(format!(
                "basis has {} labels for {} elements",
                element_labels.len(),
                elements.len()
            )));
        }
        Ok(Self { label: label.into(), element_labels, elements })
    }

    pub fn elements(&self) -> &[OperatorMatrix] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.elements[0].space
    }
}
