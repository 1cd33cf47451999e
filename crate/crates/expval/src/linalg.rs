//! Dense complex-matrix helpers shared across the crate.

use crate::C64;
use nalgebra::{DMatrix, DVector};

/// Largest entrywise deviation from Hermiticity, `max |M - M'|`.
pub fn hermitian_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Largest entry magnitude.
pub fn max_entry_norm(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frobenius (Hilbert-Schmidt) norm.
pub fn hs_norm(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hilbert-Schmidt inner product `tr(a' b)`.
pub fn hs_inner(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `out = a b - b a` computed with one scratch buffer and no allocation.
pub fn commutator_into(
    a: &DMatrix<C64>,
    b: &DMatrix<C64>,
    out: &mut DMatrix<C64>,
) {
    out.gemm(C64::new(1.0, 0.0), a, b, C64::new(0.0, 0.0));
    out.gemm(C64::new(-1.0, 0.0), b, a, C64::new(1.0, 0.0));
}

/// `exp(scale * i * H)` for Hermitian `H`.
///
/// Uses the eigendecomposition phase form, which is unitary to roundoff
/// because the eigenvector matrix is. The QL iteration can misconverge
/// on clustered spectra (returning an orthonormal basis that does not
/// diagonalize `H`), so the factorization is verified by residual and a
/// scaling-and-squaring Taylor evaluation takes over when it fails.
pub fn hermitian_phase_exp(h: &DMatrix<C64>, scale: f64) -> DMatrix<C64> {
    let eig = h.clone().symmetric_eigen();
    let mut residual = h * &eig.eigenvectors;
    for (j, mut col) in residual.column_iter_mut().enumerate() {
        let w = eig.eigenvalues[j];
        col.zip_apply(&eig.eigenvectors.column(j), |r, v| *r -= C64::new(w, 0.0) * v);
    }
    if max_entry_norm(&residual) > 1e-10 * max_entry_norm(h).max(1.0) {
        return phase_exp_taylor(h, scale);
    }
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&w| C64::from_polar(1.0, scale * w)),
    );
    let mut scaled = eig.eigenvectors.clone();
    for (mut col, p) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= *p;
    }
    &scaled * eig.eigenvectors.adjoint()
}

/// `exp(scale * i * H)` as a Taylor sum of the anti-Hermitian generator
/// with scaling and squaring; independent of any eigendecomposition.
pub(crate) fn phase_exp_taylor(h: &DMatrix<C64>, scale: f64) -> DMatrix<C64> {
    let n = h.nrows();
    let a = h * C64::new(0.0, scale);
    // 1-norm upper bound on the spectral norm picks the squaring count.
    let mut norm = 0.0f64;
    for j in 0..n {
        norm = norm.max(a.column(j).iter().map(|z| z.norm()).sum());
    }
    let squarings =
        if norm > 1.0 / 32.0 { (norm * 32.0).log2().ceil() as i32 } else { 0 };
    let b = &a * C64::new(2.0f64.powi(-squarings), 0.0);
    // ||b|| <= 1/32, so 16 terms leave truncation far below roundoff.
    let mut term = DMatrix::<C64>::identity(n, n);
    let mut sum = DMatrix::<C64>::identity(n, n);
    for k in 1..=16 {
        term = (&term * &b) * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Deviation of `U` from unitarity, `max |U'U - 1|`.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let mut g = u.adjoint() * u;
    for i in 0..g.nrows() {
        g[(i, i)] -= C64::new(1.0, 0.0);
    }
    max_entry_norm(&g)
}
