//! Time-dependent Hamiltonians assembled from enveloped operator terms.

use crate::envelope::EnvelopeSpec;
use crate::error::{Error, Result};
use crate::hilbert::{check_same_space, HilbertSpace, OperatorMatrix};
use crate::linalg;
use crate::tolerances::HERMITICITY_TOL;
use crate::C64;
use nalgebra::DMatrix;

/// One enveloped term. With `hermitize` set the term contributes
/// `g(t) op + conj(g(t)) op'`; otherwise it contributes `g(t) op` as is.
#[derive(Debug, Clone)]
pub struct HamiltonianTerm {
    pub envelope: EnvelopeSpec,
    pub operator: OperatorMatrix,
    pub hermitize: bool,
}

impl HamiltonianTerm {
    pub fn new(envelope: EnvelopeSpec, operator: OperatorMatrix, hermitize: bool) -> Self {
        Self { envelope, operator, hermitize }
    }
}

/// A sum of enveloped terms, valid on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    space: HilbertSpace,
    terms: Vec<HamiltonianTerm>,
    label: String,
    horizon: f64,
}

impl HamiltonianSpec {
    pub fn new(
        space: HilbertSpace,
        terms: Vec<HamiltonianTerm>,
        label: impl Into<String>,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::BadHorizon { horizon });
        }
        for term in &terms {
            check_same_space(&space, term.operator.space())?;
            term.envelope.validate()?;
        }
        Ok(Self { space, terms, label: label.into(), horizon })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn terms(&self) -> &[HamiltonianTerm] {
        &self.terms
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Assembles H(t). The result must be Hermitian within
    /// [`HERMITICITY_TOL`]; anything else signals a malformed term.
    pub fn evaluate(&self, t: f64) -> Result<OperatorMatrix> {
        let raw = self.evaluate_raw(t)?;
        let defect = linalg::hermitian_defect(&raw);
        if defect >= HERMITICITY_TOL {
            return Err(Error::NonHermitian { defect, tolerance: HERMITICITY_TOL });
        }
        Ok(OperatorMatrix::hermitian(self.space.clone(), raw)?)
    }

    /// Term summation without the Hermiticity gate; shared by `evaluate`
    /// and the hot slice loops (which check once up front).
    pub(crate) fn evaluate_raw(&self, t: f64) -> Result<DMatrix<C64>> {
        if t < 0.0 || t > self.horizon {
            return Err(Error::HorizonExceeded { t, horizon: self.horizon });
        }
        let n = self.space.total_dim();
        let mut acc = DMatrix::<C64>::zeros(n, n);
        for term in &self.terms {
            let g = term.envelope.eval(t);
            acc.zip_apply(term.operator.matrix(), |a, e| *a += g * e);
            if term.hermitize {
                let gc = g.conj();
                // op' applied entrywise: entry (i, j) of op' is conj(op[j, i]).
                let op = term.operator.matrix();
                for j in 0..n {
                    for i in 0..n {
                        acc[(i, j)] += gc * op[(j, i)].conj();
                    }
                }
            }
        }
        Ok(acc)
    }

    /// A copy with every envelope amplitude multiplied by `factor`. Each
    /// assembled H(t) scales by exactly the same factor, so series order
    /// terms scale as factor^m.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            space: self.space.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| HamiltonianTerm {
                    envelope: t.envelope.scaled(factor),
                    operator: t.operator.clone(),
                    hermitize: t.hermitize,
                })
                .collect(),
            label: self.label.clone(),
            horizon: self.horizon,
        }
    }

    /// Concatenates the term lists of two specs over the same space and
    /// horizon; evaluation then sums both groups' summands.
    pub fn superpose(&self, other: &Self) -> Result<Self> {
        check_same_space(&self.space, &other.space)?;
        if self.horizon != other.horizon {
            return Err(Error::InvalidScenario(format!(
                "superposed specs need a common horizon, got {} and {}",
                self.horizon, other.horizon
            )));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self {
            space: self.space.clone(),
            terms,
            label: format!("{} + {}", self.label, other.label),
            horizon: self.horizon,
        })
    }
}

/// Assembles H(t) for a spec; alias for [`HamiltonianSpec::evaluate`].
pub fn evaluate_hamiltonian(spec: &HamiltonianSpec, t: f64) -> Result<OperatorMatrix> {
    spec.evaluate(t)
}
