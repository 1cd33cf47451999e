//! Canonical driven-mode scenarios: classically driven emission into field
//! modes, and frequency/coupling-modulated mode networks.

use crate::envelope::{Amplitude, EnvelopeSpec};
use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianSpec, HamiltonianTerm};
use crate::hilbert::{
    build_space, fock_state, ladder_operator, HilbertSpace, LadderKind, OperatorBasis,
    OperatorMatrix, StateVector,
};
use serde::{Deserialize, Serialize};

/// Classical drive g_k(t) attached to one mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriveSpec {
    pub mode: usize,
    pub envelope: EnvelopeSpec,
}

/// Detuning envelope omega_i(t) for one mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencySpec {
    pub mode: usize,
    pub envelope: EnvelopeSpec,
}

/// Exchange coupling eps_ij(t) between two distinct modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub modes: [usize; 2],
    pub envelope: EnvelopeSpec,
}

/// Which observable the scenario reports on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObservableSelector {
    /// X = sum_k (c_k a_k + conj(c_k) a_k'); defaults to c_0 = 1.
    Quadrature {
        #[serde(default)]
        coefficients: Vec<QuadratureCoefficient>,
    },
    /// Photon number of one mode.
    ModeNumber { mode: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureCoefficient {
    pub mode: usize,
    pub amplitude: Amplitude,
}

/// Declarative scenario description; deserializable from the experiment
/// configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioConfig {
    /// H(t) = sum_k (g_k(t) a_k + conj(g_k(t)) a_k'), vacuum start unless
    /// occupations are given explicitly.
    StimulatedEmission {
        mode_dims: Vec<usize>,
        drives: Vec<DriveSpec>,
        #[serde(default)]
        initial_occupations: Option<Vec<usize>>,
        #[serde(default)]
        observable: Option<ObservableSelector>,
        horizon: f64,
    },
    /// H(t) = sum_i omega_i(t) n_i + sum_{i<j} (eps_ij(t) a_i'a_j + conj a_j'a_i),
    /// starting from a Fock state.
    ModeNetwork {
        mode_dims: Vec<usize>,
        #[serde(default)]
        frequencies: Vec<FrequencySpec>,
        couplings: Vec<CouplingSpec>,
        initial_occupations: Vec<usize>,
        #[serde(default)]
        observable: Option<ObservableSelector>,
        horizon: f64,
    },
}

/// Everything a scenario provides to the series and oracle machinery.
#[derive(Debug, Clone)]
pub struct ScenarioParts {
    pub spec: HamiltonianSpec,
    pub initial: StateVector,
    pub observable: OperatorMatrix,
    pub observable_label: String,
    pub closure_basis: OperatorBasis,
}

impl ScenarioConfig {
    pub fn horizon(&self) -> f64 {
        match self {
            ScenarioConfig::StimulatedEmission { horizon, .. } => *horizon,
            ScenarioConfig::ModeNetwork { horizon, .. } => *horizon,
        }
    }

    pub fn mode_dims(&self) -> &[usize] {
        match self {
            ScenarioConfig::StimulatedEmission { mode_dims, .. } => mode_dims,
            ScenarioConfig::ModeNetwork { mode_dims, .. } => mode_dims,
        }
    }
}

/// Builds the Hamiltonian spec, initial state, observable and closure basis
/// for a scenario.
pub fn build_scenario(config: &ScenarioConfig) -> Result<ScenarioParts> {
    match config {
        ScenarioConfig::StimulatedEmission {
            mode_dims,
            drives,
            initial_occupations,
            observable,
            horizon,
        } => {
            let space = build_space(mode_dims)?;
            if drives.is_empty() {
                return Err(Error::InvalidScenario("at least one drive is required".into()));
            }
            let mut terms = Vec::with_capacity(drives.len());
            for d in drives {
                let a = ladder_operator(&space, d.mode, LadderKind::Lower)?;
                terms.push(HamiltonianTerm::new(d.envelope.clone(), a, true));
            }
            let spec = HamiltonianSpec::new(space.clone(), terms, "stimulated emission", *horizon)?;
            let occupations = match initial_occupations {
                Some(occ) => occ.clone(),
                None => vec![0; space.n_modes()],
            };
            let initial = fock_state(&space, &occupations)?;
            let default_obs = ObservableSelector::Quadrature { coefficients: vec![] };
            let (observable, observable_label) =
                build_observable(&space, observable.as_ref().unwrap_or(&default_obs))?;
            let closure_basis = linear_basis(&space)?;
            Ok(ScenarioParts { spec, initial, observable, observable_label, closure_basis })
        }
        ScenarioConfig::ModeNetwork {
            mode_dims,
            frequencies,
            couplings,
            initial_occupations,
            observable,
            horizon,
        } => {
            let space = build_space(mode_dims)?;
            let mut terms = Vec::new();
            let mut seen_freq = vec![false; space.n_modes()];
            for f in frequencies {
                let n = ladder_operator(&space, f.mode, LadderKind::Number)?;
                if seen_freq[f.mode] {
                    return Err(Error::InvalidScenario(format!(
                        "duplicate frequency entry for mode {}",
                        f.mode
                    )));
                }
                seen_freq[f.mode] = true;
                terms.push(HamiltonianTerm::new(f.envelope.clone(), n, false));
            }
            let mut seen_pairs = std::collections::BTreeSet::new();
            for c in couplings {
                let [i, j] = c.modes;
                if i == j {
                    return Err(Error::InvalidScenario(format!(
                        "coupling must join two distinct modes, got ({i}, {j})"
                    )));
                }
                let key = (i.min(j), i.max(j));
                if !seen_pairs.insert(key) {
                    return Err(Error::InvalidScenario(format!(
                        "duplicate coupling for modes ({}, {})",
                        key.0, key.1
                    )));
                }
                let ai_dag = ladder_operator(&space, i, LadderKind::Raise)?;
                let aj = ladder_operator(&space, j, LadderKind::Lower)?;
                // Hermitized to eps a_i'a_j + conj(eps) a_j'a_i.
                terms.push(HamiltonianTerm::new(c.envelope.clone(), ai_dag.mul(&aj)?, true));
            }
            if terms.is_empty() {
                return Err(Error::InvalidScenario(
                    "mode network needs at least one frequency or coupling term".into(),
                ));
            }
            let spec = HamiltonianSpec::new(space.clone(), terms, "mode network", *horizon)?;
            let initial = fock_state(&space, initial_occupations)?;
            let default_obs = ObservableSelector::ModeNumber { mode: 1.min(space.n_modes() - 1) };
            let (observable, observable_label) =
                build_observable(&space, observable.as_ref().unwrap_or(&default_obs))?;
            let closure_basis = bilinear_basis(&space)?;
            Ok(ScenarioParts { spec, initial, observable, observable_label, closure_basis })
        }
    }
}

fn build_observable(
    space: &HilbertSpace,
    selector: &ObservableSelector,
) -> Result<(OperatorMatrix, String)> {
    match selector {
        ObservableSelector::Quadrature { coefficients } => {
            let coeffs: Vec<QuadratureCoefficient> = if coefficients.is_empty() {
                vec![QuadratureCoefficient { mode: 0, amplitude: 1.0.into() }]
            } else {
                coefficients.clone()
            };
            let mut op = OperatorMatrix::zeros(space);
            let mut label_parts = Vec::new();
            for c in &coeffs {
                let a = ladder_operator(space, c.mode, LadderKind::Lower)?;
                let z = c.amplitude.value();
                op = op.add(&a.scaled(z))?.add(&a.adjoint().scaled(z.conj()))?;
                label_parts.push(format!("mode {}", c.mode));
            }
            Ok((op, format!("quadrature X ({})", label_parts.join(", "))))
        }
        ObservableSelector::ModeNumber { mode } => {
            let n = ladder_operator(space, *mode, LadderKind::Number)?;
            Ok((n, format!("photon number n_{mode}")))
        }
    }
}

/// {a_k, a_k', identity}: the span that closes under commutation with any
/// linear-drive Hamiltonian.
pub fn linear_basis(space: &HilbertSpace) -> Result<OperatorBasis> {
    let mut labels = Vec::new();
    let mut elements = Vec::new();
    for m in 0..space.n_modes() {
        labels.push(format!("a{m}"));
        elements.push(ladder_operator(space, m, LadderKind::Lower)?);
    }
    for m in 0..space.n_modes() {
        labels.push(format!("a{m}^dag"));
        elements.push(ladder_operator(space, m, LadderKind::Raise)?);
    }
    labels.push("identity".into());
    elements.push(OperatorMatrix::identity(space));
    OperatorBasis::new("linear ladder basis", labels, elements)
}

/// {a_i'a_j for all i, j} plus identity: closes under commutation with any
/// bilinear (number-conserving) Hamiltonian.
pub fn bilinear_basis(space: &HilbertSpace) -> Result<OperatorBasis> {
    let mut labels = Vec::new();
    let mut elements = Vec::new();
    for i in 0..space.n_modes() {
        let ai_dag = ladder_operator(space, i, LadderKind::Raise)?;
        for j in 0..space.n_modes() {
            let aj = ladder_operator(space, j, LadderKind::Lower)?;
            labels.push(format!("a{i}^dag a{j}"));
            elements.push(ai_dag.mul(&aj)?);
        }
    }
    labels.push("identity".into());
    elements.push(OperatorMatrix::identity(space));
    OperatorBasis::new("bilinear basis", labels, elements)
}
