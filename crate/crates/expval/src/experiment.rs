//! Experiment runner: evaluates a configured scenario with every requested
//! method, writes a machine-readable report plus a per-order CSV, and
//! hosts the self-checking suites used by the command-line tool.
//!
//! Reports are deterministic for a fixed configuration and seed — field
//! order is fixed by the structs, collections are vectors, and floats are
//! written with Rust's shortest-roundtrip formatting — except for the
//! single `timing_ms` field, which callers comparing reports should strip.

use crate::algebra::{c_number_test, closure_check, subspace_expectation};
use crate::envelope::EnvelopeSpec;
use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianSpec, HamiltonianTerm};
use crate::hilbert::{build_space, commutator, fock_state, ladder_operator, LadderKind};
use crate::oracles::{
    dyson_series_expectation, exact_expectation, exact_policy, heisenberg_iteration_series,
    order_scaling_probe, ExactExpectation,
};
use crate::scenario::{build_scenario, ScenarioConfig, ScenarioParts};
use crate::series::{
    bch_series, converge_series, nested_series_expectation, SeriesResult, SliceGrid, SlicePolicy,
};
use crate::tolerances::{CLOSURE_TOL, DYSON_ORDER_CAP};
use crate::words::{
    evaluate_words, expand_nested_commutator, nested_commutator_matrix, word_sets_disjoint,
    NestingPattern,
};
use crate::C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// Evaluation routes the runner knows how to drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Nested,
    Bch,
    Dyson,
    HeisenbergIteration,
    Subspace,
    Exact,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Method::Nested => "nested",
            Method::Bch => "bch",
            Method::Dyson => "dyson",
            Method::HeisenbergIteration => "heisenberg_iteration",
            Method::Subspace => "subspace",
            Method::Exact => "exact",
        };
        f.write_str(name)
    }
}

fn default_methods() -> Vec<Method> {
    vec![
        Method::Nested,
        Method::Bch,
        Method::Dyson,
        Method::HeisenbergIteration,
        Method::Subspace,
        Method::Exact,
    ]
}

fn default_max_order() -> usize {
    4
}

fn default_subspace_steps() -> usize {
    400
}

/// Complete description of one runner invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(default)]
    pub slices: SlicePolicy,
    #[serde(default = "default_subspace_steps")]
    pub subspace_steps: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Per-method outcome in a report. Failed methods keep their error text
/// here instead of aborting the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    /// Final value this method assigns to the observable, when it ran.
    pub value: Option<f64>,
    /// Per-order terms as [re, im] pairs; empty for scalar methods.
    pub order_terms: Vec<[f64; 2]>,
    pub partial_sums: Vec<[f64; 2]>,
    pub n_slices: usize,
    pub leakage: f64,
    pub converged: bool,
    /// |value - exact| when the exact reference was computed.
    pub residual_vs_exact: Option<f64>,
    pub error: Option<String>,
}

/// Everything a run produces, mirrored into `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub observable: String,
    pub config: ExperimentConfig,
    pub methods: Vec<MethodReport>,
    pub timing_ms: f64,
}

fn series_report(method: Method, r: &SeriesResult, exact: Option<f64>) -> MethodReport {
    let value = r.total().re;
    MethodReport {
        method: method.to_string(),
        value: Some(value),
        order_terms: r.order_terms.iter().map(|t| [t.re, t.im]).collect(),
        partial_sums: r.partial_sums.iter().map(|t| [t.re, t.im]).collect(),
        n_slices: r.n_slices,
        leakage: r.leakage,
        converged: r.converged,
        residual_vs_exact: exact.map(|e| (value - e).abs()),
        error: None,
    }
}

fn scalar_report(
    method: Method,
    value: f64,
    n_slices: usize,
    converged: bool,
    exact: Option<f64>,
) -> MethodReport {
    MethodReport {
        method: method.to_string(),
        value: Some(value),
        order_terms: vec![[value, 0.0]],
        partial_sums: vec![[value, 0.0]],
        n_slices,
        leakage: 0.0,
        converged,
        residual_vs_exact: exact.map(|e| (value - e).abs()),
        error: None,
    }
}

fn failed_report(method: Method, err: &Error) -> MethodReport {
    MethodReport {
        method: method.to_string(),
        value: None,
        order_terms: Vec::new(),
        partial_sums: Vec::new(),
        n_slices: 0,
        leakage: 0.0,
        converged: false,
        residual_vs_exact: None,
        error: Some(err.to_string()),
    }
}

/// Detects whether the assembled Hamiltonian is the same matrix across the
/// horizon, which is what the constant-drive expansion requires.
fn constant_hamiltonian(spec: &HamiltonianSpec) -> Result<bool> {
    let horizon = spec.horizon();
    let reference = spec.evaluate_raw(0.0)?;
    for frac in [0.271828, 0.5, 0.833333, 1.0] {
        let h = spec.evaluate_raw(horizon * frac)?;
        if crate::linalg::max_entry_norm(&(&h - &reference)) > 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Runs every requested method on the scenario and writes `report.json`
/// and `orders.csv` into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    let start = Instant::now();
    if config.max_order == 0 {
        return Err(Error::ZeroOrder);
    }
    let parts: ScenarioParts = build_scenario(&config.scenario)?;
    let horizon = parts.spec.horizon();

    let exact: Option<ExactExpectation> = if config.methods.contains(&Method::Exact) {
        Some(exact_expectation(
            &parts.spec,
            &parts.observable,
            &parts.initial,
            horizon,
            &exact_policy(),
        )?)
    } else {
        None
    };
    let exact_value = exact.as_ref().map(|e| e.value);

    let mut method_reports = Vec::with_capacity(config.methods.len());
    let mut nested_slices = config.slices.initial_slices.max(64);
    for &method in &config.methods {
        let report = match method {
            Method::Nested => {
                match converge_series(
                    &parts.spec,
                    &parts.observable,
                    &parts.initial,
                    horizon,
                    config.max_order,
                    &config.slices,
                ) {
                    Ok(r) => {
                        nested_slices = r.n_slices;
                        series_report(method, &r, exact_value)
                    }
                    Err(e) => failed_report(method, &e),
                }
            }
            Method::Bch => {
                let run = || -> Result<SeriesResult> {
                    if !constant_hamiltonian(&parts.spec)? {
                        return Err(Error::InvalidConfig(
                            "constant-drive expansion needs a time-independent Hamiltonian"
                                .into(),
                        ));
                    }
                    let h = parts.spec.evaluate(0.0)?;
                    bch_series(&h, &parts.observable, &parts.initial, horizon, config.max_order)
                };
                match run() {
                    Ok(r) => series_report(method, &r, exact_value),
                    Err(e) => failed_report(method, &e),
                }
            }
            Method::Dyson => {
                let order = config.max_order.min(DYSON_ORDER_CAP);
                let run = || -> Result<SeriesResult> {
                    let grid = SliceGrid::new(horizon, nested_slices)?;
                    let d = dyson_series_expectation(
                        &parts.spec,
                        &parts.observable,
                        &parts.initial,
                        &grid,
                        order,
                    )?;
                    Ok(d.to_series_result())
                };
                match run() {
                    Ok(r) => series_report(method, &r, exact_value),
                    Err(e) => failed_report(method, &e),
                }
            }
            Method::HeisenbergIteration => {
                let run = || -> Result<SeriesResult> {
                    let grid = SliceGrid::new(horizon, nested_slices)?;
                    heisenberg_iteration_series(
                        &parts.spec,
                        &parts.observable,
                        &parts.initial,
                        &grid,
                        config.max_order,
                    )
                };
                match run() {
                    Ok(r) => series_report(method, &r, exact_value),
                    Err(e) => failed_report(method, &e),
                }
            }
            Method::Subspace => {
                match subspace_expectation(
                    &parts.spec,
                    &parts.closure_basis,
                    &parts.observable,
                    &parts.initial,
                    horizon,
                    config.subspace_steps,
                ) {
                    Ok(r) => scalar_report(
                        method,
                        r.value,
                        r.n_steps,
                        true,
                        exact_value,
                    ),
                    Err(e) => failed_report(method, &e),
                }
            }
            Method::Exact => {
                let e = exact.as_ref().expect("exact computed when requested");
                scalar_report(method, e.value, e.n_slices, e.stabilized, exact_value)
            }
        };
        method_reports.push(report);
    }

    let report = RunReport {
        label: parts.spec.label().to_string(),
        observable: parts.observable_label.clone(),
        config: config.clone(),
        methods: method_reports,
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
    };

    std::fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(out_dir.join("report.json"), json + "\n")?;
    std::fs::write(out_dir.join("orders.csv"), orders_csv(&report))?;
    Ok(report)
}

/// Renders the per-order table. One row per (method, order); scalar
/// methods contribute a single order-0 row.
pub fn orders_csv(report: &RunReport) -> String {
    let exact_value = report
        .methods
        .iter()
        .find(|m| m.method == "exact")
        .and_then(|m| m.value);
    let mut out = String::from("method,order,term_real,term_imag,partial_sum,residual_vs_exact,n_slices\n");
    for m in &report.methods {
        if m.error.is_some() {
            continue;
        }
        for (order, (term, partial)) in
            m.order_terms.iter().zip(&m.partial_sums).enumerate()
        {
            let residual = exact_value
                .map(|e| format!("{}", (partial[0] - e).abs()))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                m.method, order, term[0], term[1], partial[0], residual, m.n_slices
            );
        }
    }
    out
}

/// One check inside a suite.
#[derive(Debug, Clone)]
pub struct SuiteLine {
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of a named self-check suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: String,
    pub lines: Vec<SuiteLine>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }

    /// Stable, line-oriented rendering for terminals and logs.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            let _ = writeln!(
                out,
                "{} {} — {}",
                if line.passed { "PASS" } else { "FAIL" },
                line.check,
                line.detail
            );
        }
        let _ = writeln!(
            out,
            "suite {} {}",
            self.name,
            if self.passed() { "passed" } else { "FAILED" }
        );
        out
    }
}

fn line(check: &str, passed: bool, detail: String) -> SuiteLine {
    SuiteLine { check: check.to_string(), passed, detail }
}

fn displacement_spec(g0: f64, horizon: f64) -> Result<(HamiltonianSpec, crate::hilbert::OperatorMatrix, crate::hilbert::StateVector)> {
    let space = build_space(&[6])?;
    let a = ladder_operator(&space, 0, LadderKind::Lower)?;
    let spec = HamiltonianSpec::new(
        space.clone(),
        vec![HamiltonianTerm::new(
            EnvelopeSpec::constant_complex(C64::new(0.0, -g0)),
            a.clone(),
            true,
        )],
        "displacement drive",
        horizon,
    )?;
    let x = a.add(&a.adjoint())?;
    let vac = fock_state(&space, &[0])?;
    Ok((spec, x, vac))
}

fn suite_linearity(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();

    // Superposing two drives adds their first-order responses.
    let g_a = 0.1 + 0.3 * rng.gen::<f64>();
    let g_b = 0.1 + 0.3 * rng.gen::<f64>();
    let (spec_a, x, vac) = displacement_spec(g_a, 1.0)?;
    let (spec_b, _, _) = displacement_spec(g_b, 1.0)?;
    let combined = spec_a.superpose(&spec_b)?;
    let grid = SliceGrid::new(1.0, 512)?;
    let ra = nested_series_expectation(&spec_a, &x, &vac, &grid, 2)?;
    let rb = nested_series_expectation(&spec_b, &x, &vac, &grid, 2)?;
    let rc = nested_series_expectation(&combined, &x, &vac, &grid, 2)?;
    let lhs = rc.order_terms[1];
    let rhs = ra.order_terms[1] + rb.order_terms[1];
    let rel = (lhs - rhs).norm() / rhs.norm().max(1e-300);
    lines.push(line(
        "first-order response adds under drive superposition",
        rel < 1e-10,
        format!("relative gap {rel:.3e}"),
    ));

    // The assembled Hamiltonian itself is additive, entry for entry.
    let h_sum = spec_a.evaluate_raw(0.5)? + spec_b.evaluate_raw(0.5)?;
    let h_combined = combined.evaluate_raw(0.5)?;
    let gap = crate::linalg::max_entry_norm(&(h_combined - h_sum));
    lines.push(line(
        "assembled Hamiltonians add exactly",
        gap == 0.0,
        format!("largest entry gap {gap:.3e}"),
    ));

    // Commutators are bilinear over scalars drawn from the seed.
    let space = build_space(&[4])?;
    let a_op = ladder_operator(&space, 0, LadderKind::Lower)?;
    let n_op = ladder_operator(&space, 0, LadderKind::Number)?;
    let x_op = a_op.add(&a_op.adjoint())?;
    let alpha = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
    let combo = a_op.scaled(alpha).add(&n_op)?;
    let left = commutator(&x_op, &combo)?;
    let right = commutator(&x_op, &a_op)?.scaled(alpha).add(&commutator(&x_op, &n_op)?)?;
    let bil = left.sub(&right)?.max_entry_norm();
    lines.push(line(
        "commutator is bilinear",
        bil < 1e-13,
        format!("largest entry gap {bil:.3e}"),
    ));

    Ok(SuiteReport { name: "linearity".into(), lines })
}

fn suite_scaling(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let base = 0.6 + 0.2 * rng.gen::<f64>();

    let space = build_space(&[3])?;
    let a = ladder_operator(&space, 0, LadderKind::Lower)?;
    let spec = HamiltonianSpec::new(
        space.clone(),
        vec![HamiltonianTerm::new(EnvelopeSpec::sine(base, 1.0), a, true)],
        "scaling probe drive",
        1.0,
    )?;
    let n = ladder_operator(&space, 0, LadderKind::Number)?;
    let vac = fock_state(&space, &[0])?;
    let grid = SliceGrid::new(1.0, 2048)?;
    let rows = order_scaling_probe(&spec, &n, &vac, &[1.0, 0.5], 2, &grid)?;
    for m in 1..=2 {
        let ratio = rows[0].residuals[m] / rows[1].residuals[m].max(1e-300);
        let expected = 2f64.powi(m as i32 + 1);
        // Parity can push the leading remainder one order higher; accept
        // anything at or beyond the guaranteed decay.
        let ok = ratio > expected * 0.75;
        lines.push(line(
            &format!("remainder after order {m} decays with the drive scale"),
            ok,
            format!("ratio {ratio:.2} vs guaranteed {expected:.0}"),
        ));
    }
    Ok(SuiteReport { name: "scaling".into(), lines })
}

fn suite_closure(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let g0 = 0.1 + 0.2 * rng.gen::<f64>();

    let (spec, x, _) = displacement_spec(g0, 1.0)?;
    let basis = crate::scenario::linear_basis(spec.space())?;
    let report = closure_check(&spec, &basis, &[0.0, 0.5, 1.0], 2, CLOSURE_TOL)?;
    lines.push(line(
        "ladder-and-identity basis closes to depth 2 under a displacement drive",
        report.closed,
        format!("max residual {:.3e}", report.max_residual),
    ));

    let h = spec.evaluate(0.5)?;
    let bracket = commutator(&x, &h)?.scaled(C64::new(0.0, -1.0));
    let c = c_number_test(&bracket);
    lines.push(line(
        "quadrature commutator collapses to a number",
        c.residual < 1e-10,
        format!("residual {:.3e}, scalar {:.6}", c.residual, c.scalar.re),
    ));

    let space = build_space(&[3, 3])?;
    let a0 = ladder_operator(&space, 0, LadderKind::Lower)?;
    let a1 = ladder_operator(&space, 1, LadderKind::Lower)?;
    let hop = a0.adjoint().mul(&a1)?;
    let net = HamiltonianSpec::new(
        space.clone(),
        vec![HamiltonianTerm::new(EnvelopeSpec::sine(0.4, 2.0), hop, true)],
        "modulated hopping",
        1.0,
    )?;
    let bilinear = crate::scenario::bilinear_basis(&space)?;
    let net_report = closure_check(&net, &bilinear, &[0.25, 0.75], 4, CLOSURE_TOL)?;
    lines.push(line(
        "bilinear basis closes to depth 4 under modulated hopping",
        net_report.closed,
        format!("max residual {:.3e}", net_report.max_residual),
    ));

    Ok(SuiteReport { name: "closure".into(), lines })
}

fn suite_distinctness(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();

    // Disjointness of the two shapes' word sets kicks in at three brackets
    // (four symbols); at two brackets the shapes still share words.
    let left = expand_nested_commutator(NestingPattern::LeftNested, &['O', 'A', 'B', 'C'])?;
    let right = expand_nested_commutator(NestingPattern::RightNested, &['A', 'B', 'C', 'O'])?;
    lines.push(line(
        "the two nesting shapes share no words",
        word_sets_disjoint(&left, &right),
        format!("{} words each", left.len()),
    ));

    // Numeric distinctness at order 2: evaluate both shapes on the same
    // observable with the Hamiltonian sampled at two drive times. The gap
    // is exactly [O, [H(t1), H(t2)]], so the drive must be time dependent
    // and must not commute with the rest of the Hamiltonian.
    let g0 = 0.15 + 0.1 * rng.gen::<f64>();
    let space6 = build_space(&[6])?;
    let a6 = ladder_operator(&space6, 0, LadderKind::Lower)?;
    let spec = HamiltonianSpec::new(
        space6.clone(),
        vec![HamiltonianTerm::new(EnvelopeSpec::sine(g0, 2.0), a6.clone(), true)],
        "modulated displacement drive",
        1.0,
    )?;
    let x = a6.add(&a6.adjoint())?;
    let vac = fock_state(&space6, &[0])?;
    let detuned = HamiltonianSpec::new(
        space6.clone(),
        vec![HamiltonianTerm::new(
            EnvelopeSpec::constant(0.5),
            ladder_operator(&space6, 0, LadderKind::Number)?,
            false,
        )],
        "detuning",
        1.0,
    )?;
    let combined = spec.superpose(&detuned)?;
    let h1 = combined.evaluate(0.25)?;
    let h2 = combined.evaluate(0.75)?;
    let left_op =
        nested_commutator_matrix(NestingPattern::LeftNested, &[x.clone(), h1.clone(), h2.clone()])?;
    let right_op =
        nested_commutator_matrix(NestingPattern::RightNested, &[h1.clone(), h2.clone(), x.clone()])?;
    let gap_op = left_op.sub(&right_op)?.max_entry_norm();
    let gap_exp = (crate::hilbert::expectation(&vac, &left_op)?
        - crate::hilbert::expectation(&vac, &right_op)?)
    .norm();
    lines.push(line(
        "order-2 bracket shapes differ as operators",
        gap_op > 1e-4,
        format!("largest entry gap {gap_op:.3e}"),
    ));
    lines.push(line(
        "order-2 bracket shapes are tracked by the word expansion",
        {
            let order2 = expand_nested_commutator(NestingPattern::LeftNested, &['O', 'A', 'B'])?;
            let mut assignment = std::collections::HashMap::new();
            assignment.insert('O', x.clone());
            assignment.insert('A', h1.clone());
            assignment.insert('B', h2.clone());
            let from_words = evaluate_words(&order2, &assignment)?;
            from_words.sub(&left_op)?.max_entry_norm() < 1e-12
        },
        format!("vacuum expectation gap {gap_exp:.3e}"),
    ));

    Ok(SuiteReport { name: "distinctness".into(), lines })
}

/// Runs one of the named self-check suites.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    match name {
        "linearity" => suite_linearity(seed),
        "scaling" => suite_scaling(seed),
        "closure" => suite_closure(seed),
        "distinctness" => suite_distinctness(seed),
        other => Err(Error::UnknownSuite(other.to_string())),
    }
}
