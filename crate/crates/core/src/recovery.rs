//! Voltage and dispatch recovery from the relaxed optimum, plus a
//! nonlinear re-check of every original constraint.

use hfopf_conic::{ConicSolution, SolveStatus};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::RecoveryError;
use crate::formulation::Formulation;
use crate::health::HealthLimits;
use crate::network::{branch_flow, complex_injection, Network, SourceRef};

/// Default rank-one threshold on `lambda2 / lambda1`.
pub const RANK1_TOL: f64 = 1e-5;
/// Default tolerance of the nonlinear re-check (per unit).
pub const VERIFY_TOL: f64 = 1e-6;
/// Largest eigenvalue below which W is treated as all-zero.
const DEGENERATE: f64 = 1e-12;

fn sorted_eigen(w: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(w.clone());
    let mut order: Vec<usize> = (0..w.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(w.nrows(), w.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `lambda2 / lambda1` of a PSD matrix; 0 for rank one or all-zero W.
pub fn exactness(w: &DMatrix<f64>) -> f64 {
    let (vals, _) = sorted_eigen(w);
    match vals.as_slice() {
        [] | [_] => 0.0,
        [l1, l2, ..] if *l1 > DEGENERATE => (l2 / l1).max(0.0),
        _ => 0.0,
    }
}

/// Complex voltages from a rank-one `W` (size 2n), rotated so the
/// reference bus has angle 0.
pub fn recover_voltages(
    w: &DMatrix<f64>,
    reference_bus: usize,
    rank1_tol: f64,
) -> Result<Vec<Complex64>, RecoveryError> {
    let dim = w.nrows();
    if !dim.is_multiple_of(2) || w.ncols() != dim {
        return Err(RecoveryError::Dimension(dim));
    }
    let n = dim / 2;
    let ratio = exactness(w);
    if ratio > rank1_tol {
        return Err(RecoveryError::Inexact { ratio });
    }
    let (vals, vecs) = sorted_eigen(w);
    if vals[0] <= DEGENERATE {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }
    let s = vals[0].sqrt();
    let v: Vec<Complex64> = (0..n).map(|k| Complex64::new(s * vecs[(k, 0)], s * vecs[(n + k, 0)])).collect();
    let r = v[reference_bus];
    let rot = if r.norm() > 0.0 { r.conj() / r.norm() } else { Complex64::new(1.0, 0.0) };
    Ok(v.into_iter().map(|x| x * rot).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DispatchStatus {
    Exact,
    Inexact,
    Infeasible,
    SolverFailure,
}

impl DispatchStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            DispatchStatus::Exact => "EXACT",
            DispatchStatus::Inexact => "INEXACT",
            DispatchStatus::Infeasible => "INFEASIBLE",
            DispatchStatus::SolverFailure => "SOLVER_FAILURE",
        }
    }

    pub fn has_cost(&self) -> bool {
        matches!(self, DispatchStatus::Exact | DispatchStatus::Inexact)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Margin {
    pub label: String,
    /// Distance to the limit; negative when violated.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DispatchResult {
    pub status: DispatchStatus,
    pub solver_status: SolveStatus,
    pub load_scale: f64,
    pub voltages: Option<Vec<Complex64>>,
    /// Per generator.
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    /// Per BESS, positive when discharging.
    pub bess_power: Vec<f64>,
    pub bess_q: Vec<f64>,
    /// Sum of source costs for EXACT, the relaxation bound for INEXACT.
    pub cost_total: Option<f64>,
    pub objective: Option<f64>,
    pub exactness_ratio: Option<f64>,
    pub balance_residual: Option<f64>,
    pub limit_margins: Vec<Margin>,
    pub iterations: usize,
}

impl DispatchResult {
    pub fn source_power(&self, s: SourceRef) -> (f64, f64) {
        match s {
            SourceRef::Generator(i) => (self.p_gen[i], self.q_gen[i]),
            SourceRef::Bess(i) => (self.bess_power[i], self.bess_q[i]),
        }
    }

    /// `sum C(P)` over all sources at the reported setpoints.
    pub fn recomputed_cost(&self, network: &Network) -> f64 {
        network.sources().iter().map(|&s| network.source_cost(s).eval(self.source_power(s).0)).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RecoveryOptions {
    pub rank1_tol: f64,
    pub verify_tol: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self { rank1_tol: RANK1_TOL, verify_tol: VERIFY_TOL }
    }
}

/// Turns a solver result into a dispatch: injections from the lifted
/// traces, voltages when W is rank one, then a nonlinear re-check.
pub fn interpret(
    formulation: &Formulation,
    network: &Network,
    limits: &HealthLimits,
    solution: &ConicSolution,
    options: RecoveryOptions,
) -> DispatchResult {
    let sf = formulation.load_scale;
    let mut result = DispatchResult {
        status: DispatchStatus::SolverFailure,
        solver_status: solution.status,
        load_scale: sf,
        voltages: None,
        p_gen: vec![],
        q_gen: vec![],
        bess_power: vec![],
        bess_q: vec![],
        cost_total: None,
        objective: None,
        exactness_ratio: None,
        balance_residual: None,
        limit_margins: vec![],
        iterations: solution.iterations,
    };
    match solution.status {
        SolveStatus::Optimal => {}
        SolveStatus::PrimalInfeasible => {
            result.status = DispatchStatus::Infeasible;
            return result;
        }
        _ => return result,
    }
    let w = formulation.full_w(&solution.primal_blocks);
    let trace = |a: &DMatrix<f64>| a.component_mul(&w).sum();
    let injection = |s: SourceRef| {
        let k = network.source_bus(s);
        let m = &formulation.bus_mats[k];
        let bus = &network.buses[k];
        (trace(&m.yk) + sf * bus.p_load, trace(&m.ybar_k) + sf * bus.q_load)
    };
    for i in 0..network.generators.len() {
        let (p, q) = injection(SourceRef::Generator(i));
        result.p_gen.push(p);
        result.q_gen.push(q);
    }
    for i in 0..network.bess_units.len() {
        let (p, q) = injection(SourceRef::Bess(i));
        result.bess_power.push(p);
        result.bess_q.push(q);
    }
    result.objective = Some(solution.objective_primal);
    let ratio = exactness(&w);
    result.exactness_ratio = Some(ratio);
    result.status = DispatchStatus::Inexact;
    result.cost_total = Some(solution.objective_primal);
    if let Ok(v) = recover_voltages(&w, network.reference_bus, options.rank1_tol) {
        result.voltages = Some(v);
        let report = verify(network, limits, &result);
        result.balance_residual = Some(report.balance_residual);
        result.limit_margins = report.margins.clone();
        if report.passed(options.verify_tol) {
            result.status = DispatchStatus::Exact;
            result.cost_total = Some(result.recomputed_cost(network));
        } else {
            result.voltages = None;
        }
    }
    result
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyViolation {
    pub family: String,
    pub worst: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub balance_residual: f64,
    pub families: Vec<FamilyViolation>,
    pub margins: Vec<Margin>,
}

impl VerifyReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.balance_residual <= tol && self.families.iter().all(|f| f.worst <= tol)
    }
}

/// Re-evaluates power balance and every operating limit at the recovered
/// voltages using complex arithmetic only.
///
/// # Panics
/// If `result` carries no voltages.
pub fn verify(network: &Network, limits: &HealthLimits, result: &DispatchResult) -> VerifyReport {
    let v = result.voltages.as_ref().expect("verify needs recovered voltages");
    let sf = result.load_scale;
    let s_bus = complex_injection(network, v);
    let source_at = network.source_at_bus();
    let mut margins = Vec::new();
    let mut families: Vec<FamilyViolation> = ["voltage band", "source P", "source Q", "branch flow"]
        .iter()
        .map(|f| FamilyViolation { family: f.to_string(), worst: 0.0 })
        .collect();
    let mut record = |fam: usize, label: String, margin: f64| {
        families[fam].worst = families[fam].worst.max(-margin);
        margins.push(Margin { label, margin });
    };
    let mut balance: f64 = 0.0;
    for (k, bus) in network.buses.iter().enumerate() {
        let mut gen = Complex64::new(0.0, 0.0);
        if let Some(s) = source_at[k] {
            let (p, q) = result.source_power(s);
            gen = Complex64::new(p, q);
            let b = limits.source_bounds(network, s);
            record(1, format!("{s} P >= {:.6}", b.p_lo), p - b.p_lo);
            record(1, format!("{s} P <= {:.6}", b.p_hi), b.p_hi - p);
            record(2, format!("{s} Q >= {:.6}", b.q_lo), q - b.q_lo);
            record(2, format!("{s} Q <= {:.6}", b.q_hi), b.q_hi - q);
        }
        let net = gen - Complex64::new(bus.p_load, bus.q_load) * sf;
        balance = balance.max((s_bus[k] - net).norm());
        let (lo, hi) = limits.bus_voltage_band(network, k);
        let vm = v[k].norm();
        record(0, format!("bus{} |V| >= {lo:.6}", k + 1), vm - lo);
        record(0, format!("bus{} |V| <= {hi:.6}", k + 1), hi - vm);
    }
    for br in &network.branches {
        let y = br.series_admittance();
        for (k, l) in [(br.from_bus, br.to_bus), (br.to_bus, br.from_bus)] {
            let f = branch_flow(y, v[k], v[l]).norm();
            record(3, format!("flow {}->{} <= {:.6}", k + 1, l + 1, br.s_max), br.s_max - f);
        }
    }
    VerifyReport { balance_residual: balance, families, margins }
}
