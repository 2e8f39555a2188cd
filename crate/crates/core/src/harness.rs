//! End-to-end pipeline: single solves, health sweeps and oracle
//! comparison, plus the CSV rendering of sweep results.

use hfopf_conic::{check_certificate, solve, CertificateReport, ConicSolution, SolverSettings};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::HfopfError;
use crate::formulation::{assemble, Formulation};
use crate::health::{FaultTables, HealthLimits, HealthProfile, MappingMode};
use crate::network::{Network, SourceRef};
use crate::oracle::{oracle_dispatch, OracleResult, OracleSettings};
use crate::recovery::{interpret, DispatchResult, DispatchStatus, RecoveryOptions};

/// CSV schema tag written on the first line of every sweep file.
pub const CSV_SCHEMA: &str = "v1";
pub const CSV_COLUMNS: [&str; 11] = [
    "hci",
    "mode",
    "sf",
    "status",
    "cost_total",
    "relative_cost_change",
    "exactness_ratio",
    "p_g1",
    "p_g2",
    "p_bess",
    "solver_iterations",
];

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub solver: SolverSettings,
    pub recovery: RecoveryOptions,
    pub tables: FaultTables,
}

/// Everything produced by one solve.
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub limits: HealthLimits,
    pub formulation: Formulation,
    pub solution: ConicSolution,
    pub dispatch: DispatchResult,
    /// Independent re-check of the solver's claim (optimality or
    /// infeasibility certificate).
    pub certificate: CertificateReport,
}

pub fn solve_case(
    network: &Network,
    profiles: &[HealthProfile],
    load_scale: f64,
    options: &SolveOptions,
) -> Result<CaseOutcome, HfopfError> {
    if !(load_scale > 0.0 && load_scale.is_finite()) {
        return Err(HfopfError::Request(format!("load scale must be positive, got {load_scale}")));
    }
    let limits = HealthLimits::compute(network, profiles, &options.tables)?;
    let formulation = assemble(network, &limits, load_scale);
    let solution = solve(&formulation.problem, &options.solver)?;
    let dispatch = interpret(&formulation, network, &limits, &solution, options.recovery);
    let certificate = check_certificate(&formulation.problem, &solution);
    Ok(CaseOutcome { limits, formulation, solution, dispatch, certificate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DerateMode {
    #[serde(rename = "P_ONLY")]
    POnly,
    #[serde(rename = "P_AND_V")]
    PAndV,
}

impl DerateMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DerateMode::POnly => "P_ONLY",
            DerateMode::PAndV => "P_AND_V",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "P_ONLY" | "P" => Some(DerateMode::POnly),
            "P_AND_V" | "PV" => Some(DerateMode::PAndV),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub target: SourceRef,
    pub hci_values: Vec<f64>,
    pub modes: Vec<DerateMode>,
    pub load_scales: Vec<f64>,
    pub mapping_mode: MappingMode,
}

/// `1.00, 0.95, ..., 0.50`.
pub fn default_generator_hcis() -> Vec<f64> {
    (0..=10).map(|i| (100 - 5 * i) as f64 / 100.0).collect()
}

/// Battery grid covering every battery fault-table knot from healthy (0.9) to 0.
pub fn default_battery_hcis() -> Vec<f64> {
    vec![1.0, 0.9, 0.81, 0.7, 0.6, 0.53, 0.4, 0.3, 0.2, 0.1, 0.0]
}

impl SweepSpec {
    pub fn generator(target: SourceRef) -> Self {
        Self {
            target,
            hci_values: default_generator_hcis(),
            modes: vec![DerateMode::POnly, DerateMode::PAndV],
            load_scales: vec![1.0],
            mapping_mode: MappingMode::Linear,
        }
    }

    pub fn battery(target: SourceRef) -> Self {
        Self { hci_values: default_battery_hcis(), modes: vec![DerateMode::POnly], ..Self::generator(target) }
    }

    pub fn validate(&self, network: &Network) -> Result<(), HfopfError> {
        let bad = |m: String| Err(HfopfError::Request(m));
        if !network.has_source(self.target) {
            return bad(format!("no equipment {} in the case", self.target));
        }
        if self.hci_values.is_empty() || self.modes.is_empty() || self.load_scales.is_empty() {
            return bad("sweep needs at least one hci, mode and load scale".into());
        }
        if self.hci_values.iter().any(|h| !(0.0..=1.0).contains(h)) {
            return bad("hci values must lie in [0, 1]".into());
        }
        if self.hci_values.windows(2).any(|w| w[1] >= w[0]) {
            return bad("hci values must be strictly decreasing".into());
        }
        if self.load_scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("load scales must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub hci: f64,
    pub mode: DerateMode,
    pub sf: f64,
    pub status: DispatchStatus,
    pub cost_total: Option<f64>,
    pub relative_cost_change: Option<f64>,
    pub exactness_ratio: Option<f64>,
    pub p_g1: Option<f64>,
    pub p_g2: Option<f64>,
    pub p_bess: Option<f64>,
    pub solver_iterations: usize,
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, HfopfError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w.max(1));
    }
    b.build().map_err(|e| HfopfError::Request(format!("cannot start worker pool: {e}")))
}

/// Solves every `(sf, mode, hci)` point of the sweep plus one all-healthy
/// baseline per `sf`. Rows come out ordered by load scale, then mode, then
/// hci in `spec` order, whatever the worker count.
pub fn run_sweep(
    network: &Network,
    spec: &SweepSpec,
    options: &SolveOptions,
    workers: Option<usize>,
) -> Result<Vec<SweepRow>, HfopfError> {
    spec.validate(network)?;
    let mut jobs: Vec<(f64, Option<(DerateMode, f64)>)> = Vec::new();
    for &sf in &spec.load_scales {
        jobs.push((sf, None));
        for &mode in &spec.modes {
            for &h in &spec.hci_values {
                jobs.push((sf, Some((mode, h))));
            }
        }
    }
    let results: Vec<Result<DispatchResult, HfopfError>> = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(sf, point)| {
                let profiles: Vec<HealthProfile> = point
                    .map(|(mode, h)| HealthProfile::new(spec.target, h, spec.mapping_mode, mode == DerateMode::PAndV))
                    .into_iter()
                    .collect();
                solve_case(network, &profiles, sf, options).map(|o| o.dispatch)
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut baseline: Option<f64> = None;
    for ((sf, point), result) in jobs.into_iter().zip(results) {
        let d = result?;
        let cost = d.cost_total.filter(|_| d.status.has_cost());
        let Some((mode, hci)) = point else {
            baseline = cost;
            continue;
        };
        let relative = match (cost, baseline) {
            (Some(c), Some(b)) if b != 0.0 => Some((c - b) / b),
            _ => None,
        };
        let pick = |v: &Vec<f64>, i: usize| if d.status.has_cost() { v.get(i).copied() } else { None };
        rows.push(SweepRow {
            hci,
            mode,
            sf,
            status: d.status,
            cost_total: cost,
            relative_cost_change: relative,
            exactness_ratio: d.exactness_ratio,
            p_g1: pick(&d.p_gen, 0),
            p_g2: pick(&d.p_gen, 1),
            p_bess: pick(&d.bess_power, 0),
            solver_iterations: d.iterations,
        });
    }
    Ok(rows)
}

fn fixed(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9}")).unwrap_or_default()
}

/// Renders sweep rows as CSV: a `schema,v1` line, the column header, then
/// one line per row. Missing values are empty fields.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    w.write_record(["schema", CSV_SCHEMA]).expect("in-memory write");
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record([
            format!("{}", r.hci),
            r.mode.as_str().to_string(),
            format!("{}", r.sf),
            r.status.as_str().to_string(),
            fixed(r.cost_total),
            fixed(r.relative_cost_change),
            r.exactness_ratio.map(|x| format!("{x:.3e}")).unwrap_or_default(),
            fixed(r.p_g1),
            fixed(r.p_g2),
            fixed(r.p_bess),
            r.solver_iterations.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// Both feasible; oracle cost within the grid bound above the SDP cost.
    Agree,
    BothInfeasible,
    /// SDP not rank one; its cost is only a lower bound and sits below the oracle.
    BoundOnly,
    /// SDP feasible but no grid point passed; the grid is too coarse to say more.
    OracleEmpty,
    /// Sound but the oracle sits further above the SDP than the grid bound.
    Loose,
    /// A soundness violation: SDP above the oracle, or SDP infeasible while
    /// the oracle found a feasible point.
    Disagree,
    SolverFailure,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Agree => "AGREE",
            Verdict::BothInfeasible => "BOTH_INFEASIBLE",
            Verdict::BoundOnly => "BOUND_ONLY",
            Verdict::OracleEmpty => "ORACLE_EMPTY",
            Verdict::Loose => "LOOSE",
            Verdict::Disagree => "DISAGREE",
            Verdict::SolverFailure => "SOLVER_FAILURE",
        }
    }

    pub fn is_sound(&self) -> bool {
        !matches!(self, Verdict::Disagree | Verdict::SolverFailure)
    }
}

/// Slack in the SDP-below-oracle comparison.
pub const SOUNDNESS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub sdp_status: DispatchStatus,
    pub sdp_cost: Option<f64>,
    pub oracle: OracleResult,
    /// `oracle - sdp` when both have a cost.
    pub gap: Option<f64>,
    pub verdict: Verdict,
}

pub fn compare(dispatch: &DispatchResult, oracle: OracleResult) -> ValidationReport {
    let sdp_cost = dispatch.cost_total.filter(|_| dispatch.status.has_cost());
    let gap = match (sdp_cost, oracle.best_cost) {
        (Some(s), Some(o)) => Some(o - s),
        _ => None,
    };
    let verdict = match dispatch.status {
        DispatchStatus::SolverFailure => Verdict::SolverFailure,
        DispatchStatus::Infeasible if oracle.feasible_count == 0 => Verdict::BothInfeasible,
        DispatchStatus::Infeasible => Verdict::Disagree,
        _ if oracle.feasible_count == 0 => Verdict::OracleEmpty,
        status => {
            let g = gap.expect("both sides have a cost");
            let bound = oracle.cell_cost_bound.unwrap_or(0.0);
            if g < -SOUNDNESS_TOL {
                Verdict::Disagree
            } else if status == DispatchStatus::Inexact {
                Verdict::BoundOnly
            } else if g <= bound + SOUNDNESS_TOL {
                Verdict::Agree
            } else {
                Verdict::Loose
            }
        }
    };
    ValidationReport { sdp_status: dispatch.status, sdp_cost, oracle, gap, verdict }
}

/// Runs the relaxation and the grid oracle on the same case.
pub fn validate_case(
    network: &Network,
    profiles: &[HealthProfile],
    load_scale: f64,
    options: &SolveOptions,
    oracle: &OracleSettings,
) -> Result<ValidationReport, HfopfError> {
    let outcome = solve_case(network, profiles, load_scale, options)?;
    let result = oracle_dispatch(network, &outcome.limits, oracle, load_scale)?;
    Ok(compare(&outcome.dispatch, result))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_hci_grid() {
        let h = default_generator_hcis();
        assert_eq!(h.len(), 11);
        assert_eq!(h[0], 1.0);
        assert_eq!(h[1], 0.95);
        assert_eq!(h[10], 0.5);
    }

    #[test]
    fn spec_validation() {
        let net = crate::network::mg3();
        let mut s = SweepSpec::generator(SourceRef::Generator(1));
        assert!(s.validate(&net).is_ok());
        s.hci_values = vec![0.5, 0.6];
        assert!(s.validate(&net).is_err());
        let mut s = SweepSpec::generator(SourceRef::Generator(5));
        assert!(s.validate(&net).is_err());
        s.target = SourceRef::Bess(0);
        s.load_scales = vec![0.0];
        assert!(s.validate(&net).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![SweepRow {
            hci: 0.95,
            mode: DerateMode::PAndV,
            sf: 1.1,
            status: DispatchStatus::Infeasible,
            cost_total: None,
            relative_cost_change: None,
            exactness_ratio: None,
            p_g1: None,
            p_g2: None,
            p_bess: None,
            solver_iterations: 12,
        }];
        let text = rows_to_csv(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "schema,v1");
        assert_eq!(lines[1], CSV_COLUMNS.join(","));
        assert_eq!(lines[2], "0.95,P_AND_V,1.1,INFEASIBLE,,,,,,,12");
    }

    #[test]
    fn mode_names() {
        for m in [DerateMode::POnly, DerateMode::PAndV] {
            assert_eq!(DerateMode::parse(m.as_str()), Some(m));
        }
        assert_eq!(DerateMode::parse("p-and-v"), Some(DerateMode::PAndV));
        assert_eq!(DerateMode::parse("v"), None);
    }
}
