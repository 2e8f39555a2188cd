//! `hfopf`: solve, sweep and cross-check health-focused OPF cases.
//!
//! Exit codes: 0 exact optimum (or a completed sweep / sound validation),
//! 1 unsound validation verdict, 2 infeasible, 3 inexact relaxation,
//! 4 solver failure, 64 usage error, 65 invalid input data, 69 oracle
//! refusal, 74 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hfopf::harness::{
    rows_to_csv, run_sweep, solve_case, validate_case, CaseOutcome, DerateMode, SolveOptions, SweepSpec,
    ValidationReport,
};
use hfopf::health::{FaultTables, HealthProfile, MappingMode};
use hfopf::network::{load_case, Network, SourceRef};
use hfopf::oracle::{OracleError, OracleSettings};
use hfopf::recovery::{DispatchResult, DispatchStatus};
use hfopf::{CaseError, HfopfError};

const EXIT_UNSOUND: u8 = 1;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_REFUSED: u8 = 69;
const EXIT_IO: u8 = 74;

/// Environment variable naming a JSON file with replacement fault tables.
const TABLE_ENV: &str = "HFOPF_TABLE_PATH";

#[derive(Parser, Debug)]
#[command(name = "hfopf", version, about = "Health-focused optimal power flow via SDP relaxation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one case and print the dispatch.
    Solve(SolveArgs),
    /// Sweep a generator's health index and report relative cost change.
    Sweep(SweepArgs),
    /// Sweep a battery's health index.
    BatterySweep(SweepArgs),
    /// Compare the relaxation against the power-flow grid oracle.
    Validate(ValidateArgs),
    /// Write the assembled conic problem as JSON.
    DumpProblem(SolveArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mapping {
    Linear,
    Table,
}

impl From<Mapping> for MappingMode {
    fn from(m: Mapping) -> Self {
        match m {
            Mapping::Linear => MappingMode::Linear,
            Mapping::Table => MappingMode::Table,
        }
    }
}

#[derive(Args, Debug)]
struct Common {
    /// Case file (JSON).
    #[arg(long, value_name = "PATH")]
    case: Option<PathBuf>,
    /// Case file given positionally.
    #[arg(value_name = "CASE", conflicts_with = "case")]
    case_pos: Option<PathBuf>,
    /// Health-to-limit mapping.
    #[arg(long, value_enum)]
    mode: Option<Mapping>,
    /// Relative duality-gap tolerance for the SDP solver.
    #[arg(long, value_name = "TOL")]
    tol_gap: Option<f64>,
    /// Largest lambda2/lambda1 still accepted as rank one.
    #[arg(long, value_name = "TOL")]
    rank1_tol: Option<f64>,
    /// Solver iteration log and certificate details on stderr.
    #[arg(long)]
    verbose: bool,
    /// Machine-readable JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Write the main output to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Health assignment such as `G2=0.65` (repeatable).
    #[arg(long = "hci", value_name = "ID=VALUE")]
    hci: Vec<String>,
    /// Also derate the voltage band at each assigned source's bus.
    #[arg(long)]
    derate_voltage: bool,
    /// Load scaling factor.
    #[arg(long, value_name = "SF", default_value = "1.0")]
    sf: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Swept equipment id (default G2 for `sweep`, B1 for `battery-sweep`).
    #[arg(long, value_name = "ID")]
    target: Option<String>,
    /// Comma-separated, strictly decreasing health indices.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    hci_values: Option<Vec<f64>>,
    /// Comma-separated derating modes: P_ONLY, P_AND_V.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    modes: Option<Vec<String>>,
    /// Comma-separated load scaling factors.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "1.0")]
    sf: Vec<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long, default_value_t = OracleSettings::default().p_steps)]
    p_steps: usize,
    #[arg(long, default_value_t = OracleSettings::default().q_steps)]
    q_steps: usize,
    #[arg(long, default_value_t = OracleSettings::default().v_steps)]
    v_steps: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error_code(&e))
        }
    }
}

fn error_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<HfopfError>() {
            return match err {
                HfopfError::Case(CaseError::Io { .. }) => EXIT_IO,
                HfopfError::Oracle(OracleError::TooManyAxes { .. }) => EXIT_REFUSED,
                _ => EXIT_DATA,
            };
        }
        if matches!(cause.downcast_ref::<CaseError>(), Some(CaseError::Io { .. })) {
            return EXIT_IO;
        }
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_DATA
}

/// Misuse detected after argument parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Sweep(a) => cmd_sweep(&a, false),
        Command::BatterySweep(a) => cmd_sweep(&a, true),
        Command::Validate(a) => cmd_validate(&a),
        Command::DumpProblem(a) => cmd_dump(&a),
    }
}

fn load(common: &Common) -> Result<Network> {
    let Some(path) = common.case.as_ref().or(common.case_pos.as_ref()) else {
        return Err(usage("a case file is required (`--case PATH`)"));
    };
    load_case(path).map_err(HfopfError::from).context("loading case")
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn options(common: &Common) -> Result<SolveOptions> {
    let mut opts = SolveOptions::default();
    if let Some(t) = common.tol_gap {
        opts.solver.tol_gap = t;
    }
    if let Some(t) = common.rank1_tol {
        opts.recovery.rank1_tol = t;
    }
    opts.solver.verbose = common.verbose;
    if let Ok(path) = std::env::var(TABLE_ENV) {
        opts.tables = FaultTables::from_path(&path)
            .map_err(HfopfError::from)
            .with_context(|| format!("fault tables from {TABLE_ENV}={path}"))?;
    }
    Ok(opts)
}

fn profiles(args: &SolveArgs, network: &Network) -> Result<Vec<HealthProfile>> {
    let mapping: MappingMode = args.common.mode.unwrap_or(Mapping::Linear).into();
    let mut out: Vec<HealthProfile> = Vec::new();
    for item in &args.hci {
        let (id, value) = item.split_once('=').ok_or_else(|| usage(format!("--hci expects ID=VALUE, got `{item}`")))?;
        let source = SourceRef::parse(id.trim()).ok_or_else(|| usage(format!("unknown equipment id `{id}`")))?;
        if !network.has_source(source) {
            bail!(HfopfError::Request(format!("no equipment {source} in the case")));
        }
        let hci: f64 = value.trim().parse().map_err(|_| usage(format!("bad health index `{value}`")))?;
        if out.iter().any(|p| p.equipment == source) {
            return Err(usage(format!("{source} assigned twice")));
        }
        out.push(HealthProfile::new(source, hci, mapping, args.derate_voltage));
    }
    Ok(out)
}

fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn status_code(status: DispatchStatus) -> u8 {
    match status {
        DispatchStatus::Exact => 0,
        DispatchStatus::Infeasible => 2,
        DispatchStatus::Inexact => 3,
        DispatchStatus::SolverFailure => 4,
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let network = load(&args.common)?;
    let opts = options(&args.common)?;
    let profiles = profiles(args, &network)?;
    let outcome = solve_case(&network, &profiles, args.sf, &opts)?;
    if args.common.verbose {
        eprint!("{}", outcome.certificate);
    }
    let text = if args.common.json {
        serde_json::to_string_pretty(&outcome.dispatch)? + "\n"
    } else {
        render_dispatch(&network, &outcome)
    };
    emit(&args.common, &text)?;
    Ok(status_code(outcome.dispatch.status))
}

fn render_dispatch(network: &Network, outcome: &CaseOutcome) -> String {
    use std::fmt::Write;
    let d: &DispatchResult = &outcome.dispatch;
    let mut s = String::new();
    let _ = writeln!(s, "status      {}", d.status.as_str());
    let _ = writeln!(s, "solver      {} after {} iterations", d.solver_status.as_str(), d.iterations);
    let _ = writeln!(s, "load scale  {}", d.load_scale);
    if let Some(c) = d.cost_total {
        let _ = writeln!(s, "cost        {c:.6}");
    }
    if let Some(r) = d.exactness_ratio {
        let _ = writeln!(s, "exactness   {r:.3e}");
    }
    if let Some(r) = d.balance_residual {
        let _ = writeln!(s, "balance     {r:.3e} pu");
    }
    if d.status.has_cost() {
        let base = network.base_mva;
        for src in network.sources() {
            let (p, q) = d.source_power(src);
            let _ = writeln!(s, "{:<11} P {:>9.4} MW  Q {:>9.4} MVAr", src.name(), p * base, q * base);
        }
    }
    if let Some(v) = &d.voltages {
        for (k, vk) in v.iter().enumerate() {
            let _ = writeln!(s, "bus {:<7} |V| {:.6} pu  angle {:>9.5} deg", k + 1, vk.norm(), vk.arg().to_degrees());
        }
    }
    if d.status == DispatchStatus::Infeasible {
        let verdict = if outcome.certificate.passed() { "verified" } else { "NOT verified" };
        let _ = writeln!(s, "certificate {verdict}");
    }
    s
}

fn sweep_spec(args: &SweepArgs, network: &Network, battery: bool) -> Result<SweepSpec> {
    let target = match &args.target {
        Some(id) => SourceRef::parse(id.trim()).ok_or_else(|| usage(format!("unknown equipment id `{id}`")))?,
        None if battery => SourceRef::Bess(0),
        None if network.generators.len() > 1 => SourceRef::Generator(1),
        None => SourceRef::Generator(0),
    };
    let mut spec = if battery { SweepSpec::battery(target) } else { SweepSpec::generator(target) };
    // Battery sweeps read the battery fault table by default. Generator
    // sweeps use the linear map.
    let default_mapping = if battery { Mapping::Table } else { Mapping::Linear };
    spec.mapping_mode = args.common.mode.unwrap_or(default_mapping).into();
    if let Some(h) = &args.hci_values {
        spec.hci_values = h.clone();
    }
    if let Some(modes) = &args.modes {
        spec.modes = modes
            .iter()
            .map(|m| DerateMode::parse(m.trim()).ok_or_else(|| usage(format!("unknown mode `{m}`"))))
            .collect::<Result<_>>()?;
    }
    spec.load_scales = args.sf.clone();
    spec.validate(network)?;
    Ok(spec)
}

fn cmd_sweep(args: &SweepArgs, battery: bool) -> Result<u8> {
    if args.workers == Some(0) {
        return Err(usage("--workers must be at least 1"));
    }
    let network = load(&args.common)?;
    let spec = sweep_spec(args, &network, battery)?;
    let opts = options(&args.common)?;
    let rows = run_sweep(&network, &spec, &opts, args.workers)?;
    let text = if args.common.json { serde_json::to_string_pretty(&rows)? + "\n" } else { rows_to_csv(&rows) };
    emit(&args.common, &text)?;
    if args.common.verbose {
        let infeasible = rows.iter().filter(|r| r.status == DispatchStatus::Infeasible).count();
        eprintln!("{} points, {} infeasible", rows.len(), infeasible);
    }
    Ok(0)
}

fn cmd_validate(args: &ValidateArgs) -> Result<u8> {
    let common = &args.solve.common;
    let network = load(common)?;
    let opts = options(common)?;
    let profiles = profiles(&args.solve, &network)?;
    let settings = OracleSettings {
        p_steps: args.p_steps,
        q_steps: args.q_steps,
        v_steps: args.v_steps,
        ..OracleSettings::default()
    };
    let report = validate_case(&network, &profiles, args.solve.sf, &opts, &settings)?;
    let text = if common.json { serde_json::to_string_pretty(&report)? + "\n" } else { render_report(&report) };
    emit(common, &text)?;
    Ok(if report.verdict.is_sound() { 0 } else { EXIT_UNSOUND })
}

fn render_report(r: &ValidationReport) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
    format!(
        "sdp         {} cost {}\noracle      cost {} ({} of {} grid points feasible, {} diverged)\n\
         cell bound  {}\ngap         {}\nverdict     {}\n",
        r.sdp_status.as_str(),
        opt(r.sdp_cost),
        opt(r.oracle.best_cost),
        r.oracle.feasible_count,
        r.oracle.grid_size,
        r.oracle.diverged_count,
        opt(r.oracle.cell_cost_bound),
        opt(r.gap),
        r.verdict.as_str(),
    )
}

fn cmd_dump(args: &SolveArgs) -> Result<u8> {
    let network = load(&args.common)?;
    let opts = options(&args.common)?;
    let profiles = profiles(args, &network)?;
    if !(args.sf > 0.0 && args.sf.is_finite()) {
        return Err(usage(format!("--sf must be positive, got {}", args.sf)));
    }
    let limits = hfopf::health::HealthLimits::compute(&network, &profiles, &opts.tables).map_err(HfopfError::from)?;
    let f = hfopf::formulation::assemble(&network, &limits, args.sf);
    emit(&args.common, &(f.problem.to_json() + "\n"))?;
    Ok(0)
}
