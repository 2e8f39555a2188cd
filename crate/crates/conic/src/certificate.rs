//! Independent recomputation of optimality conditions and infeasibility
//! certificates from the raw problem data.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::linalg::{max_eigenvalue, min_eigenvalue};
use crate::problem::{block_inner, block_norm, ConicProblem};
use crate::solver::{ConicSolution, SolveStatus};

/// Eigenvalue floor for PSD checks.
pub const PSD_FLOOR: f64 = 1e-9;
/// Bound on `lambda_max(sum_i y_i A_i)` for a normalized Farkas certificate.
pub const CERT_EIG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// Distance to the limit, positive when the check passes.
    pub margin: f64,
    pub passed: bool,
}

impl Check {
    /// `value <= limit`.
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        let margin = limit - value;
        Self { name: name.into(), value, limit, margin, passed: margin >= 0.0 }
    }

    /// `value >= limit`.
    fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        let margin = value - limit;
        Self { name: name.into(), value, limit, margin, passed: margin >= 0.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub status: SolveStatus,
    pub checks: Vec<Check>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

impl std::fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "certificate check for {}", self.status)?;
        for c in &self.checks {
            writeln!(
                f,
                "  [{}] {:<28} value {:>12.4e}  limit {:>12.4e}  margin {:>12.4e}",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.value,
                c.limit,
                c.margin
            )?;
        }
        Ok(())
    }
}

fn psd_checks(prefix: &str, blocks: &[DMatrix<f64>], checks: &mut Vec<Check>) {
    for (j, m) in blocks.iter().enumerate() {
        let scale = 1.0 + m.norm();
        checks.push(Check::at_least(format!("{prefix}[{j}] min eigenvalue"), min_eigenvalue(m) / scale, -PSD_FLOOR));
    }
}

/// Recomputes residuals (for `Optimal`) or certificate inequalities (for the
/// infeasible statuses) in plain arithmetic. Thresholds are ten times the
/// tolerances the solution was produced with.
pub fn check_certificate(problem: &ConicProblem, solution: &ConicSolution) -> CertificateReport {
    let tol_feas = 10.0 * solution.settings.tol_feas;
    let tol_gap = 10.0 * solution.settings.tol_gap;
    let mut checks = Vec::new();
    let b = problem.rhs();
    match solution.status {
        SolveStatus::Optimal => {
            let x = &solution.primal_blocks;
            let y = &solution.dual_vector;
            let s = &solution.dual_blocks;
            let ax = problem.apply(x);
            let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let pres = ax.iter().zip(&b).map(|(a, bb)| (a - bb).powi(2)).sum::<f64>().sqrt() / (1.0 + b_norm);
            checks.push(Check::at_most("primal residual", pres, tol_feas));
            let aty = problem.apply_adjoint(y);
            let dres: f64 = (0..problem.num_blocks())
                .map(|j| (&problem.objective[j] - &aty[j] - &s[j]).norm_squared())
                .sum::<f64>()
                .sqrt()
                / (1.0 + block_norm(&problem.objective));
            checks.push(Check::at_most("dual residual", dres, tol_feas));
            let pobj = problem.objective_value(x);
            let dobj: f64 = y.iter().zip(&b).map(|(a, bb)| a * bb).sum::<f64>() + problem.objective_offset;
            checks.push(Check::at_most("relative duality gap", (pobj - dobj).abs() / (1.0 + pobj.abs()), tol_gap));
            checks.push(Check::at_most("complementarity <X,S>", block_inner(x, s).abs() / (1.0 + pobj.abs()), tol_gap));
            psd_checks("X", x, &mut checks);
            psd_checks("S", s, &mut checks);
        }
        SolveStatus::PrimalInfeasible => {
            let y = &solution.dual_vector;
            let by: f64 = y.iter().zip(&b).map(|(a, bb)| a * bb).sum();
            checks.push(Check::at_least("b'y", by, 0.0));
            let norm = if by > 0.0 { by } else { 1.0 };
            let aty = problem.apply_adjoint(y);
            for (j, m) in aty.iter().enumerate() {
                checks.push(Check::at_most(format!("lambda_max(A'y)[{j}]"), max_eigenvalue(m) / norm, CERT_EIG_TOL));
            }
        }
        SolveStatus::DualInfeasible => {
            let x = &solution.primal_blocks;
            let cx = block_inner(&problem.objective, x);
            checks.push(Check::at_most("<C,X>", cx, 0.0));
            let norm = if cx < 0.0 { -cx } else { 1.0 };
            let ax = problem.apply(x);
            let r = ax.iter().map(|v| v * v).sum::<f64>().sqrt() / norm;
            checks.push(Check::at_most("|A(X)|", r, tol_feas));
            psd_checks("X", x, &mut checks);
        }
        SolveStatus::MaxIter | SolveStatus::NumericalFailure => {}
    }
    CertificateReport { status: solution.status, checks }
}
