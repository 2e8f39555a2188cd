//! Primal-dual interior-point method on the homogeneous self-dual embedding.
//!
//! The embedding variables are `(X, y, S, tau, kappa)` with residuals
//!
//! ```text
//! rp = b tau - A(X)
//! rd = C tau - A^T(y) - S
//! rg = kappa + <C, X> - b'y
//! ```
//!
//! Each iteration takes a Mehrotra predictor-corrector step along the
//! Nesterov-Todd direction. The Schur complement `M_ij = <A_i, W A_j W>` is
//! formed densely and factored by Cholesky.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::ConicError;
use crate::linalg::{cholesky_lower, max_eigenvalue, max_step, robust_cholesky, NtScaling};
use crate::presolve::{screen_rows, RowScreen};
use crate::problem::{block_inner, block_norm, inner, ConicProblem};

const STEP_FRACTION: f64 = 0.99;
const PERTURB_START: f64 = 1e-12;
const PERTURB_LIMIT: f64 = 1e-6;
/// Extra iterations taken after the tolerances are first met; the best
/// converged iterate is returned.
const POLISH_STEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Relative duality-gap tolerance.
    pub tol_gap: f64,
    /// Relative primal and dual residual tolerance.
    pub tol_feas: f64,
    pub max_iter: usize,
    /// Declare infeasibility once `tau / kappa` drops below this.
    pub infeas_threshold: f64,
    /// Per-iteration log on stderr.
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol_gap: 1e-8, tol_feas: 1e-8, max_iter: 200, infeas_threshold: 1e-10, verbose: false }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), ConicError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.tol_gap) || !pos(self.tol_feas) || !pos(self.infeas_threshold) {
            return Err(ConicError::Settings("tolerances must be positive and finite".into()));
        }
        if self.max_iter == 0 {
            return Err(ConicError::Settings("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "OPTIMAL",
            SolveStatus::PrimalInfeasible => "PRIMAL_INFEASIBLE",
            SolveStatus::DualInfeasible => "DUAL_INFEASIBLE",
            SolveStatus::MaxIter => "MAX_ITER",
            SolveStatus::NumericalFailure => "NUMERICAL_FAILURE",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Result of [`solve`].
///
/// For `Optimal`, the blocks and `dual_vector` are the solution. For
/// `PrimalInfeasible`, `dual_vector` is a Farkas certificate normalized to
/// `b'y = 1` (so `sum_i y_i A_i` is negative semidefinite) and `dual_blocks`
/// holds `-A^T y`. For `DualInfeasible`, `primal_blocks` is a PSD ray with
/// `<C, X> = -1` and `A(X) ~ 0`.
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub primal_blocks: Vec<DMatrix<f64>>,
    pub dual_vector: Vec<f64>,
    pub dual_blocks: Vec<DMatrix<f64>>,
    pub objective_primal: f64,
    pub objective_dual: f64,
    pub iterations: usize,
    pub residuals: Residuals,
    /// Constraint rows found linearly dependent on earlier rows and dropped.
    pub dependent_rows: Vec<usize>,
    pub settings: SolverSettings,
}

impl ConicSolution {
    fn empty(problem: &ConicProblem, settings: SolverSettings, status: SolveStatus) -> Self {
        let zeros: Vec<DMatrix<f64>> = problem.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        Self {
            status,
            primal_blocks: zeros.clone(),
            dual_vector: vec![0.0; problem.num_constraints()],
            dual_blocks: zeros,
            objective_primal: f64::NAN,
            objective_dual: f64::NAN,
            iterations: 0,
            residuals: Residuals::default(),
            dependent_rows: Vec::new(),
            settings,
        }
    }
}

/// Row-normalized, dependency-free working copy of the problem.
struct Work {
    dims: Vec<usize>,
    c: Vec<DMatrix<f64>>,
    b: DVector<f64>,
    /// Per constraint: (block, matrix).
    rows: Vec<Vec<(usize, DMatrix<f64>)>>,
    /// Per block: (row, term index).
    by_block: Vec<Vec<(usize, usize)>>,
    /// Maps a working row to (original row, scale) with `a_work = a_orig / scale`.
    origin: Vec<(usize, f64)>,
}

impl Work {
    fn new(problem: &ConicProblem, kept: &[usize]) -> Self {
        let mut rows = Vec::with_capacity(kept.len());
        let mut b = Vec::with_capacity(kept.len());
        let mut origin = Vec::with_capacity(kept.len());
        let mut by_block = vec![Vec::new(); problem.num_blocks()];
        for (w, &i) in kept.iter().enumerate() {
            let con = &problem.constraints[i];
            let norm = con.terms.iter().map(|t| t.matrix.norm_squared()).sum::<f64>().sqrt();
            let scale = if norm > 0.0 { norm } else { 1.0 };
            let terms: Vec<(usize, DMatrix<f64>)> = con.terms.iter().map(|t| (t.block, &t.matrix / scale)).collect();
            for (k, (blk, _)) in terms.iter().enumerate() {
                by_block[*blk].push((w, k));
            }
            rows.push(terms);
            b.push(con.rhs / scale);
            origin.push((i, scale));
        }
        Self {
            dims: problem.block_dims.clone(),
            c: problem.objective.clone(),
            b: DVector::from_vec(b),
            rows,
            by_block,
            origin,
        }
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    fn apply(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(self.m(), self.rows.iter().map(|r| r.iter().map(|(j, a)| inner(a, &x[*j])).sum::<f64>()))
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (r, &yi) in self.rows.iter().zip(y.iter()) {
            for (j, a) in r {
                out[*j] += a * yi;
            }
        }
        out
    }

    fn schur(&self, nt: &[NtScaling]) -> DMatrix<f64> {
        let m = self.m();
        let mut mat = DMatrix::zeros(m, m);
        for (j, list) in self.by_block.iter().enumerate() {
            for (p, &(k, tk)) in list.iter().enumerate() {
                let wak = nt[j].sandwich(&self.rows[k][tk].1);
                for &(i, ti) in &list[..=p] {
                    let v = inner(&self.rows[i][ti].1, &wak);
                    mat[(i, k)] += v;
                    if i != k {
                        mat[(k, i)] += v;
                    }
                }
            }
        }
        mat
    }

    /// Working dual vector to original row indexing.
    fn to_original_y(&self, y: &DVector<f64>, m_orig: usize) -> Vec<f64> {
        let mut out = vec![0.0; m_orig];
        for (w, &(i, scale)) in self.origin.iter().enumerate() {
            out[i] = y[w] / scale;
        }
        out
    }
}

#[derive(Clone)]
struct Iterate {
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    s: Vec<DMatrix<f64>>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dtau: f64,
    dkappa: f64,
}

/// Quantities fixed for one iteration.
struct Linearization<'a> {
    work: &'a Work,
    nt: Vec<NtScaling>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rg: f64,
    mu: f64,
    tau: f64,
    kappa: f64,
    /// A(WCW) and M^{-1}(A(WCW) + b).
    a_wcw: DVector<f64>,
    h2: DVector<f64>,
    c_wcw: f64,
    a_wrdw: DVector<f64>,
    c_wrdw: f64,
}

impl<'a> Linearization<'a> {
    fn solve(&self, sigma: f64, eta: f64, corr: Option<(&[DMatrix<f64>], f64)>) -> Direction {
        let w = self.work;
        let target = sigma * self.mu;
        let rc: Vec<DMatrix<f64>> = self
            .nt
            .iter()
            .enumerate()
            .map(|(j, nt)| {
                let n = nt.d.len();
                let mut r = DMatrix::zeros(n, n);
                for i in 0..n {
                    r[(i, i)] = target - nt.d[i] * nt.d[i];
                }
                if let Some((c, _)) = corr {
                    r -= &c[j];
                }
                nt.unscale(&nt.lyap_solve(&r))
            })
            .collect();
        let a_rc = w.apply(&rc);
        let r1 = &self.rp * eta - &a_rc + &self.a_wrdw * eta;
        let h1 = self.chol.solve(&r1);
        let rtau = target - self.tau * self.kappa - corr.map_or(0.0, |(_, v)| v);
        let bma = &w.b - &self.a_wcw;
        let num = eta * self.rg + block_inner(&w.c, &rc) - eta * self.c_wrdw + rtau / self.tau - bma.dot(&h1);
        let den = bma.dot(&self.h2) + self.c_wcw + self.kappa / self.tau;
        let dtau = num / den;
        let dy = &h1 + &self.h2 * dtau;
        let aty = w.adjoint(&dy);
        let ds: Vec<DMatrix<f64>> = (0..w.dims.len()).map(|j| &self.rd[j] * eta - &aty[j] + &w.c[j] * dtau).collect();
        let dx: Vec<DMatrix<f64>> = (0..w.dims.len()).map(|j| &rc[j] - self.nt[j].sandwich(&ds[j])).collect();
        let dkappa = (rtau - self.kappa * dtau) / self.tau;
        Direction { dx, dy, ds, dtau, dkappa }
    }
}

fn step_length(lx: &[DMatrix<f64>], ls: &[DMatrix<f64>], it: &Iterate, d: &Direction) -> f64 {
    let mut a = f64::INFINITY;
    for (l, dx) in lx.iter().zip(&d.dx) {
        a = a.min(max_step(l, dx));
    }
    for (l, ds) in ls.iter().zip(&d.ds) {
        a = a.min(max_step(l, ds));
    }
    if d.dtau < 0.0 {
        a = a.min(-it.tau / d.dtau);
    }
    if d.dkappa < 0.0 {
        a = a.min(-it.kappa / d.dkappa);
    }
    a
}

fn axpy_blocks(x: &[DMatrix<f64>], alpha: f64, d: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    x.iter().zip(d).map(|(a, b)| a + b * alpha).collect()
}

/// Solves a block SDP. Errors only on malformed input; solver outcomes are
/// reported through [`ConicSolution::status`].
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    problem.validate()?;
    settings.validate()?;
    let settings = *settings;
    let (kept, dropped) = match screen_rows(problem) {
        RowScreen::Contradiction { certificate } => {
            let mut sol = ConicSolution::empty(problem, settings, SolveStatus::PrimalInfeasible);
            sol.dual_blocks = problem.apply_adjoint(&certificate).into_iter().map(|m| -m).collect();
            sol.dual_vector = certificate;
            return Ok(sol);
        }
        RowScreen::Independent { kept, dropped } => (kept, dropped),
    };
    let work = Work::new(problem, &kept);
    let m_orig = problem.num_constraints();
    let nu = problem.degree() as f64;
    let b_orig = DVector::from_vec(problem.rhs());
    let b_norm = b_orig.norm();
    let c_norm = block_norm(&problem.objective);

    let zeta_p = work.b.iter().fold(1.0_f64, |acc, &bi| acc.max((1.0 + bi.abs()) * 10.0_f64.sqrt()));
    let zeta_d = 1.0_f64.max((1.0 + c_norm) / nu.sqrt());
    let mut it = Iterate {
        x: work.dims.iter().map(|&d| DMatrix::identity(d, d) * zeta_p).collect(),
        y: DVector::zeros(work.m()),
        s: work.dims.iter().map(|&d| DMatrix::identity(d, d) * zeta_d).collect(),
        tau: 1.0,
        kappa: 1.0,
    };

    let finish = |it: &Iterate, status: SolveStatus, iterations: usize, res: Residuals| {
        let mut sol = ConicSolution::empty(problem, settings, status);
        sol.iterations = iterations;
        sol.residuals = res;
        sol.dependent_rows = dropped.clone();
        let y_orig = work.to_original_y(&it.y, m_orig);
        match status {
            SolveStatus::PrimalInfeasible => {
                let by: f64 = y_orig.iter().zip(b_orig.iter()).map(|(a, b)| a * b).sum();
                let y: Vec<f64> = y_orig.iter().map(|v| v / by).collect();
                sol.dual_blocks = problem.apply_adjoint(&y).into_iter().map(|m| -m).collect();
                sol.dual_vector = y;
            }
            SolveStatus::DualInfeasible => {
                let cx = block_inner(&problem.objective, &it.x);
                sol.primal_blocks = it.x.iter().map(|m| m / (-cx)).collect();
            }
            _ => {
                sol.primal_blocks = it.x.iter().map(|m| m / it.tau).collect();
                sol.dual_blocks = it.s.iter().map(|m| m / it.tau).collect();
                sol.dual_vector = y_orig.iter().map(|v| v / it.tau).collect();
                sol.objective_primal = problem.objective_value(&sol.primal_blocks);
                sol.objective_dual = sol.dual_vector.iter().zip(b_orig.iter()).map(|(a, b)| a * b).sum::<f64>()
                    + problem.objective_offset;
            }
        }
        sol
    };

    let mut last_res = Residuals::default();
    let mut best: Option<(Iterate, usize, Residuals, f64)> = None;
    let mut polished = 0;
    for iter in 0..settings.max_iter {
        // Termination measured on the original data.
        let y_orig = DVector::from_vec(work.to_original_y(&it.y, m_orig));
        let xs: Vec<DMatrix<f64>> = it.x.iter().map(|m| m / it.tau).collect();
        let ss: Vec<DMatrix<f64>> = it.s.iter().map(|m| m / it.tau).collect();
        let ys = &y_orig / it.tau;
        let ax = DVector::from_vec(problem.apply(&xs));
        let pres = (&ax - &b_orig).norm() / (1.0 + b_norm);
        let aty = problem.apply_adjoint(ys.as_slice());
        let dres_sq: f64 =
            (0..problem.num_blocks()).map(|j| (&problem.objective[j] - &aty[j] - &ss[j]).norm_squared()).sum();
        let dres = dres_sq.sqrt() / (1.0 + c_norm);
        let pobj = problem.objective_value(&xs);
        let dobj = ys.dot(&b_orig) + problem.objective_offset;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
        last_res = Residuals { primal: pres, dual: dres, gap };

        let mu = (block_inner(&it.x, &it.s) + it.tau * it.kappa) / (nu + 1.0);
        if pres <= settings.tol_feas && dres <= settings.tol_feas && gap <= settings.tol_gap {
            let score = (pres / settings.tol_feas).max(dres / settings.tol_feas).max(gap / settings.tol_gap);
            if best.as_ref().is_none_or(|b| score < b.3) {
                best = Some((it.clone(), iter, last_res, score));
            }
            polished += 1;
            if polished > POLISH_STEPS {
                let (b, i, r, _) = best.expect("set above");
                return Ok(finish(&b, SolveStatus::Optimal, i, r));
            }
        } else if let Some((b, i, r, _)) = best {
            return Ok(finish(&b, SolveStatus::Optimal, i, r));
        }
        let by = y_orig.dot(&b_orig);
        if best.is_some() {
            // Polishing a converged point; skip the infeasibility tests.
        } else if by > 0.0 {
            let aty_cert = problem.apply_adjoint((&y_orig / by).as_slice());
            let worst = aty_cert.iter().map(max_eigenvalue).fold(f64::NEG_INFINITY, f64::max);
            if worst <= settings.tol_feas {
                return Ok(finish(&it, SolveStatus::PrimalInfeasible, iter, last_res));
            }
        }
        let cx = block_inner(&problem.objective, &it.x);
        if best.is_none() && cx < 0.0 {
            let ray: Vec<DMatrix<f64>> = it.x.iter().map(|m| m / (-cx)).collect();
            let ar = DVector::from_vec(problem.apply(&ray)).norm();
            if ar <= settings.tol_feas {
                return Ok(finish(&it, SolveStatus::DualInfeasible, iter, last_res));
            }
        }
        if best.is_none() && it.tau < settings.infeas_threshold * it.kappa {
            let status = if by > 0.0 {
                SolveStatus::PrimalInfeasible
            } else if cx < 0.0 {
                SolveStatus::DualInfeasible
            } else {
                SolveStatus::NumericalFailure
            };
            return Ok(finish(&it, status, iter, last_res));
        }

        // Linearize.
        let fail = |it: &Iterate| match &best {
            Some((b, i, r, _)) => Ok(finish(b, SolveStatus::Optimal, *i, *r)),
            None => Ok(finish(it, SolveStatus::NumericalFailure, iter, last_res)),
        };
        let mut lx = Vec::with_capacity(work.dims.len());
        let mut ls = Vec::with_capacity(work.dims.len());
        let mut nt = Vec::with_capacity(work.dims.len());
        for j in 0..work.dims.len() {
            let (Some(a), Some(b)) = (cholesky_lower(&it.x[j]), cholesky_lower(&it.s[j])) else {
                return fail(&it);
            };
            let Some(scaling) = NtScaling::new(&a, &b) else {
                return fail(&it);
            };
            lx.push(a);
            ls.push(b);
            nt.push(scaling);
        }
        let schur = work.schur(&nt);
        let Some((chol, _delta)) = robust_cholesky(&schur, PERTURB_START, PERTURB_LIMIT) else {
            return fail(&it);
        };
        let rp = &work.b * it.tau - work.apply(&it.x);
        let aty_w = work.adjoint(&it.y);
        let rd: Vec<DMatrix<f64>> = (0..work.dims.len()).map(|j| &work.c[j] * it.tau - &aty_w[j] - &it.s[j]).collect();
        let rg = it.kappa + block_inner(&work.c, &it.x) - work.b.dot(&it.y);
        let wcw: Vec<DMatrix<f64>> = nt.iter().zip(&work.c).map(|(n, c)| n.sandwich(c)).collect();
        let a_wcw = work.apply(&wcw);
        let h2 = chol.solve(&(&a_wcw + &work.b));
        let c_wcw = block_inner(&work.c, &wcw);
        let wrdw: Vec<DMatrix<f64>> = nt.iter().zip(&rd).map(|(n, r)| n.sandwich(r)).collect();
        let a_wrdw = work.apply(&wrdw);
        let c_wrdw = block_inner(&work.c, &wrdw);
        let lin = Linearization {
            work: &work,
            nt,
            chol,
            rp,
            rd,
            rg,
            mu,
            tau: it.tau,
            kappa: it.kappa,
            a_wcw,
            h2,
            c_wcw,
            a_wrdw,
            c_wrdw,
        };

        // Predictor.
        let aff = lin.solve(0.0, 1.0, None);
        let alpha_aff = step_length(&lx, &ls, &it, &aff).min(1.0);
        let x_aff = axpy_blocks(&it.x, alpha_aff, &aff.dx);
        let s_aff = axpy_blocks(&it.s, alpha_aff, &aff.ds);
        let mu_aff = (block_inner(&x_aff, &s_aff)
            + (it.tau + alpha_aff * aff.dtau) * (it.kappa + alpha_aff * aff.dkappa))
            / (nu + 1.0);
        let sigma = (mu_aff.max(0.0) / mu).powi(3).clamp(0.0, 1.0);

        // Corrector with the second-order term in scaled space.
        let corr: Vec<DMatrix<f64>> = lin
            .nt
            .iter()
            .enumerate()
            .map(|(j, n)| {
                let px = n.scale_primal(&aff.dx[j]);
                let pd = n.scale_dual(&aff.ds[j]);
                (&px * &pd + &pd * &px) * 0.5
            })
            .collect();
        let dir = lin.solve(sigma, 1.0 - sigma, Some((&corr, aff.dtau * aff.dkappa)));
        let alpha = (STEP_FRACTION * step_length(&lx, &ls, &it, &dir)).min(1.0);
        if !(alpha > 1e-12) || !dir.dtau.is_finite() {
            return fail(&it);
        }
        it.x = axpy_blocks(&it.x, alpha, &dir.dx);
        it.s = axpy_blocks(&it.s, alpha, &dir.ds);
        for m in it.x.iter_mut().chain(it.s.iter_mut()) {
            crate::linalg::symmetrize(m);
        }
        it.y += &dir.dy * alpha;
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;
        if settings.verbose {
            eprintln!(
                "iter {iter:3}  mu {mu:9.3e}  pres {pres:9.3e}  dres {dres:9.3e}  gap {gap:9.3e}  step {alpha:9.3e}"
            );
        }
    }
    match best {
        Some((b, i, r, _)) => Ok(finish(&b, SolveStatus::Optimal, i, r)),
        None => Ok(finish(&it, SolveStatus::MaxIter, settings.max_iter, last_res)),
    }
}
