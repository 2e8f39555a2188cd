//! Brute-force reference: polar Newton-Raphson power flow evaluated on a
//! grid of dispatch setpoints.
//!
//! Shares nothing with the lifted formulation; every check here is plain
//! complex arithmetic on bus voltages.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::health::{HealthLimits, SourceBounds};
use crate::network::{branch_flow, build_admittance, injection_with, AdmittanceMatrix, Network, SourceRef};

/// Largest number of swept P/Q axes the grid search accepts.
pub const MAX_SWEPT_AXES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSettings {
    pub p_steps: usize,
    pub q_steps: usize,
    pub v_steps: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Slack allowed when checking limits at a converged point.
    pub feas_tol: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { p_steps: 9, q_steps: 9, v_steps: 5, newton_tol: 1e-10, newton_max_iter: 30, feas_tol: 1e-9 }
    }
}

impl OracleSettings {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.p_steps < 2 || self.q_steps < 2 || self.v_steps < 2 {
            return Err(OracleError::Settings("grid steps must be at least 2".into()));
        }
        if !(self.newton_tol > 0.0) || !(self.feas_tol >= 0.0) || self.newton_max_iter == 0 {
            return Err(OracleError::Settings("tolerances must be positive and max_iter >= 1".into()));
        }
        Ok(())
    }

    /// Grid with every interval halved; contains the original grid.
    pub fn refined(&self) -> Self {
        Self {
            p_steps: 2 * (self.p_steps - 1) + 1,
            q_steps: 2 * (self.q_steps - 1) + 1,
            v_steps: 2 * (self.v_steps - 1) + 1,
            ..*self
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("invalid oracle settings: {0}")]
    Settings(String),
    #[error("{axes} swept axes exceed the oracle limit of {MAX_SWEPT_AXES}")]
    TooManyAxes { axes: usize },
    #[error("power flow diverged after {iterations} iterations (mismatch {mismatch:.3e})")]
    Diverged { iterations: usize, mismatch: f64 },
}

#[derive(Debug, Clone)]
pub struct PfSolution {
    pub voltages: Vec<Complex64>,
    pub iterations: usize,
}

/// Solves for bus voltages given net injections `(P, Q)` at every
/// non-slack bus (entries at `slack` are ignored) and the slack voltage
/// `slack_vm` at angle 0. Flat start.
pub fn newton_pf(
    y: &AdmittanceMatrix,
    injections: &[(f64, f64)],
    slack: usize,
    slack_vm: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PfSolution, OracleError> {
    let n = y.n();
    let (g, b): (Vec<f64>, Vec<f64>) = y.entries.iter().map(|c| (c.re, c.im)).unzip();
    let gi = |i: usize, k: usize| g[i + k * n];
    let bi = |i: usize, k: usize| b[i + k * n];
    let pq: Vec<usize> = (0..n).filter(|&k| k != slack).collect();
    let m = pq.len();
    let mut th = vec![0.0; n];
    let mut vm = vec![slack_vm; n];
    let calc = |th: &[f64], vm: &[f64]| {
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for i in 0..n {
            for k in 0..n {
                let t = th[i] - th[k];
                let (s, c) = t.sin_cos();
                p[i] += vm[i] * vm[k] * (gi(i, k) * c + bi(i, k) * s);
                q[i] += vm[i] * vm[k] * (gi(i, k) * s - bi(i, k) * c);
            }
        }
        (p, q)
    };
    let mut mismatch = f64::INFINITY;
    for iter in 0..=max_iter {
        let (p, q) = calc(&th, &vm);
        let mut f = DVector::zeros(2 * m);
        for (a, &i) in pq.iter().enumerate() {
            f[a] = injections[i].0 - p[i];
            f[m + a] = injections[i].1 - q[i];
        }
        mismatch = f.amax();
        if !mismatch.is_finite() {
            break;
        }
        if mismatch <= tol {
            let voltages = (0..n).map(|k| Complex64::from_polar(vm[k], th[k])).collect();
            return Ok(PfSolution { voltages, iterations: iter });
        }
        if iter == max_iter {
            break;
        }
        let mut jac = DMatrix::zeros(2 * m, 2 * m);
        for (a, &i) in pq.iter().enumerate() {
            for (c, &k) in pq.iter().enumerate() {
                if i == k {
                    jac[(a, c)] = -q[i] - bi(i, i) * vm[i] * vm[i];
                    jac[(a, m + c)] = p[i] / vm[i] + gi(i, i) * vm[i];
                    jac[(m + a, c)] = p[i] - gi(i, i) * vm[i] * vm[i];
                    jac[(m + a, m + c)] = q[i] / vm[i] - bi(i, i) * vm[i];
                } else {
                    let (s, co) = (th[i] - th[k]).sin_cos();
                    let h1 = gi(i, k) * s - bi(i, k) * co;
                    let h2 = gi(i, k) * co + bi(i, k) * s;
                    jac[(a, c)] = vm[i] * vm[k] * h1;
                    jac[(a, m + c)] = vm[i] * h2;
                    jac[(m + a, c)] = -vm[i] * vm[k] * h2;
                    jac[(m + a, m + c)] = vm[i] * h1;
                }
            }
        }
        let Some(dx) = jac.lu().solve(&f) else { break };
        for (a, &i) in pq.iter().enumerate() {
            th[i] += dx[a];
            vm[i] += dx[m + a];
        }
        if vm.iter().any(|&v| !(0.05..=10.0).contains(&v)) {
            break;
        }
    }
    Err(OracleError::Diverged { iterations: max_iter, mismatch })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleDispatch {
    /// Active / reactive output per source, in `Network::sources` order.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub slack: SourceRef,
    pub slack_vm: f64,
    /// Bus voltages, rotated so the reference bus has angle 0.
    pub voltages: Vec<Complex64>,
    pub grid_index: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    pub best_cost: Option<f64>,
    pub best_dispatch: Option<OracleDispatch>,
    pub feasible_count: usize,
    pub grid_size: usize,
    pub diverged_count: usize,
    /// Largest cost change between grid neighbours along each axis,
    /// summed over axes: an estimate of how far the grid minimum can sit
    /// above the true optimum.
    pub cell_cost_bound: Option<f64>,
}

#[derive(Debug, Clone)]
struct Axis {
    values: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if hi < lo {
        return vec![];
    }
    if hi == lo {
        return vec![lo];
    }
    (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
}

/// Generator with the largest derated `p_max`; ties go to the lowest index.
pub fn slack_source(network: &Network, limits: &HealthLimits) -> SourceRef {
    let mut best = 0;
    for (i, l) in limits.generators.iter().enumerate() {
        if l.p_max > limits.generators[best].p_max {
            best = i;
        }
    }
    SourceRef::Generator(best.min(network.generators.len() - 1))
}

/// Number of P/Q axes the grid would sweep for this network.
pub fn swept_axes(network: &Network) -> usize {
    2 * (network.generators.len() + network.bess_units.len()).saturating_sub(1)
}

/// Enumerates the dispatch grid, solves a power flow at every point and
/// returns the cheapest point satisfying all limits.
pub fn oracle_dispatch(
    network: &Network,
    limits: &HealthLimits,
    settings: &OracleSettings,
    load_scale: f64,
) -> Result<OracleResult, OracleError> {
    settings.validate()?;
    let axes_count = swept_axes(network);
    if axes_count > MAX_SWEPT_AXES {
        return Err(OracleError::TooManyAxes { axes: axes_count });
    }
    let y = build_admittance(network);
    let sources = network.sources();
    let slack = slack_source(network, limits);
    let slack_bus = network.source_bus(slack);
    let movers: Vec<SourceRef> = sources.iter().copied().filter(|&s| s != slack).collect();
    let bounds: Vec<SourceBounds> = sources.iter().map(|&s| limits.source_bounds(network, s)).collect();
    let bound_of = |s: SourceRef| bounds[sources.iter().position(|&x| x == s).unwrap()];

    let mut axes = Vec::new();
    for &s in &movers {
        let b = bound_of(s);
        axes.push(Axis { values: linspace(b.p_lo, b.p_hi, settings.p_steps) });
        axes.push(Axis { values: linspace(b.q_lo, b.q_hi, settings.q_steps) });
    }
    let (vlo, vhi) = limits.bus_voltage_band(network, slack_bus);
    axes.push(Axis { values: linspace(vlo, vhi, settings.v_steps) });
    let grid_size: usize = axes.iter().map(|a| a.values.len()).product();
    let strides: Vec<usize> = {
        let mut s = vec![1; axes.len()];
        for i in (0..axes.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * axes[i + 1].values.len();
        }
        s
    };
    let coords =
        |idx: usize| -> Vec<usize> { axes.iter().zip(&strides).map(|(a, &st)| (idx / st) % a.values.len()).collect() };
    let bands: Vec<(f64, f64)> = (0..network.n_bus()).map(|k| limits.bus_voltage_band(network, k)).collect();
    let tol = settings.feas_tol;

    let evaluate = |idx: usize| -> Result<Option<(f64, OracleDispatch)>, ()> {
        let c = coords(idx);
        let mut p = vec![0.0; sources.len()];
        let mut q = vec![0.0; sources.len()];
        let mut inj: Vec<(f64, f64)> =
            network.buses.iter().map(|b| (-load_scale * b.p_load, -load_scale * b.q_load)).collect();
        for (m, &s) in movers.iter().enumerate() {
            let pos = sources.iter().position(|&x| x == s).unwrap();
            p[pos] = axes[2 * m].values[c[2 * m]];
            q[pos] = axes[2 * m + 1].values[c[2 * m + 1]];
            let k = network.source_bus(s);
            inj[k].0 += p[pos];
            inj[k].1 += q[pos];
        }
        let slack_vm = axes[axes.len() - 1].values[c[axes.len() - 1]];
        let pf =
            newton_pf(&y, &inj, slack_bus, slack_vm, settings.newton_tol, settings.newton_max_iter).map_err(|_| ())?;
        let v = pf.voltages;
        let s_bus = injection_with(&y, &v);
        let sp = sources.iter().position(|&x| x == slack).unwrap();
        let sb = &network.buses[slack_bus];
        p[sp] = s_bus[slack_bus].re + load_scale * sb.p_load;
        q[sp] = s_bus[slack_bus].im + load_scale * sb.q_load;
        let b = bounds[sp];
        if p[sp] < b.p_lo - tol || p[sp] > b.p_hi + tol || q[sp] < b.q_lo - tol || q[sp] > b.q_hi + tol {
            return Ok(None);
        }
        for (k, &(lo, hi)) in bands.iter().enumerate() {
            let m = v[k].norm();
            if m < lo - tol || m > hi + tol {
                return Ok(None);
            }
        }
        for br in &network.branches {
            let yb = br.series_admittance();
            let (k, l) = (br.from_bus, br.to_bus);
            if branch_flow(yb, v[k], v[l]).norm() > br.s_max + tol
                || branch_flow(yb, v[l], v[k]).norm() > br.s_max + tol
            {
                return Ok(None);
            }
        }
        let cost: f64 = sources.iter().zip(&p).map(|(&s, &pp)| network.source_cost(s).eval(pp)).sum();
        let r = v[network.reference_bus];
        let rot = r.conj() / r.norm();
        let voltages = v.iter().map(|x| x * rot).collect();
        Ok(Some((cost, OracleDispatch { p, q, slack, slack_vm, voltages, grid_index: idx })))
    };

    let outcomes: Vec<Result<Option<(f64, OracleDispatch)>, ()>> =
        (0..grid_size).into_par_iter().map(evaluate).collect();
    let diverged_count = outcomes.iter().filter(|o| o.is_err()).count();
    let costs: Vec<Option<f64>> =
        outcomes.iter().map(|o| o.as_ref().ok().and_then(|x| x.as_ref().map(|(c, _)| *c))).collect();
    let feasible_count = costs.iter().filter(|c| c.is_some()).count();
    let best = outcomes
        .into_iter()
        .filter_map(|o| o.ok().flatten())
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.grid_index.cmp(&b.1.grid_index)));

    let cell_cost_bound = (feasible_count > 0).then(|| {
        let mut total = 0.0;
        for (ai, axis) in axes.iter().enumerate() {
            let mut worst: f64 = 0.0;
            if axis.values.len() > 1 {
                for idx in 0..grid_size {
                    if coords(idx)[ai] + 1 < axis.values.len() {
                        if let (Some(a), Some(b)) = (costs[idx], costs[idx + strides[ai]]) {
                            worst = worst.max((a - b).abs());
                        }
                    }
                }
            }
            total += worst;
        }
        total
    });

    Ok(OracleResult {
        best_cost: best.as_ref().map(|b| b.0),
        best_dispatch: best.map(|b| b.1),
        feasible_count,
        grid_size,
        diverged_count,
        cell_cost_bound,
    })
}
