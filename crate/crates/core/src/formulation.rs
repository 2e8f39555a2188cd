//! Real-lifted SDP relaxation in standard block form.
//!
//! With `V = [Vx; Vy]` (length `2n`) and `W = V V^T`, bus injections,
//! squared voltage magnitudes and branch flows are all `Tr(A W)` for
//! constant symmetric `A`. The relaxation replaces `W = V V^T` by `W >= 0`.
//!
//! The imaginary coordinate of the reference bus is removed before the
//! problem is handed to the solver. The lifted problem is invariant under a
//! global rotation of `V`; without this cut an interior-point method
//! converges to the rotation-averaged (rank two) optimum.

use hfopf_conic::{ConicProblem, Constraint, Term};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::health::HealthLimits;
use crate::network::{branch_flow, build_admittance, injection_with, AdmittanceMatrix, Network, SourceRef};

/// Two bounds closer than this are emitted as one equality.
const EQUALITY_GAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedBusMatrices {
    pub yk: DMatrix<f64>,
    pub ybar_k: DMatrix<f64>,
    pub mk: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedBranchMatrices {
    pub ykl: DMatrix<f64>,
    pub ybar_kl: DMatrix<f64>,
}

/// Real lifting of a complex matrix `phi` such that
/// `Tr(re V V^T) + j Tr(im V V^T) = sum_k V_k conj((phi V)_k)`.
fn lift_phi(phi: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = phi.nrows();
    let sum = phi + phi.transpose();
    let diff = phi - phi.transpose();
    let mut re = DMatrix::zeros(2 * n, 2 * n);
    let mut im = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let (s, d) = (sum[(i, j)], diff[(i, j)]);
            re[(i, j)] = 0.5 * s.re;
            re[(i, n + j)] = -0.5 * d.im;
            re[(n + i, j)] = 0.5 * d.im;
            re[(n + i, n + j)] = 0.5 * s.re;
            im[(i, j)] = -0.5 * s.im;
            im[(i, n + j)] = -0.5 * d.re;
            im[(n + i, j)] = 0.5 * d.re;
            im[(n + i, n + j)] = -0.5 * s.im;
        }
    }
    (re, im)
}

pub fn lift_bus(y: &AdmittanceMatrix, k: usize) -> LiftedBusMatrices {
    let n = y.n();
    assert!(k < n, "bus {k} out of range");
    let mut phi = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    phi.set_row(k, &y.entries.row(k));
    let (yk, ybar_k) = lift_phi(&phi);
    let mut mk = DMatrix::zeros(2 * n, 2 * n);
    mk[(k, k)] = 1.0;
    mk[(n + k, n + k)] = 1.0;
    LiftedBusMatrices { yk, ybar_k, mk }
}

/// Lifting of the sending-end flow `S_kl` of a branch with series
/// admittance `y_kl`.
pub fn lift_branch(y_kl: Complex64, k: usize, l: usize, n: usize) -> LiftedBranchMatrices {
    assert!(k < n && l < n && k != l, "invalid branch ({k}, {l}) for n = {n}");
    let mut phi = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    phi[(k, k)] = y_kl;
    phi[(k, l)] = -y_kl;
    let (ykl, ybar_kl) = lift_phi(&phi);
    LiftedBranchMatrices { ykl, ybar_kl }
}

/// `[Re V; Im V]`.
pub fn stack(v: &[Complex64]) -> nalgebra::DVector<f64> {
    let n = v.len();
    nalgebra::DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// `x^T A x`.
pub fn quad(a: &DMatrix<f64>, x: &nalgebra::DVector<f64>) -> f64 {
    (x.transpose() * a * x)[(0, 0)]
}

/// Removes / restores the reference bus' imaginary coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reduction {
    pub n: usize,
    pub reference_bus: usize,
}

impl Reduction {
    fn dropped(&self) -> usize {
        self.n + self.reference_bus
    }

    pub fn reduced_dim(&self) -> usize {
        2 * self.n - 1
    }

    pub fn reduce(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.clone().remove_row(self.dropped()).remove_column(self.dropped())
    }

    pub fn embed(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        w.clone().insert_row(self.dropped(), 0.0).insert_column(self.dropped(), 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowBlock {
    pub branch: usize,
    pub from: usize,
    pub to: usize,
    pub block: usize,
}

/// An assembled relaxation plus the bookkeeping needed to interpret its
/// solution.
#[derive(Debug, Clone)]
pub struct Formulation {
    pub problem: ConicProblem,
    pub reduction: Reduction,
    pub load_scale: f64,
    /// Full-size (2n) lifted bus matrices.
    pub bus_mats: Vec<LiftedBusMatrices>,
    pub flow_blocks: Vec<FlowBlock>,
    pub cost_blocks: Vec<(SourceRef, usize)>,
}

impl Formulation {
    /// The W block of a primal solution, re-embedded at size 2n.
    pub fn full_w(&self, primal_blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
        self.reduction.embed(&primal_blocks[0])
    }
}

fn unit(d: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    if i == j {
        m[(i, i)] = 1.0;
    } else {
        m[(i, j)] = 0.5;
        m[(j, i)] = 0.5;
    }
    m
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

struct Builder {
    dims: Vec<usize>,
    labels: Vec<String>,
    objective: Vec<DMatrix<f64>>,
    constraints: Vec<Constraint>,
    offset: f64,
}

impl Builder {
    fn block(&mut self, dim: usize, label: String) -> usize {
        self.dims.push(dim);
        self.labels.push(label);
        self.objective.push(DMatrix::zeros(dim, dim));
        self.dims.len() - 1
    }

    fn constraint(&mut self, label: String, terms: Vec<(usize, DMatrix<f64>)>, rhs: f64) {
        let terms = terms.into_iter().map(|(block, matrix)| Term { block, matrix }).collect();
        self.constraints.push(Constraint { label, terms, rhs });
    }

    /// `lo <= Tr(a W) <= hi` as equalities with scalar slack blocks.
    fn two_sided(&mut self, what: &str, a: &DMatrix<f64>, lo: f64, hi: f64) {
        if (hi - lo).abs() <= EQUALITY_GAP {
            self.constraint(format!("{what} = {lo:.6}"), vec![(0, a.clone())], lo);
            return;
        }
        let s = self.block(1, format!("slack {what} lower"));
        self.constraint(format!("{what} >= {lo:.6}"), vec![(0, a.clone()), (s, scalar(-1.0))], lo);
        let s = self.block(1, format!("slack {what} upper"));
        self.constraint(format!("{what} <= {hi:.6}"), vec![(0, a.clone()), (s, scalar(1.0))], hi);
    }
}

/// Builds the relaxed HF-OPF for `network` under `limits` with all loads
/// multiplied by `load_scale`.
pub fn assemble(network: &Network, limits: &HealthLimits, load_scale: f64) -> Formulation {
    let n = network.n_bus();
    let y = build_admittance(network);
    let red = Reduction { n, reference_bus: network.reference_bus };
    let bus_mats: Vec<LiftedBusMatrices> = (0..n).map(|k| lift_bus(&y, k)).collect();
    if cfg!(debug_assertions) {
        self_check(network, &y, &bus_mats);
    }
    let mut b = Builder { dims: vec![], labels: vec![], objective: vec![], constraints: vec![], offset: 0.0 };
    let w = b.block(red.reduced_dim(), "W".into());
    debug_assert_eq!(w, 0);

    // Flow limits, both directions: [[smax^2, P, Q], [P, 1, 0], [Q, 0, 1]] >= 0.
    let mut flow_blocks = Vec::new();
    for (i, br) in network.branches.iter().enumerate() {
        let yb = br.series_admittance();
        for (k, l) in [(br.from_bus, br.to_bus), (br.to_bus, br.from_bus)] {
            let lifted = lift_branch(yb, k, l, n);
            let name = format!("flow {}->{}", k + 1, l + 1);
            let f = b.block(3, name.clone());
            b.constraint(format!("{name} smax^2"), vec![(f, unit(3, 0, 0))], br.s_max * br.s_max);
            b.constraint(format!("{name} P"), vec![(f, unit(3, 0, 1)), (w, -red.reduce(&lifted.ykl))], 0.0);
            b.constraint(format!("{name} Q"), vec![(f, unit(3, 0, 2)), (w, -red.reduce(&lifted.ybar_kl))], 0.0);
            b.constraint(format!("{name} (1,1)"), vec![(f, unit(3, 1, 1))], 1.0);
            b.constraint(format!("{name} (1,2)"), vec![(f, unit(3, 1, 2))], 0.0);
            b.constraint(format!("{name} (2,2)"), vec![(f, unit(3, 2, 2))], 1.0);
            flow_blocks.push(FlowBlock { branch: i, from: k, to: l, block: f });
        }
    }

    // Costs. P_G = Tr(Yk W) + SF P_D; c2 P_G^2 <= T11 via [[1, sqrt(c2) P_G], [., T11]] >= 0.
    let source_at = network.source_at_bus();
    let mut cost_blocks = Vec::new();
    for s in network.sources() {
        let k = network.source_bus(s);
        let c = network.source_cost(s);
        let pd = load_scale * network.buses[k].p_load;
        let yk = red.reduce(&bus_mats[k].yk);
        b.objective[w] += &yk * c.c1;
        b.offset += c.c0 + c.c1 * pd;
        if c.c2 > 0.0 {
            let r = c.c2.sqrt();
            let name = format!("cost {s}");
            let t = b.block(2, name.clone());
            b.objective[t][(1, 1)] = 1.0;
            b.constraint(format!("{name} (0,0)"), vec![(t, unit(2, 0, 0))], 1.0);
            b.constraint(format!("{name} (0,1)"), vec![(t, unit(2, 0, 1)), (w, -(yk * r))], r * pd);
            cost_blocks.push((s, t));
        }
    }

    // Injection and voltage limits per bus.
    for k in 0..n {
        let bus = &network.buses[k];
        let (pd, qd) = (load_scale * bus.p_load, load_scale * bus.q_load);
        let m = &bus_mats[k];
        let (yk, ybar) = (red.reduce(&m.yk), red.reduce(&m.ybar_k));
        match source_at[k] {
            Some(s) => {
                let sb = limits.source_bounds(network, s);
                b.two_sided(&format!("bus{} P ({s})", k + 1), &yk, sb.p_lo - pd, sb.p_hi - pd);
                b.two_sided(&format!("bus{} Q ({s})", k + 1), &ybar, sb.q_lo - qd, sb.q_hi - qd);
            }
            None => {
                b.constraint(format!("bus{} P balance", k + 1), vec![(w, yk)], -pd);
                b.constraint(format!("bus{} Q balance", k + 1), vec![(w, ybar)], -qd);
            }
        }
        let (vlo, vhi) = limits.bus_voltage_band(network, k);
        b.two_sided(&format!("bus{} |V|^2", k + 1), &red.reduce(&m.mk), vlo * vlo, vhi * vhi);
    }

    let mut problem = ConicProblem::new(b.dims);
    problem.block_labels = b.labels;
    problem.objective = b.objective;
    problem.objective_offset = b.offset;
    problem.constraints = b.constraints;
    Formulation { problem, reduction: red, load_scale, bus_mats, flow_blocks, cost_blocks }
}

/// Checks the lifted bus and branch matrices against complex arithmetic
/// for random voltages; panics on mismatch. Run by debug builds.
pub fn self_check(network: &Network, y: &AdmittanceMatrix, bus_mats: &[LiftedBusMatrices]) {
    let n = network.n_bus();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..100 {
        let v: Vec<Complex64> =
            (0..n).map(|_| Complex64::from_polar(rng.gen_range(0.8..1.2), rng.gen_range(-0.5..0.5))).collect();
        let x = stack(&v);
        let s = injection_with(y, &v);
        for (k, m) in bus_mats.iter().enumerate() {
            let scale = 1.0 + s[k].norm();
            assert!((quad(&m.yk, &x) - s[k].re).abs() <= 1e-10 * scale, "Yk self-check failed at bus {k}");
            assert!((quad(&m.ybar_k, &x) - s[k].im).abs() <= 1e-10 * scale, "Ybar_k self-check failed at bus {k}");
            assert!((quad(&m.mk, &x) - v[k].norm_sqr()).abs() <= 1e-10, "Mk self-check failed at bus {k}");
        }
        for br in &network.branches {
            let yb = br.series_admittance();
            let (k, l) = (br.from_bus, br.to_bus);
            let lifted = lift_branch(yb, k, l, n);
            let f = branch_flow(yb, v[k], v[l]);
            assert!((quad(&lifted.ykl, &x) - f.re).abs() <= 1e-10 * (1.0 + f.norm()), "Ykl self-check failed");
            assert!((quad(&lifted.ybar_kl, &x) - f.im).abs() <= 1e-10 * (1.0 + f.norm()), "Ybar_kl self-check failed");
        }
    }
}
