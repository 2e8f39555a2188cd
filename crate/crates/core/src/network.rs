//! Network data model, case-file I/O and the bus admittance matrix.
//!
//! Everything internal is per-unit on `base_mva` with 0-based bus indices.
//! Case files carry physical units and 1-based bus ids; conversion happens
//! only in [`load_case`] / [`save_case`].

use std::collections::VecDeque;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CaseError;

/// `C(P) = c2 P^2 + c1 P + c0`, coefficients per-unit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadraticCost {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl QuadraticCost {
    pub fn eval(&self, p: f64) -> f64 {
        (self.c2 * p + self.c1) * p + self.c0
    }

    /// `dC/dP`.
    pub fn marginal(&self, p: f64) -> f64 {
        2.0 * self.c2 * p + self.c1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub v_min_nominal: f64,
    pub v_max_nominal: f64,
    pub p_load: f64,
    pub q_load: f64,
}

/// Series branch `k -- l`; no shunt or charging admittance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    pub r: f64,
    pub x: f64,
    pub s_max: f64,
}

impl Branch {
    /// `y = 1 / (r + jx)`.
    pub fn series_admittance(&self) -> Complex64 {
        Complex64::new(self.r, self.x).inv()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    pub p_min_rated: f64,
    pub p_max_rated: f64,
    pub q_min_rated: f64,
    pub q_max_rated: f64,
    pub cost: QuadraticCost,
}

/// Battery storage dispatched as a source with signed power
/// (positive = discharge).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BessUnit {
    pub bus: usize,
    pub p_max_rated: f64,
    pub e_rated: f64,
    pub e_now: f64,
    pub e_min_rated: f64,
    pub e_max_rated: f64,
    /// Dispatch interval in hours.
    pub horizon: f64,
    pub cost: QuadraticCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub bess_units: Vec<BessUnit>,
    pub base_mva: f64,
    pub reference_bus: usize,
}

/// A dispatchable source: generator or battery, by position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceRef {
    Generator(usize),
    Bess(usize),
}

impl SourceRef {
    /// `G1`, `G2`, ... / `B1`, ... (1-based).
    pub fn name(&self) -> String {
        match self {
            SourceRef::Generator(i) => format!("G{}", i + 1),
            SourceRef::Bess(i) => format!("B{}", i + 1),
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim();
        let (kind, num) = t.split_at(t.find(|c: char| c.is_ascii_digit())?);
        let idx: usize = num.parse().ok()?;
        if idx == 0 {
            return None;
        }
        match kind.to_ascii_uppercase().as_str() {
            "G" => Some(SourceRef::Generator(idx - 1)),
            "B" => Some(SourceRef::Bess(idx - 1)),
            _ => None,
        }
    }
}

impl std::fmt::Display for SourceRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl Network {
    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    pub fn sources(&self) -> Vec<SourceRef> {
        (0..self.generators.len())
            .map(SourceRef::Generator)
            .chain((0..self.bess_units.len()).map(SourceRef::Bess))
            .collect()
    }

    pub fn source_bus(&self, s: SourceRef) -> usize {
        match s {
            SourceRef::Generator(i) => self.generators[i].bus,
            SourceRef::Bess(i) => self.bess_units[i].bus,
        }
    }

    pub fn source_cost(&self, s: SourceRef) -> QuadraticCost {
        match s {
            SourceRef::Generator(i) => self.generators[i].cost,
            SourceRef::Bess(i) => self.bess_units[i].cost,
        }
    }

    pub fn has_source(&self, s: SourceRef) -> bool {
        match s {
            SourceRef::Generator(i) => i < self.generators.len(),
            SourceRef::Bess(i) => i < self.bess_units.len(),
        }
    }

    /// Source attached to each bus, if any.
    pub fn source_at_bus(&self) -> Vec<Option<SourceRef>> {
        let mut out = vec![None; self.n_bus()];
        for s in self.sources() {
            out[self.source_bus(s)] = Some(s);
        }
        out
    }

    /// Checks every structural invariant of the model.
    pub fn validate(&self) -> Result<(), CaseError> {
        let invalid = |msg: String| Err(CaseError::Invalid(msg));
        let n = self.n_bus();
        if n == 0 {
            return invalid("network has no buses".into());
        }
        if !(self.base_mva > 0.0 && self.base_mva.is_finite()) {
            return invalid(format!("base_mva must be positive, got {}", self.base_mva));
        }
        if self.reference_bus >= n {
            return invalid(format!("unresolved bus: reference bus {}", self.reference_bus + 1));
        }
        for (k, b) in self.buses.iter().enumerate() {
            if b.id != k {
                return invalid(format!("bus at position {k} has internal id {}", b.id));
            }
            if !(b.v_min_nominal > 0.0 && b.v_min_nominal <= b.v_max_nominal) {
                return invalid(format!(
                    "bus {}: require 0 < v_min <= v_max, got [{}, {}]",
                    k + 1,
                    b.v_min_nominal,
                    b.v_max_nominal
                ));
            }
            if !b.p_load.is_finite() || !b.q_load.is_finite() || !b.v_max_nominal.is_finite() {
                return invalid(format!("bus {}: non-finite load or voltage limit", k + 1));
            }
        }
        for (i, br) in self.branches.iter().enumerate() {
            if br.from_bus >= n || br.to_bus >= n {
                return invalid(format!(
                    "unresolved bus: branch {} references bus {}",
                    i + 1,
                    br.from_bus.max(br.to_bus) + 1
                ));
            }
            if br.from_bus == br.to_bus {
                return invalid(format!("branch {} is a self-loop", i + 1));
            }
            if !(br.s_max > 0.0) {
                return invalid(format!("branch {}: s_max must be positive", i + 1));
            }
            if !(br.r.is_finite() && br.x.is_finite()) || (br.r == 0.0 && br.x == 0.0) {
                return invalid(format!("branch {}: impedance must be finite and nonzero", i + 1));
            }
        }
        if self.generators.is_empty() {
            return invalid("network needs at least one generator".into());
        }
        for (i, g) in self.generators.iter().enumerate() {
            if g.bus >= n {
                return invalid(format!("unresolved bus: generator G{} at bus {}", i + 1, g.bus + 1));
            }
            if g.p_min_rated > g.p_max_rated || g.q_min_rated > g.q_max_rated {
                return invalid(format!("generator G{}: lower limit above upper limit", i + 1));
            }
            if g.cost.c2 < 0.0 {
                return invalid(format!("generator G{}: c2 must be nonnegative", i + 1));
            }
        }
        for (i, b) in self.bess_units.iter().enumerate() {
            if b.bus >= n {
                return invalid(format!("unresolved bus: BESS B{} at bus {}", i + 1, b.bus + 1));
            }
            let ordered = 0.0 <= b.e_min_rated
                && b.e_min_rated <= b.e_now
                && b.e_now <= b.e_max_rated
                && b.e_max_rated <= b.e_rated;
            if !ordered {
                return invalid(format!("BESS B{}: require 0 <= e_min <= e_now <= e_max <= e_rated", i + 1));
            }
            if !(b.p_max_rated > 0.0) || !(b.horizon > 0.0) {
                return invalid(format!("BESS B{}: p_max and horizon must be positive", i + 1));
            }
            if b.cost.c2 < 0.0 {
                return invalid(format!("BESS B{}: c2 must be nonnegative", i + 1));
            }
        }
        let mut seen = vec![None; n];
        for s in self.sources() {
            let k = self.source_bus(s);
            if let Some(prev) = seen[k] {
                return invalid(format!("bus {} hosts more than one source ({prev} and {s})", k + 1));
            }
            seen[k] = Some(s);
        }
        // Connectivity from the reference bus.
        let mut adj = vec![Vec::new(); n];
        for br in &self.branches {
            adj[br.from_bus].push(br.to_bus);
            adj[br.to_bus].push(br.from_bus);
        }
        let mut reached = vec![false; n];
        reached[self.reference_bus] = true;
        let mut queue = VecDeque::from([self.reference_bus]);
        while let Some(k) = queue.pop_front() {
            for &l in &adj[k] {
                if !reached[l] {
                    reached[l] = true;
                    queue.push_back(l);
                }
            }
        }
        if let Some(k) = reached.iter().position(|r| !r) {
            return invalid(format!("bus {} is not reachable from the reference bus", k + 1));
        }
        Ok(())
    }

    /// Copy with every load multiplied by `sf`.
    pub fn scaled_loads(&self, sf: f64) -> Network {
        let mut n = self.clone();
        for b in &mut n.buses {
            b.p_load *= sf;
            b.q_load *= sf;
        }
        n
    }
}

/// Dense complex bus admittance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    pub entries: DMatrix<Complex64>,
}

impl AdmittanceMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.entries[(k, l)]
    }

    pub fn row_sum(&self, k: usize) -> Complex64 {
        self.entries.row(k).iter().sum()
    }
}

pub fn build_admittance(network: &Network) -> AdmittanceMatrix {
    let n = network.n_bus();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in &network.branches {
        let (k, l) = (br.from_bus, br.to_bus);
        let ykl = br.series_admittance();
        y[(k, k)] += ykl;
        y[(l, l)] += ykl;
        y[(k, l)] -= ykl;
        y[(l, k)] -= ykl;
    }
    AdmittanceMatrix { entries: y }
}

/// Net complex injection `S_k = V_k conj((Y V)_k)` at every bus.
pub fn complex_injection(network: &Network, voltages: &[Complex64]) -> Vec<Complex64> {
    injection_with(&build_admittance(network), voltages)
}

pub fn injection_with(y: &AdmittanceMatrix, voltages: &[Complex64]) -> Vec<Complex64> {
    let n = y.n();
    assert_eq!(voltages.len(), n, "voltage vector length must equal bus count");
    (0..n)
        .map(|k| {
            let current: Complex64 = (0..n).map(|l| y.get(k, l) * voltages[l]).sum();
            voltages[k] * current.conj()
        })
        .collect()
}

/// Sending-end flow `S_kl = conj(y) V_k conj(V_k) - conj(y) V_k conj(V_l)`.
pub fn branch_flow(y_kl: Complex64, vk: Complex64, vl: Complex64) -> Complex64 {
    y_kl.conj() * vk * vk.conj() - y_kl.conj() * vk * vl.conj()
}

// ---------------------------------------------------------------------------
// Case-file schema (physical units, 1-based ids).

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseBus {
    id: usize,
    v_min: f64,
    v_max: f64,
    p_load: f64,
    q_load: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseBranch {
    from: usize,
    to: usize,
    r: f64,
    x: f64,
    s_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseGenerator {
    bus: usize,
    p_min: f64,
    p_max: f64,
    q_min: f64,
    q_max: f64,
    c2: f64,
    c1: f64,
    c0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseBess {
    bus: usize,
    p_max: f64,
    e_rated: f64,
    e_now: f64,
    e_min: f64,
    e_max: f64,
    horizon_h: f64,
    c2: f64,
    c1: f64,
    c0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    base_mva: f64,
    reference_bus: usize,
    buses: Vec<CaseBus>,
    #[serde(default)]
    branches: Vec<CaseBranch>,
    generators: Vec<CaseGenerator>,
    #[serde(default)]
    bess: Vec<CaseBess>,
}

fn bus_index(id: usize, n: usize, what: &str) -> Result<usize, CaseError> {
    if id == 0 || id > n {
        Err(CaseError::Invalid(format!("unresolved bus: {what} references bus {id}")))
    } else {
        Ok(id - 1)
    }
}

fn cost_to_pu(c2: f64, c1: f64, c0: f64, base: f64) -> QuadraticCost {
    QuadraticCost { c2: c2 * base * base, c1: c1 * base, c0 }
}

impl CaseFile {
    fn into_network(self) -> Result<Network, CaseError> {
        let base = self.base_mva;
        if !(base > 0.0 && base.is_finite()) {
            return Err(CaseError::Invalid(format!("base_mva must be positive, got {base}")));
        }
        let n = self.buses.len();
        let mut slots: Vec<Option<Bus>> = vec![None; n];
        for b in &self.buses {
            let k = bus_index(b.id, n, "bus list")
                .map_err(|_| CaseError::Invalid(format!("bus ids must be 1..{n}, found {}", b.id)))?;
            if slots[k].is_some() {
                return Err(CaseError::Invalid(format!("duplicate bus id {}", b.id)));
            }
            slots[k] = Some(Bus {
                id: k,
                v_min_nominal: b.v_min,
                v_max_nominal: b.v_max,
                p_load: b.p_load / base,
                q_load: b.q_load / base,
            });
        }
        let buses: Vec<Bus> = slots.into_iter().map(|b| b.expect("all ids 1..n seen")).collect();
        let branches = self
            .branches
            .iter()
            .enumerate()
            .map(|(i, br)| {
                let what = format!("branch {}", i + 1);
                Ok(Branch {
                    from_bus: bus_index(br.from, n, &what)?,
                    to_bus: bus_index(br.to, n, &what)?,
                    r: br.r,
                    x: br.x,
                    s_max: br.s_max / base,
                })
            })
            .collect::<Result<Vec<_>, CaseError>>()?;
        let generators = self
            .generators
            .iter()
            .enumerate()
            .map(|(i, g)| {
                Ok(Generator {
                    bus: bus_index(g.bus, n, &format!("generator G{}", i + 1))?,
                    p_min_rated: g.p_min / base,
                    p_max_rated: g.p_max / base,
                    q_min_rated: g.q_min / base,
                    q_max_rated: g.q_max / base,
                    cost: cost_to_pu(g.c2, g.c1, g.c0, base),
                })
            })
            .collect::<Result<Vec<_>, CaseError>>()?;
        let bess_units = self
            .bess
            .iter()
            .enumerate()
            .map(|(i, b)| {
                Ok(BessUnit {
                    bus: bus_index(b.bus, n, &format!("BESS B{}", i + 1))?,
                    p_max_rated: b.p_max / base,
                    e_rated: b.e_rated / base,
                    e_now: b.e_now / base,
                    e_min_rated: b.e_min / base,
                    e_max_rated: b.e_max / base,
                    horizon: b.horizon_h,
                    cost: cost_to_pu(b.c2, b.c1, b.c0, base),
                })
            })
            .collect::<Result<Vec<_>, CaseError>>()?;
        let network = Network {
            reference_bus: bus_index(self.reference_bus, n, "reference_bus")?,
            buses,
            branches,
            generators,
            bess_units,
            base_mva: base,
        };
        network.validate()?;
        Ok(network)
    }

    fn from_network(net: &Network) -> Self {
        let base = net.base_mva;
        CaseFile {
            base_mva: base,
            reference_bus: net.reference_bus + 1,
            buses: net
                .buses
                .iter()
                .map(|b| CaseBus {
                    id: b.id + 1,
                    v_min: b.v_min_nominal,
                    v_max: b.v_max_nominal,
                    p_load: b.p_load * base,
                    q_load: b.q_load * base,
                })
                .collect(),
            branches: net
                .branches
                .iter()
                .map(|br| CaseBranch {
                    from: br.from_bus + 1,
                    to: br.to_bus + 1,
                    r: br.r,
                    x: br.x,
                    s_max: br.s_max * base,
                })
                .collect(),
            generators: net
                .generators
                .iter()
                .map(|g| CaseGenerator {
                    bus: g.bus + 1,
                    p_min: g.p_min_rated * base,
                    p_max: g.p_max_rated * base,
                    q_min: g.q_min_rated * base,
                    q_max: g.q_max_rated * base,
                    c2: g.cost.c2 / (base * base),
                    c1: g.cost.c1 / base,
                    c0: g.cost.c0,
                })
                .collect(),
            bess: net
                .bess_units
                .iter()
                .map(|b| CaseBess {
                    bus: b.bus + 1,
                    p_max: b.p_max_rated * base,
                    e_rated: b.e_rated * base,
                    e_now: b.e_now * base,
                    e_min: b.e_min_rated * base,
                    e_max: b.e_max_rated * base,
                    horizon_h: b.horizon,
                    c2: b.cost.c2 / (base * base),
                    c1: b.cost.c1 / base,
                    c0: b.cost.c0,
                })
                .collect(),
        }
    }
}

/// Parses and validates a case from JSON text.
pub fn parse_case(text: &str) -> Result<Network, CaseError> {
    let file: CaseFile = serde_json::from_str(text).map_err(|e| CaseError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.into_network()
}

pub fn load_case(path: impl AsRef<Path>) -> Result<Network, CaseError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| CaseError::Io { path: path.display().to_string(), source })?;
    parse_case(&text)
}

pub fn case_to_json(network: &Network) -> String {
    serde_json::to_string_pretty(&CaseFile::from_network(network)).expect("case serializes")
}

pub fn save_case(network: &Network, path: impl AsRef<Path>) -> Result<(), CaseError> {
    let path = path.as_ref();
    std::fs::write(path, case_to_json(network) + "\n")
        .map_err(|source| CaseError::Io { path: path.display().to_string(), source })
}

/// The shipped 3-bus microgrid case.
pub const MG3_JSON: &str = include_str!("../../../cases/mg3.json");

pub fn mg3() -> Network {
    parse_case(MG3_JSON).expect("shipped mg3 case is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_bus(r: f64, x: f64) -> Network {
        Network {
            buses: (0..2)
                .map(|id| Bus { id, v_min_nominal: 0.9, v_max_nominal: 1.1, p_load: 0.0, q_load: 0.0 })
                .collect(),
            branches: vec![Branch { from_bus: 0, to_bus: 1, r, x, s_max: 5.0 }],
            generators: vec![Generator {
                bus: 0,
                p_min_rated: 0.0,
                p_max_rated: 2.0,
                q_min_rated: -1.0,
                q_max_rated: 1.0,
                cost: QuadraticCost { c2: 1.0, c1: 1.0, c0: 0.0 },
            }],
            bess_units: vec![],
            base_mva: 1.0,
            reference_bus: 0,
        }
    }

    #[test]
    fn two_bus_admittance() {
        // y = 1 - j10  <=>  z = 1/(1 - j10) = (1 + j10)/101
        let net = two_bus(1.0 / 101.0, 10.0 / 101.0);
        let y = build_admittance(&net);
        let expect = Complex64::new(1.0, -10.0);
        assert_relative_eq!(y.get(0, 0).re, expect.re, epsilon = 1e-12);
        assert_relative_eq!(y.get(0, 0).im, expect.im, epsilon = 1e-12);
        assert_relative_eq!(y.get(0, 1).re, -expect.re, epsilon = 1e-12);
        assert_relative_eq!(y.get(0, 1).im, -expect.im, epsilon = 1e-12);
        assert_eq!(y.get(0, 1), y.get(1, 0));
        assert_eq!(y.get(1, 1), y.get(0, 0));
    }

    #[test]
    fn triangle_with_equal_branches() {
        let mut net = two_bus(0.1, 0.2);
        net.buses.push(Bus { id: 2, v_min_nominal: 0.9, v_max_nominal: 1.1, p_load: 0.0, q_load: 0.0 });
        net.branches.push(Branch { from_bus: 1, to_bus: 2, r: 0.1, x: 0.2, s_max: 1.0 });
        net.branches.push(Branch { from_bus: 2, to_bus: 0, r: 0.1, x: 0.2, s_max: 1.0 });
        let y = build_admittance(&net);
        let ybr = net.branches[0].series_admittance();
        for k in 0..3 {
            assert!((y.get(k, k) - ybr * 2.0).norm() < 1e-12);
            for l in 0..3 {
                if k != l {
                    assert!((y.get(k, l) + ybr).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn parallel_branches_sum_into_y() {
        let mut net = two_bus(0.0, 0.1);
        net.branches.push(Branch { from_bus: 1, to_bus: 0, r: 0.0, x: 0.2, s_max: 1.0 });
        let y = build_admittance(&net);
        assert!((y.get(0, 1) - Complex64::new(0.0, 15.0)).norm() < 1e-12);
        assert_eq!(net.branches.len(), 2);
    }

    #[test]
    fn mg3_structure_and_zero_row_sums() {
        let net = mg3();
        assert_eq!(net.n_bus(), 3);
        assert_eq!(net.branches.len(), 3);
        assert_eq!(net.generators.len(), 2);
        assert_eq!(net.bess_units.len(), 1);
        let y = build_admittance(&net);
        for k in 0..3 {
            assert!(y.row_sum(k).norm() < 1e-12);
        }
    }

    #[test]
    fn flat_voltage_gives_zero_injection() {
        let net = mg3();
        let v = vec![Complex64::new(1.0, 0.0); 3];
        for s in complex_injection(&net, &v) {
            assert!(s.norm() < 1e-12);
        }
    }

    #[test]
    fn two_bus_angle_injection() {
        // y = -j10, V2 = 1 at -0.1 rad: P1 = 10 sin(0.1)
        let net = two_bus(0.0, 0.1);
        let v = vec![Complex64::new(1.0, 0.0), Complex64::from_polar(1.0, -0.1)];
        let s = complex_injection(&net, &v);
        assert_relative_eq!(s[0].re, 10.0 * 0.1_f64.sin(), epsilon = 1e-12);
        assert_relative_eq!(s[0].re, 0.9983341664682815, epsilon = 1e-12);
    }

    #[test]
    fn rejects_unresolved_bus() {
        let text = MG3_JSON.replacen("\"to\": 3", "\"to\": 99", 1);
        let err = parse_case(&text).unwrap_err();
        assert!(err.to_string().contains("unresolved bus"), "{err}");
    }

    #[test]
    fn rejects_unknown_keys_with_position() {
        let text = MG3_JSON.replacen("\"base_mva\"", "\"colour\": 1, \"base_mva\"", 1);
        match parse_case(&text).unwrap_err() {
            CaseError::Parse { line, message, .. } => {
                assert!(line >= 1);
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn single_bus_case_is_valid() {
        let text = r#"{"base_mva": 1, "reference_bus": 1,
            "buses": [{"id": 1, "v_min": 0.95, "v_max": 1.05, "p_load": 0.5, "q_load": 0.0}],
            "branches": [],
            "generators": [{"bus": 1, "p_min": 0, "p_max": 1, "q_min": -1, "q_max": 1,
                            "c2": 1, "c1": 2, "c0": 0}]}"#;
        let net = parse_case(text).unwrap();
        assert_eq!(net.n_bus(), 1);
        assert!(net.branches.is_empty());
    }

    #[test]
    fn rejects_disconnected_and_duplicate_sources() {
        let mut net = two_bus(0.0, 0.1);
        net.branches.clear();
        assert!(net.validate().unwrap_err().to_string().contains("not reachable"));
        let mut net = two_bus(0.0, 0.1);
        net.generators.push(net.generators[0].clone());
        assert!(net.validate().unwrap_err().to_string().contains("more than one source"));
    }

    #[test]
    fn per_unit_conversion() {
        let net = mg3();
        let file: serde_json::Value = serde_json::from_str(MG3_JSON).unwrap();
        let base = file["base_mva"].as_f64().unwrap();
        let p3 = file["buses"][2]["p_load"].as_f64().unwrap();
        assert_relative_eq!(net.buses[2].p_load, p3 / base, epsilon = 1e-15);
        let c2 = file["generators"][0]["c2"].as_f64().unwrap();
        assert_relative_eq!(net.generators[0].cost.c2, c2 * base * base, epsilon = 1e-12);
    }

    #[test]
    fn source_names_round_trip() {
        for s in [SourceRef::Generator(0), SourceRef::Generator(11), SourceRef::Bess(2)] {
            assert_eq!(SourceRef::parse(&s.name()), Some(s));
        }
        assert_eq!(SourceRef::parse("g2"), Some(SourceRef::Generator(1)));
        assert_eq!(SourceRef::parse("G0"), None);
        assert_eq!(SourceRef::parse("X1"), None);
    }
}
