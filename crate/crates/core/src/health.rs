//! Health condition indices to derated operating limits.
//!
//! Two mappings are offered. `Linear` scales capability by `beta(h) = h`.
//! `Table` interpolates the fault tables' "P range" / "V range" columns
//! through the midpoints of their HCI ranges.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::HealthError;
use crate::network::{Network, SourceRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquipmentKind {
    Generator,
    Battery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultTableRow {
    pub fault_case: String,
    pub severity_rul: f64,
    pub p_range: f64,
    pub v_range: f64,
    pub hci_lo: f64,
    pub hci_hi: f64,
}

impl FaultTableRow {
    fn new(fault_case: &str, severity_rul: f64, p_range: f64, v_range: f64, hci_lo: f64, hci_hi: f64) -> Self {
        Self { fault_case: fault_case.to_string(), severity_rul, p_range, v_range, hci_lo, hci_hi }
    }

    pub fn hci_midpoint(&self) -> f64 {
        0.5 * (self.hci_lo + self.hci_hi)
    }

    fn validate(&self) -> Result<(), HealthError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let ok = unit(self.hci_lo)
            && unit(self.hci_hi)
            && self.hci_lo <= self.hci_hi
            && unit(self.p_range)
            && unit(self.v_range)
            && self.severity_rul >= 0.0
            && self.severity_rul.is_finite();
        if ok {
            Ok(())
        } else {
            Err(HealthError::InvalidTable(format!("row `{}` violates range invariants", self.fault_case)))
        }
    }
}

fn normalize(name: &str) -> String {
    name.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultTable {
    pub kind: EquipmentKind,
    pub rows: Vec<FaultTableRow>,
}

impl FaultTable {
    pub fn new(kind: EquipmentKind, rows: Vec<FaultTableRow>) -> Result<Self, HealthError> {
        if rows.is_empty() {
            return Err(HealthError::InvalidTable("table has no rows".into()));
        }
        for r in &rows {
            r.validate()?;
        }
        Ok(Self { kind, rows })
    }

    /// Row lookup ignoring case, spaces and punctuation.
    pub fn row(&self, fault_case: &str) -> Result<&FaultTableRow, HealthError> {
        let key = normalize(fault_case);
        self.rows
            .iter()
            .find(|r| normalize(&r.fault_case) == key)
            .ok_or_else(|| HealthError::UnknownFault(fault_case.to_string()))
    }

    pub fn interpolant(&self) -> Interpolant {
        Interpolant::from_rows(&self.rows)
    }
}

/// Piecewise-linear maps `h -> P range` and `h -> V range`.
///
/// Knots are sorted by HCI; going toward lower health the ranges are
/// forced nondecreasing with a running maximum. Outside the knot span the
/// end values are held.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    /// `(hci, p_range, v_range)` with strictly increasing `hci`.
    pub knots: Vec<(f64, f64, f64)>,
}

impl Interpolant {
    fn from_rows(rows: &[FaultTableRow]) -> Self {
        let mut pts: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.hci_midpoint(), r.p_range, r.v_range)).collect();
        pts.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut knots: Vec<(f64, f64, f64)> = Vec::with_capacity(pts.len());
        let (mut p_run, mut v_run) = (0.0_f64, 0.0_f64);
        for (h, p, v) in pts {
            p_run = p_run.max(p);
            v_run = v_run.max(v);
            match knots.last_mut() {
                Some(last) if last.0 == h => {
                    last.1 = p_run;
                    last.2 = v_run;
                }
                _ => knots.push((h, p_run, v_run)),
            }
        }
        knots.reverse();
        Self { knots }
    }

    fn eval(&self, h: f64, pick: impl Fn(&(f64, f64, f64)) -> f64) -> f64 {
        let first = &self.knots[0];
        let last = &self.knots[self.knots.len() - 1];
        if h <= first.0 {
            return pick(first);
        }
        if h >= last.0 {
            return pick(last);
        }
        let i = self.knots.partition_point(|k| k.0 <= h);
        let (a, b) = (&self.knots[i - 1], &self.knots[i]);
        let t = (h - a.0) / (b.0 - a.0);
        pick(a) + t * (pick(b) - pick(a))
    }

    pub fn p_range(&self, h: f64) -> f64 {
        self.eval(h, |k| k.1)
    }

    pub fn v_range(&self, h: f64) -> f64 {
        self.eval(h, |k| k.2)
    }
}

/// Health-to-capability hook; the identity.
pub fn beta(h: f64) -> Result<f64, HealthError> {
    if (0.0..=1.0).contains(&h) {
        Ok(h)
    } else {
        Err(HealthError::Domain(h))
    }
}

/// HCI at fractional position `within_range` inside a row's range
/// (0 = least severe end).
pub fn hci_from_fault(table: &FaultTable, fault_case: &str, within_range: f64) -> Result<f64, HealthError> {
    let row = table.row(fault_case)?;
    let w = within_range.clamp(0.0, 1.0);
    Ok(row.hci_hi + w * (row.hci_lo - row.hci_hi))
}

/// Built-in generator and battery tables.
pub fn table_defaults() -> (FaultTable, FaultTable) {
    let r = FaultTableRow::new;
    let generator = vec![
        r("Healthy", 0.0, 0.0, 0.0, 1.0, 1.0),
        r("Magnet fault", 0.5, 0.06, 0.075, 0.96, 0.99),
        r("Static eccentricity", 0.8, 0.08, 0.11, 0.94, 0.96),
        r("Dynamic eccentricity", 0.9, 0.08, 0.12, 0.93, 0.95),
        r("Mixed eccentricity", 0.91, 0.07, 0.135, 0.92, 0.92),
        r("Turn-turn short-circuit", 1.0, 0.1, 0.15, 0.86, 0.9),
        r("Phase-Ground", 3.0, 0.49, 0.469, 0.79, 0.79),
        r("Open-Phase", 4.0, 0.59, 0.527, 0.76, 0.76),
        r("Phase-Phase", 5.0, 0.69, 0.587, 0.65, 0.65),
        r("Three-phase open", 7.0, 0.75, 0.827, 0.51, 0.51),
        r("Bolted short-circuited", 10.0, 0.89, 0.934, 0.0, 0.0),
    ];
    let battery = vec![
        r("Healthy", 0.0, 0.0, 0.0, 0.9, 0.9),
        r("External short circuit", 0.5, 0.26, 0.31, 0.81, 0.81),
        r("Internal short circuit", 0.9, 0.91, 0.92, 0.53, 0.53),
        r("Thermal runaway", 1.0, 0.96, 0.98, 0.0, 0.0),
    ];
    (
        FaultTable { kind: EquipmentKind::Generator, rows: generator },
        FaultTable { kind: EquipmentKind::Battery, rows: battery },
    )
}

/// The table pair in force for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultTables {
    pub generator: FaultTable,
    pub battery: FaultTable,
}

impl Default for FaultTables {
    fn default() -> Self {
        let (generator, battery) = table_defaults();
        Self { generator, battery }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableOverride {
    generator: Option<Vec<FaultTableRow>>,
    battery: Option<Vec<FaultTableRow>>,
}

impl FaultTables {
    /// Built-ins overridden per equipment kind by a JSON object
    /// `{"generator": [rows], "battery": [rows]}` (either key optional).
    pub fn from_json(text: &str) -> Result<Self, HealthError> {
        let o: TableOverride = serde_json::from_str(text)?;
        let mut out = Self::default();
        if let Some(rows) = o.generator {
            out.generator = FaultTable::new(EquipmentKind::Generator, rows)?;
        }
        if let Some(rows) = o.battery {
            out.battery = FaultTable::new(EquipmentKind::Battery, rows)?;
        }
        Ok(out)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, HealthError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| HealthError::InvalidTable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn for_kind(&self, kind: EquipmentKind) -> &FaultTable {
        match kind {
            EquipmentKind::Generator => &self.generator,
            EquipmentKind::Battery => &self.battery,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MappingMode {
    Linear,
    Table,
}

impl MappingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MappingMode::Linear => "LINEAR",
            MappingMode::Table => "TABLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthProfile {
    pub equipment: SourceRef,
    pub hci: f64,
    pub fault_case: Option<String>,
    pub mapping_mode: MappingMode,
    /// Tighten the voltage band at the equipment's bus as health falls.
    pub derate_voltage: bool,
}

impl HealthProfile {
    pub fn new(equipment: SourceRef, hci: f64, mapping_mode: MappingMode, derate_voltage: bool) -> Self {
        Self { equipment, hci, fault_case: None, mapping_mode, derate_voltage }
    }
}

/// Limits of one source before or after derating. Generator fields carry
/// `bess_p_max = 0`; battery fields carry `p_* = -/+ bess_p_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeratedLimits {
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub bess_p_max: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub empty_band: bool,
}

impl DeratedLimits {
    pub fn rated(network: &Network, source: SourceRef) -> Self {
        let bus = &network.buses[network.source_bus(source)];
        match source {
            SourceRef::Generator(i) => {
                let g = &network.generators[i];
                Self {
                    p_min: g.p_min_rated,
                    p_max: g.p_max_rated,
                    q_min: g.q_min_rated,
                    q_max: g.q_max_rated,
                    v_min: bus.v_min_nominal,
                    v_max: bus.v_max_nominal,
                    bess_p_max: 0.0,
                    e_min: 0.0,
                    e_max: 0.0,
                    empty_band: false,
                }
            }
            SourceRef::Bess(i) => {
                let b = &network.bess_units[i];
                Self {
                    p_min: -b.p_max_rated,
                    p_max: b.p_max_rated,
                    q_min: -b.p_max_rated,
                    q_max: b.p_max_rated,
                    v_min: bus.v_min_nominal,
                    v_max: bus.v_max_nominal,
                    bess_p_max: b.p_max_rated,
                    e_min: b.e_min_rated,
                    e_max: b.e_max_rated,
                    empty_band: false,
                }
            }
        }
    }
}

/// Applies a health profile to rated limits.
pub fn derate(
    rated: &DeratedLimits,
    profile: &HealthProfile,
    table: &FaultTable,
) -> Result<DeratedLimits, HealthError> {
    let h = beta(profile.hci)?;
    let (factor, v_cut) = match profile.mapping_mode {
        MappingMode::Linear => (h, 1.0 - h),
        MappingMode::Table => {
            let interp = table.interpolant();
            (1.0 - interp.p_range(profile.hci), interp.v_range(profile.hci))
        }
    };
    let mut out = *rated;
    out.p_max = factor * rated.p_max;
    out.bess_p_max = factor * rated.bess_p_max;
    out.q_min = factor * rated.q_min;
    out.q_max = factor * rated.q_max;
    out.p_min = if rated.bess_p_max > 0.0 { -out.bess_p_max } else { rated.p_min.min(out.p_max) };
    if profile.derate_voltage {
        out.v_max = rated.v_max - v_cut * (rated.v_max - rated.v_min);
    }
    out.empty_band = out.v_max < out.v_min;
    Ok(out)
}

/// Per-source limits for a whole network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthLimits {
    pub generators: Vec<DeratedLimits>,
    pub bess: Vec<DeratedLimits>,
}

/// Operating box of one source in the dispatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceBounds {
    pub p_lo: f64,
    pub p_hi: f64,
    pub q_lo: f64,
    pub q_hi: f64,
}

impl HealthLimits {
    pub fn rated(network: &Network) -> Self {
        Self {
            generators: (0..network.generators.len())
                .map(|i| DeratedLimits::rated(network, SourceRef::Generator(i)))
                .collect(),
            bess: (0..network.bess_units.len()).map(|i| DeratedLimits::rated(network, SourceRef::Bess(i))).collect(),
        }
    }

    /// Rated limits with each profile applied to its equipment.
    pub fn compute(network: &Network, profiles: &[HealthProfile], tables: &FaultTables) -> Result<Self, HealthError> {
        let mut out = Self::rated(network);
        for p in profiles {
            if !network.has_source(p.equipment) {
                return Err(HealthError::InvalidTable(format!("no equipment {} in network", p.equipment)));
            }
            let slot = match p.equipment {
                SourceRef::Generator(i) => &mut out.generators[i],
                SourceRef::Bess(i) => &mut out.bess[i],
            };
            let kind = match p.equipment {
                SourceRef::Generator(_) => EquipmentKind::Generator,
                SourceRef::Bess(_) => EquipmentKind::Battery,
            };
            *slot = derate(slot, p, tables.for_kind(kind))?;
        }
        Ok(out)
    }

    pub fn get(&self, s: SourceRef) -> &DeratedLimits {
        match s {
            SourceRef::Generator(i) => &self.generators[i],
            SourceRef::Bess(i) => &self.bess[i],
        }
    }

    /// Voltage band at bus `k`: nominal band intersected with the band of
    /// any source located there.
    pub fn bus_voltage_band(&self, network: &Network, k: usize) -> (f64, f64) {
        let bus = &network.buses[k];
        let (mut lo, mut hi) = (bus.v_min_nominal, bus.v_max_nominal);
        for s in network.sources() {
            if network.source_bus(s) == k {
                let l = self.get(s);
                lo = lo.max(l.v_min);
                hi = hi.min(l.v_max);
            }
        }
        (lo, hi)
    }

    /// Power box of a source. Batteries are additionally limited by the
    /// energy that can be delivered or absorbed over one dispatch interval.
    pub fn source_bounds(&self, network: &Network, s: SourceRef) -> SourceBounds {
        let l = self.get(s);
        match s {
            SourceRef::Generator(_) => SourceBounds { p_lo: l.p_min, p_hi: l.p_max, q_lo: l.q_min, q_hi: l.q_max },
            SourceRef::Bess(i) => {
                let b = &network.bess_units[i];
                let discharge = ((b.e_now - l.e_min) / b.horizon).max(0.0);
                let charge = ((l.e_max - b.e_now) / b.horizon).max(0.0);
                SourceBounds {
                    p_lo: (-l.bess_p_max).max(-charge),
                    p_hi: l.bess_p_max.min(discharge),
                    q_lo: -l.bess_p_max,
                    q_hi: l.bess_p_max,
                }
            }
        }
    }
}
