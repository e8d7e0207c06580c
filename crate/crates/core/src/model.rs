//! Problem instance types: pumped storage units, reservoirs, thermal units,
//! the study horizon and the owner bids used by the legacy market model.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Operating configuration of a pumped storage unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    AllOff,
    Gen,
    Pump,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::AllOff, Mode::Gen, Mode::Pump];

    pub fn index(self) -> usize {
        match self {
            Mode::AllOff => 0,
            Mode::Gen => 1,
            Mode::Pump => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::AllOff => "alloff",
            Mode::Gen => "gen",
            Mode::Pump => "pump",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered pair `(from, to)` of distinct modes.
pub type Transition = (Mode, Mode);

/// Every ordered pair of distinct modes.
pub fn all_transitions() -> Vec<Transition> {
    let mut out = Vec::with_capacity(6);
    for from in Mode::ALL {
        for to in Mode::ALL {
            if from != to {
                out.push((from, to));
            }
        }
    }
    out
}

fn default_transitions() -> Vec<Transition> {
    all_transitions()
}

/// Minimum residence time per mode, in hours.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinUpHours {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub all_off: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump: Option<f64>,
}

impl MinUpHours {
    pub fn get(&self, mode: Mode) -> Option<f64> {
        match mode {
            Mode::AllOff => self.all_off,
            Mode::Gen => self.gen,
            Mode::Pump => self.pump,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PshUnit {
    pub id: String,
    pub reservoir_id: String,
    /// MW
    pub q_gen_min: f64,
    /// MW
    pub q_gen_max: f64,
    /// MW
    pub q_pump_min: f64,
    /// MW
    pub q_pump_max: f64,
    pub eta_gen: f64,
    pub eta_pump: f64,
    #[serde(default = "default_transitions")]
    pub feasible_transitions: Vec<Transition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_up_hours: Option<MinUpHours>,
    #[serde(default = "default_initial_mode")]
    pub initial_mode: Mode,
}

fn default_initial_mode() -> Mode {
    Mode::AllOff
}

impl PshUnit {
    pub fn allows(&self, from: Mode, to: Mode) -> bool {
        self.feasible_transitions.contains(&(from, to))
    }

    /// Pump runs at a single fixed level when committed.
    pub fn is_block_loaded(&self) -> bool {
        self.q_pump_min == self.q_pump_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reservoir {
    pub id: String,
    /// MWh
    pub e_min: f64,
    /// MWh
    pub e_max: f64,
    /// MWh, state of charge before the first interval.
    pub e_initial: f64,
    /// MWh, required state of charge after the last interval.
    pub e_final: f64,
    /// Max units that may switch into pumping in one interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_start_limit: Option<u32>,
    /// Forbid one unit pumping while another generates.
    #[serde(default)]
    pub plant_exclusive: bool,
}

/// One block of a convex piecewise-linear cost curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSegment {
    /// $/MWh
    pub price: f64,
    /// MW
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalUnit {
    pub id: String,
    /// MW
    pub q_min: f64,
    /// MW
    pub q_max: f64,
    pub cost_segments: Vec<CostSegment>,
}

impl ThermalUnit {
    /// Single-block unit with constant marginal cost over `[0, capacity]`.
    pub fn constant(id: impl Into<String>, capacity: f64, price: f64) -> Self {
        ThermalUnit {
            id: id.into(),
            q_min: 0.0,
            q_max: capacity,
            cost_segments: vec![CostSegment {
                price,
                width: capacity,
            }],
        }
    }

    /// Hourly cost of producing `q` MW, evaluated on the segment curve. The
    /// must-run block below `q_min` is priced at the first segment.
    pub fn cost_rate(&self, q: f64) -> f64 {
        let first = self.cost_segments.first().map_or(0.0, |s| s.price);
        let mut cost = first * self.q_min;
        let mut rest = (q - self.q_min).max(0.0);
        for seg in &self.cost_segments {
            let take = rest.min(seg.width);
            cost += take * seg.price;
            rest -= take;
            if rest <= 0.0 {
                break;
            }
        }
        cost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    pub n_intervals: usize,
    #[serde(default = "default_dt")]
    pub dt_hours: f64,
    /// MW per interval
    pub net_load: Vec<f64>,
}

fn default_dt() -> f64 {
    1.0
}

impl Horizon {
    pub fn hourly(net_load: Vec<f64>) -> Self {
        Horizon {
            n_intervals: net_load.len(),
            dt_hours: 1.0,
            net_load,
        }
    }
}

/// A price that is either flat or given per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriceProfile {
    Flat(f64),
    PerInterval(Vec<f64>),
}

impl PriceProfile {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            PriceProfile::Flat(p) => *p,
            PriceProfile::PerInterval(v) => v[t],
        }
    }

    fn check(&self, n: usize) -> Result<(), String> {
        match self {
            PriceProfile::Flat(p) if p.is_finite() => Ok(()),
            PriceProfile::Flat(_) => Err("price is not finite".into()),
            PriceProfile::PerInterval(v) if v.len() != n => {
                Err(format!("has {} entries, horizon has {n}", v.len()))
            }
            PriceProfile::PerInterval(v) if v.iter().any(|p| !p.is_finite()) => {
                Err("price is not finite".into())
            }
            PriceProfile::PerInterval(_) => Ok(()),
        }
    }
}

/// Owner-submitted offer/bid for the legacy clearing model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegacyBid {
    pub psh_id: String,
    /// $/MWh offered for generation.
    pub gen_offer_price: PriceProfile,
    /// $/MWh the owner is willing to pay for pumping energy.
    pub pump_bid_price: PriceProfile,
    pub pump_window: BTreeSet<usize>,
    pub gen_window: BTreeSet<usize>,
    /// MWh
    pub daily_max_gen: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub psh_units: Vec<PshUnit>,
    pub reservoirs: Vec<Reservoir>,
    pub thermal_units: Vec<ThermalUnit>,
    pub horizon: Horizon,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legacy_bids: Option<Vec<LegacyBid>>,
}

/// One failed invariant, naming the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("duplicate id `{id}` in {collection}")]
    DuplicateId {
        collection: &'static str,
        id: String,
    },
    #[error("{field} references unknown id `{target}`")]
    DanglingReference { field: String, target: String },
    #[error("{field}: {detail}")]
    BoundViolation { field: String, detail: String },
    #[error("{field} = {value} is outside (0, 1]")]
    EfficiencyOutOfRange { field: String, value: f64 },
}

impl Violation {
    pub fn field(&self) -> &str {
        match self {
            Violation::DuplicateId { collection, .. } => collection,
            Violation::DanglingReference { field, .. }
            | Violation::BoundViolation { field, .. }
            | Violation::EfficiencyOutOfRange { field, .. } => field,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("case failed validation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationError(pub Vec<Violation>);

/// A case whose invariants have been checked. Only obtainable through
/// [`validate_case`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedCase(Case);

impl ValidatedCase {
    pub fn case(&self) -> &Case {
        &self.0
    }

    pub fn into_inner(self) -> Case {
        self.0
    }

    pub fn n_intervals(&self) -> usize {
        self.0.horizon.n_intervals
    }

    pub fn dt(&self) -> f64 {
        self.0.horizon.dt_hours
    }

    pub fn reservoir(&self, id: &str) -> &Reservoir {
        self.0
            .reservoirs
            .iter()
            .find(|r| r.id == id)
            .expect("validated reference")
    }

    /// Units drawing on the given reservoir, in case order.
    pub fn units_of<'a>(
        &'a self,
        reservoir_id: &'a str,
    ) -> impl Iterator<Item = (usize, &'a PshUnit)> + 'a {
        self.0
            .psh_units
            .iter()
            .enumerate()
            .filter(move |(_, u)| u.reservoir_id == reservoir_id)
    }

    pub fn bid_for(&self, psh_id: &str) -> Option<&LegacyBid> {
        self.0
            .legacy_bids
            .as_ref()?
            .iter()
            .find(|b| b.psh_id == psh_id)
    }
}

impl std::ops::Deref for ValidatedCase {
    type Target = Case;

    fn deref(&self) -> &Case {
        &self.0
    }
}

fn check_unique<'a>(
    collection: &'static str,
    ids: impl Iterator<Item = &'a str>,
    out: &mut Vec<Violation>,
) {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            out.push(Violation::DuplicateId {
                collection,
                id: id.to_string(),
            });
        }
    }
}

fn bound(field: String, detail: impl Into<String>) -> Violation {
    Violation::BoundViolation {
        field,
        detail: detail.into(),
    }
}

fn finite_nonneg(field: String, v: f64, out: &mut Vec<Violation>) {
    if !v.is_finite() || v < 0.0 {
        out.push(bound(field, format!("{v} must be finite and non-negative")));
    }
}

/// Check every type invariant of `case`. Returns all violations, not just the
/// first one.
pub fn validate_case(case: Case) -> Result<ValidatedCase, ValidationError> {
    let mut v = Vec::new();

    check_unique(
        "psh_units",
        case.psh_units.iter().map(|u| u.id.as_str()),
        &mut v,
    );
    check_unique(
        "reservoirs",
        case.reservoirs.iter().map(|r| r.id.as_str()),
        &mut v,
    );
    check_unique(
        "thermal_units",
        case.thermal_units.iter().map(|g| g.id.as_str()),
        &mut v,
    );
    // psh and thermal ids share the unit namespace
    check_unique(
        "units",
        case.psh_units
            .iter()
            .map(|u| u.id.as_str())
            .chain(case.thermal_units.iter().map(|g| g.id.as_str())),
        &mut v,
    );

    let h = &case.horizon;
    if h.n_intervals == 0 {
        v.push(bound("horizon.n_intervals".into(), "must be at least 1"));
    }
    if !(h.dt_hours.is_finite() && h.dt_hours > 0.0) {
        v.push(bound(
            "horizon.dt_hours".into(),
            format!("{} must be positive", h.dt_hours),
        ));
    }
    if h.net_load.len() != h.n_intervals {
        v.push(bound(
            "horizon.net_load".into(),
            format!(
                "has {} entries, n_intervals is {}",
                h.net_load.len(),
                h.n_intervals
            ),
        ));
    }
    if let Some(t) = h.net_load.iter().position(|d| !d.is_finite()) {
        v.push(bound(format!("horizon.net_load[{t}]"), "must be finite"));
    }

    let reservoir_ids: HashSet<&str> = case.reservoirs.iter().map(|r| r.id.as_str()).collect();
    for (i, u) in case.psh_units.iter().enumerate() {
        let f = |name: &str| format!("psh_units[{i}].{name}");
        if !reservoir_ids.contains(u.reservoir_id.as_str()) {
            v.push(Violation::DanglingReference {
                field: f("reservoir_id"),
                target: u.reservoir_id.clone(),
            });
        }
        for (name, eta) in [("eta_gen", u.eta_gen), ("eta_pump", u.eta_pump)] {
            if !(eta > 0.0 && eta <= 1.0) {
                v.push(Violation::EfficiencyOutOfRange {
                    field: f(name),
                    value: eta,
                });
            }
        }
        for (name, val) in [
            ("q_gen_min", u.q_gen_min),
            ("q_gen_max", u.q_gen_max),
            ("q_pump_min", u.q_pump_min),
            ("q_pump_max", u.q_pump_max),
        ] {
            finite_nonneg(f(name), val, &mut v);
        }
        if u.q_gen_min > u.q_gen_max {
            v.push(bound(
                f("q_gen_min"),
                format!("{} exceeds q_gen_max {}", u.q_gen_min, u.q_gen_max),
            ));
        }
        if u.q_pump_min > u.q_pump_max {
            v.push(bound(
                f("q_pump_min"),
                format!("{} exceeds q_pump_max {}", u.q_pump_min, u.q_pump_max),
            ));
        }
        let mut seen = HashSet::new();
        for &(a, b) in &u.feasible_transitions {
            if a == b {
                v.push(bound(
                    f("feasible_transitions"),
                    format!("self transition {a}->{b}"),
                ));
            } else if !seen.insert((a, b)) {
                v.push(bound(
                    f("feasible_transitions"),
                    format!("duplicate transition {a}->{b}"),
                ));
            }
        }
        if let Some(min_up) = &u.min_up_hours {
            for m in Mode::ALL {
                if let Some(hours) = min_up.get(m) {
                    if !(hours.is_finite() && hours >= 0.0) {
                        v.push(bound(
                            f(&format!("min_up_hours.{m}")),
                            format!("{hours} must be non-negative"),
                        ));
                    }
                }
            }
        }
    }

    for (i, r) in case.reservoirs.iter().enumerate() {
        let f = |name: &str| format!("reservoirs[{i}].{name}");
        for (name, val) in [
            ("e_min", r.e_min),
            ("e_max", r.e_max),
            ("e_initial", r.e_initial),
            ("e_final", r.e_final),
        ] {
            if !val.is_finite() {
                v.push(bound(f(name), "must be finite"));
            }
        }
        if r.e_min > r.e_max {
            v.push(bound(
                f("e_min"),
                format!("{} exceeds e_max {}", r.e_min, r.e_max),
            ));
        }
        for (name, val) in [("e_initial", r.e_initial), ("e_final", r.e_final)] {
            if val < r.e_min || val > r.e_max {
                v.push(bound(
                    f(name),
                    format!("{val} outside [{}, {}]", r.e_min, r.e_max),
                ));
            }
        }
        if r.pump_start_limit == Some(0) {
            v.push(bound(f("pump_start_limit"), "must be a positive integer"));
        }
    }

    for (i, g) in case.thermal_units.iter().enumerate() {
        let f = |name: &str| format!("thermal_units[{i}].{name}");
        finite_nonneg(f("q_min"), g.q_min, &mut v);
        finite_nonneg(f("q_max"), g.q_max, &mut v);
        if g.q_min > g.q_max {
            v.push(bound(
                f("q_min"),
                format!("{} exceeds q_max {}", g.q_min, g.q_max),
            ));
        }
        if g.cost_segments.is_empty() {
            v.push(bound(
                f("cost_segments"),
                "at least one segment is required",
            ));
        }
        for (s, seg) in g.cost_segments.iter().enumerate() {
            if !seg.price.is_finite() {
                v.push(bound(
                    f(&format!("cost_segments[{s}].price")),
                    "must be finite",
                ));
            }
            finite_nonneg(f(&format!("cost_segments[{s}].width")), seg.width, &mut v);
        }
        if g.cost_segments.windows(2).any(|w| w[1].price < w[0].price) {
            v.push(bound(
                f("cost_segments"),
                "marginal prices must be non-decreasing",
            ));
        }
        let width: f64 = g.cost_segments.iter().map(|s| s.width).sum();
        if (width - (g.q_max - g.q_min)).abs() > 1e-9 * (1.0 + g.q_max.abs()) {
            v.push(bound(
                f("cost_segments"),
                format!(
                    "widths sum to {width}, expected q_max - q_min = {}",
                    g.q_max - g.q_min
                ),
            ));
        }
    }

    if let Some(bids) = &case.legacy_bids {
        let unit_ids: HashSet<&str> = case.psh_units.iter().map(|u| u.id.as_str()).collect();
        check_unique(
            "legacy_bids",
            bids.iter().map(|b| b.psh_id.as_str()),
            &mut v,
        );
        for (i, b) in bids.iter().enumerate() {
            let f = |name: &str| format!("legacy_bids[{i}].{name}");
            if !unit_ids.contains(b.psh_id.as_str()) {
                v.push(Violation::DanglingReference {
                    field: f("psh_id"),
                    target: b.psh_id.clone(),
                });
            }
            if let Some(t) = b.pump_window.intersection(&b.gen_window).next() {
                v.push(bound(
                    f("gen_window"),
                    format!("interval {t} is also in pump_window"),
                ));
            }
            for (name, w) in [
                ("pump_window", &b.pump_window),
                ("gen_window", &b.gen_window),
            ] {
                if let Some(t) = w.iter().find(|&&t| t >= h.n_intervals) {
                    v.push(bound(f(name), format!("interval {t} beyond horizon")));
                }
            }
            if !(b.daily_max_gen.is_finite() && b.daily_max_gen >= 0.0) {
                v.push(bound(
                    f("daily_max_gen"),
                    format!("{} must be non-negative", b.daily_max_gen),
                ));
            }
            for (name, p) in [
                ("gen_offer_price", &b.gen_offer_price),
                ("pump_bid_price", &b.pump_bid_price),
            ] {
                if let Err(detail) = p.check(h.n_intervals) {
                    v.push(bound(f(name), detail));
                }
            }
        }
    }

    if v.is_empty() {
        Ok(ValidatedCase(case))
    } else {
        Err(ValidationError(v))
    }
}

/// The two-unit illustrative system: two identical units sharing one
/// reservoir, block-loaded 200 MW pumps, 100-200 MW generation, 90%
/// efficiency each way, and three constant-cost thermal units.
pub fn two_unit_system(net_load: Vec<f64>) -> Case {
    let unit = |id: &str| PshUnit {
        id: id.into(),
        reservoir_id: "upper".into(),
        q_gen_min: 100.0,
        q_gen_max: 200.0,
        q_pump_min: 200.0,
        q_pump_max: 200.0,
        eta_gen: 0.9,
        eta_pump: 0.9,
        feasible_transitions: all_transitions(),
        min_up_hours: None,
        initial_mode: Mode::AllOff,
    };
    Case {
        psh_units: vec![unit("psh1"), unit("psh2")],
        reservoirs: vec![Reservoir {
            id: "upper".into(),
            e_min: 1000.0,
            e_max: 3500.0,
            e_initial: 2600.0,
            e_final: 2600.0,
            pump_start_limit: None,
            plant_exclusive: false,
        }],
        thermal_units: vec![
            ThermalUnit::constant("thermal1", 600.0, 30.0),
            ThermalUnit::constant("thermal2", 400.0, 20.0),
            ThermalUnit::constant("thermal3", 500.0, 15.0),
        ],
        horizon: Horizon::hourly(net_load),
        legacy_bids: None,
    }
}
