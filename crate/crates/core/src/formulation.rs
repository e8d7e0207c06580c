//! MILP builders for the configuration model and the legacy bid model.
//!
//! Variables and rows carry names of the form `family[key,...]`, with unit,
//! reservoir and thermal ids and interval indices as keys. [`VariableMap`]
//! gives the same lookup by typed key.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::milp::{Milp, Sense, Variable};
use crate::model::{Mode, PshUnit, ValidatedCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// Thermal cost plus PSH offer cost minus PSH pump bid value.
    WithPshBids,
    /// Thermal cost only.
    ThermalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Operator-scheduled configuration model with reservoir state of charge.
    Proposed,
    /// Owner windows, bid/offer prices and a daily generation limit.
    Legacy,
    /// The proposed model without reservoir rows or variables; used only for
    /// size accounting.
    Baseline,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Proposed => "proposed",
            ModelKind::Legacy => "legacy",
            ModelKind::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    U {
        unit: usize,
        t: usize,
        mode: Mode,
    },
    V {
        unit: usize,
        t: usize,
        from: Mode,
        to: Mode,
    },
    QGen {
        unit: usize,
        t: usize,
    },
    QPump {
        unit: usize,
        t: usize,
    },
    QThermal {
        unit: usize,
        t: usize,
        segment: usize,
    },
    Soc {
        reservoir: usize,
        t: usize,
    },
    /// Plant-level mode indicator; `mode` is `Gen` or `Pump`.
    Ur {
        reservoir: usize,
        t: usize,
        mode: Mode,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BuildWarning {
    /// The mode's minimum output exceeds its reservoir-limited maximum, so the
    /// mode is never available.
    ModeUnavailable {
        unit: String,
        mode: Mode,
        q_min: f64,
        effective_max: f64,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormulationError {
    #[error("reservoir {reservoir}: {detail}")]
    InfeasibleBoundsDetected { reservoir: String, detail: String },
    #[error("no legacy bid for unit {0}")]
    MissingLegacyBid(String),
    #[error("{variable} = {value} is not integral")]
    NonIntegralCommitment { variable: String, value: f64 },
    #[error("solution has {got} values, model has {expected} variables")]
    SolutionLength { expected: usize, got: usize },
}

/// Typed lookup between semantic keys and model variable indices. Every
/// variable of the model has exactly one key.
#[derive(Debug, Clone)]
pub struct VariableMap {
    pub kind: ModelKind,
    pub dt_hours: f64,
    keys: Vec<VarKey>,
    index: HashMap<VarKey, usize>,
    /// Energy balance row per interval.
    pub balance_rows: Vec<usize>,
    pub warnings: Vec<BuildWarning>,
}

impl VariableMap {
    pub fn get(&self, key: VarKey) -> Option<usize> {
        self.index.get(&key).copied()
    }

    pub fn key(&self, index: usize) -> VarKey {
        self.keys[index]
    }

    pub fn keys(&self) -> &[VarKey] {
        &self.keys
    }

    pub fn u(&self, unit: usize, t: usize, mode: Mode) -> Option<usize> {
        self.get(VarKey::U { unit, t, mode })
    }

    pub fn q_gen(&self, unit: usize, t: usize) -> usize {
        self.index[&VarKey::QGen { unit, t }]
    }

    pub fn q_pump(&self, unit: usize, t: usize) -> usize {
        self.index[&VarKey::QPump { unit, t }]
    }

    pub fn soc(&self, reservoir: usize, t: usize) -> Option<usize> {
        self.get(VarKey::Soc { reservoir, t })
    }

    /// Transition variables of `unit` at interval `t`.
    pub fn transitions(
        &self,
        unit: usize,
        t: usize,
    ) -> impl Iterator<Item = (Mode, Mode, usize)> + '_ {
        all_pairs().filter_map(move |(from, to)| {
            self.get(VarKey::V { unit, t, from, to })
                .map(|j| (from, to, j))
        })
    }
}

fn all_pairs() -> impl Iterator<Item = (Mode, Mode)> {
    Mode::ALL.into_iter().flat_map(|a| {
        Mode::ALL
            .into_iter()
            .filter(move |&b| b != a)
            .map(move |b| (a, b))
    })
}

/// Reservoir-limited output ceilings `(gen, pump)` in MW: a single interval
/// can neither empty nor fill the usable reservoir range by more than its
/// width.
pub fn effective_limits(case: &ValidatedCase, unit: &PshUnit) -> (f64, f64) {
    let res = case.reservoir(&unit.reservoir_id);
    let span = res.e_max - res.e_min;
    let dt = case.dt();
    let gen = (span * unit.eta_gen / dt).min(unit.q_gen_max);
    let pump = (span / (unit.eta_pump * dt)).min(unit.q_pump_max);
    (gen, pump)
}

struct Builder<'a> {
    case: &'a ValidatedCase,
    m: Milp,
    keys: Vec<VarKey>,
    index: HashMap<VarKey, usize>,
}

impl<'a> Builder<'a> {
    fn var(&mut self, key: VarKey, var: Variable) -> usize {
        let j = self.m.add_var(var);
        self.keys.push(key);
        self.index.insert(key, j);
        j
    }

    fn get(&self, key: VarKey) -> Option<usize> {
        self.index.get(&key).copied()
    }
}

/// Build the configuration model.
pub fn build_proposed(
    case: &ValidatedCase,
    objective: ObjectiveMode,
) -> Result<(Milp, VariableMap), FormulationError> {
    check_reachable(case)?;
    Ok(build(case, ModelKind::Proposed, objective))
}

/// Build the configuration model without reservoir variables and rows
/// (no state of charge, pump start limit or plant exclusivity).
pub fn build_baseline(case: &ValidatedCase, objective: ObjectiveMode) -> (Milp, VariableMap) {
    build(case, ModelKind::Baseline, objective)
}

/// Build the legacy bid model. Every PSH unit needs a legacy bid.
pub fn build_legacy(case: &ValidatedCase) -> Result<(Milp, VariableMap), FormulationError> {
    for unit in &case.psh_units {
        if case.bid_for(&unit.id).is_none() {
            return Err(FormulationError::MissingLegacyBid(unit.id.clone()));
        }
    }
    Ok(build(case, ModelKind::Legacy, ObjectiveMode::WithPshBids))
}

/// Reject reservoirs whose end-of-day target cannot be reached even at full
/// pumping or generation in every interval.
fn check_reachable(case: &ValidatedCase) -> Result<(), FormulationError> {
    let span = case.n_intervals() as f64 * case.dt();
    for res in &case.reservoirs {
        let (mut charge, mut discharge) = (0.0, 0.0);
        for (_, unit) in case.units_of(&res.id) {
            let (gen, pump) = effective_limits(case, unit);
            if pump >= unit.q_pump_min {
                charge += span * unit.eta_pump * pump;
            }
            if gen >= unit.q_gen_min {
                discharge += span * gen / unit.eta_gen;
            }
        }
        let need = res.e_final - res.e_initial;
        if need > charge + 1e-9 || -need > discharge + 1e-9 {
            return Err(FormulationError::InfeasibleBoundsDetected {
                reservoir: res.id.clone(),
                detail: format!(
                    "moving from {} to {} MWh needs {:.6} MWh, at most {:.6} MWh charge and {:.6} MWh discharge are possible",
                    res.e_initial, res.e_final, need.abs(), charge, discharge
                ),
            });
        }
    }
    Ok(())
}

fn build(case: &ValidatedCase, kind: ModelKind, objective: ObjectiveMode) -> (Milp, VariableMap) {
    let n_t = case.n_intervals();
    let dt = case.dt();
    let mut b = Builder {
        case,
        m: Milp::new(),
        keys: Vec::new(),
        index: HashMap::new(),
    };
    let mut warnings = Vec::new();

    // output ceilings and per-interval mode availability
    let mut ceilings = Vec::new();
    for unit in &case.psh_units {
        let (gen, pump) = match kind {
            ModelKind::Legacy => (unit.q_gen_max, unit.q_pump_max),
            _ => effective_limits(case, unit),
        };
        if kind != ModelKind::Legacy {
            for (mode, q_min, max) in [
                (Mode::Gen, unit.q_gen_min, gen),
                (Mode::Pump, unit.q_pump_min, pump),
            ] {
                if q_min > max {
                    warnings.push(BuildWarning::ModeUnavailable {
                        unit: unit.id.clone(),
                        mode,
                        q_min,
                        effective_max: max,
                    });
                }
            }
        }
        ceilings.push((gen, pump));
    }
    let offered = |g: usize, t: usize, mode: Mode| -> bool {
        match (kind, mode) {
            (_, Mode::AllOff) => true,
            (ModelKind::Legacy, Mode::Gen) => case
                .bid_for(&case.psh_units[g].id)
                .is_some_and(|bid| bid.gen_window.contains(&t)),
            (ModelKind::Legacy, Mode::Pump) => case
                .bid_for(&case.psh_units[g].id)
                .is_some_and(|bid| bid.pump_window.contains(&t)),
            _ => true,
        }
    };
    let usable = |g: usize, mode: Mode| -> bool {
        let unit = &case.psh_units[g];
        match mode {
            Mode::AllOff => true,
            Mode::Gen => unit.q_gen_min <= ceilings[g].0,
            Mode::Pump => unit.q_pump_min <= ceilings[g].1,
        }
    };

    // commitment, transition and output variables
    for (g, unit) in case.psh_units.iter().enumerate() {
        let bid = case.bid_for(&unit.id);
        for t in 0..n_t {
            for mode in Mode::ALL {
                if offered(g, t, mode) {
                    let mut var = Variable::binary(format!("u[{},{t},{mode}]", unit.id), 0.0);
                    if !usable(g, mode) {
                        var.upper = 0.0;
                    }
                    b.var(VarKey::U { unit: g, t, mode }, var);
                }
            }
            for (from, to) in all_pairs() {
                let from_exists = t == 0 || offered(g, t - 1, from);
                if unit.allows(from, to) && from_exists && offered(g, t, to) {
                    b.var(
                        VarKey::V {
                            unit: g,
                            t,
                            from,
                            to,
                        },
                        Variable::binary(format!("v[{},{t},{from},{to}]", unit.id), 0.0),
                    );
                }
            }
            let priced = kind == ModelKind::Legacy || objective == ObjectiveMode::WithPshBids;
            let (offer, pump_bid) = match (priced, bid) {
                (true, Some(bid)) => (bid.gen_offer_price.at(t), bid.pump_bid_price.at(t)),
                _ => (0.0, 0.0),
            };
            let gen_hi = if offered(g, t, Mode::Gen) && usable(g, Mode::Gen) {
                ceilings[g].0
            } else {
                0.0
            };
            let pump_hi = if offered(g, t, Mode::Pump) && usable(g, Mode::Pump) {
                ceilings[g].1
            } else {
                0.0
            };
            b.var(
                VarKey::QGen { unit: g, t },
                Variable::continuous(format!("q_gen[{},{t}]", unit.id), 0.0, gen_hi, offer * dt),
            );
            b.var(
                VarKey::QPump { unit: g, t },
                Variable::continuous(
                    format!("q_pump[{},{t}]", unit.id),
                    0.0,
                    pump_hi,
                    -pump_bid * dt,
                ),
            );
        }
    }

    // thermal segments; the must-run block is a constant
    for (k, th) in case.thermal_units.iter().enumerate() {
        let first = th.cost_segments.first().map_or(0.0, |s| s.price);
        b.m.constant_offset += n_t as f64 * dt * first * th.q_min;
        for t in 0..n_t {
            for (s, seg) in th.cost_segments.iter().enumerate() {
                b.var(
                    VarKey::QThermal {
                        unit: k,
                        t,
                        segment: s,
                    },
                    Variable::continuous(
                        format!("q[{},{t},{s}]", th.id),
                        0.0,
                        seg.width,
                        seg.price * dt,
                    ),
                );
            }
        }
    }

    // reservoir variables
    let storage = kind == ModelKind::Proposed;
    if storage {
        for (r, res) in case.reservoirs.iter().enumerate() {
            for t in 0..=n_t {
                b.var(
                    VarKey::Soc { reservoir: r, t },
                    Variable::continuous(format!("e[{},{t}]", res.id), res.e_min, res.e_max, 0.0),
                );
            }
            if res.plant_exclusive {
                for t in 0..n_t {
                    for mode in [Mode::Pump, Mode::Gen] {
                        b.var(
                            VarKey::Ur {
                                reservoir: r,
                                t,
                                mode,
                            },
                            Variable::continuous(
                                format!("ur[{},{t},{mode}]", res.id),
                                0.0,
                                1.0,
                                0.0,
                            ),
                        );
                    }
                }
            }
        }
    }

    // energy balance
    let mut balance_rows = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let mut terms = Vec::new();
        let mut rhs = case.horizon.net_load[t];
        for (k, th) in case.thermal_units.iter().enumerate() {
            rhs -= th.q_min;
            for s in 0..th.cost_segments.len() {
                terms.push((
                    b.index[&VarKey::QThermal {
                        unit: k,
                        t,
                        segment: s,
                    }],
                    1.0,
                ));
            }
        }
        for g in 0..case.psh_units.len() {
            terms.push((b.index[&VarKey::QGen { unit: g, t }], 1.0));
            terms.push((b.index[&VarKey::QPump { unit: g, t }], -1.0));
        }
        balance_rows.push(b.m.add_row(format!("balance[{t}]"), terms, Sense::Eq, rhs));
    }

    for (g, unit) in case.psh_units.iter().enumerate() {
        add_mode_logic(&mut b, g, unit);
        add_output_limits(&mut b, g, unit, ceilings[g]);
        if let Some(min_up) = &unit.min_up_hours {
            for mode in Mode::ALL {
                if let Some(hours) = min_up.get(mode) {
                    add_min_up(&mut b, g, unit, mode, hours);
                }
            }
        }
        if kind == ModelKind::Legacy {
            let bid = case.bid_for(&unit.id).expect("checked by build_legacy");
            let terms: Vec<_> = (0..n_t)
                .map(|t| (b.index[&VarKey::QGen { unit: g, t }], dt))
                .collect();
            b.m.add_row(
                format!("daily_gen[{}]", unit.id),
                terms,
                Sense::Le,
                bid.daily_max_gen,
            );
        }
    }

    if kind != ModelKind::Baseline {
        for (r, res) in case.reservoirs.iter().enumerate() {
            if storage {
                add_soc_rows(&mut b, r);
            }
            if let Some(limit) = res.pump_start_limit {
                for t in 0..n_t {
                    let terms: Vec<_> = case
                        .units_of(&res.id)
                        .flat_map(|(g, _)| {
                            Mode::ALL.into_iter().filter_map(move |from| {
                                (from != Mode::Pump).then_some(VarKey::V {
                                    unit: g,
                                    t,
                                    from,
                                    to: Mode::Pump,
                                })
                            })
                        })
                        .filter_map(|key| b.get(key))
                        .map(|j| (j, 1.0))
                        .collect();
                    if !terms.is_empty() {
                        b.m.add_row(
                            format!("pump_starts[{},{t}]", res.id),
                            terms,
                            Sense::Le,
                            f64::from(limit),
                        );
                    }
                }
            }
            if res.plant_exclusive {
                add_plant_exclusivity(&mut b, r);
            }
        }
    }

    let Builder { m, keys, index, .. } = b;
    (
        m,
        VariableMap {
            kind,
            dt_hours: dt,
            keys,
            index,
            balance_rows,
            warnings,
        },
    )
}

/// One mode per interval, transition flow, at most one transition.
fn add_mode_logic(b: &mut Builder<'_>, g: usize, unit: &PshUnit) {
    for t in 0..b.case.n_intervals() {
        let u_now: Vec<_> = Mode::ALL
            .into_iter()
            .filter_map(|mode| b.get(VarKey::U { unit: g, t, mode }))
            .map(|j| (j, 1.0))
            .collect();
        b.m.add_row(format!("mode[{},{t}]", unit.id), u_now, Sense::Eq, 1.0);

        let trans: Vec<(Mode, Mode, usize)> = all_pairs()
            .filter_map(|(from, to)| {
                b.get(VarKey::V {
                    unit: g,
                    t,
                    from,
                    to,
                })
                .map(|j| (from, to, j))
            })
            .collect();
        for mode in Mode::ALL {
            let mut terms = Vec::new();
            let mut rhs = 0.0;
            if let Some(j) = b.get(VarKey::U { unit: g, t, mode }) {
                terms.push((j, 1.0));
            }
            if t == 0 {
                if unit.initial_mode == mode {
                    rhs = 1.0;
                }
            } else if let Some(j) = b.get(VarKey::U {
                unit: g,
                t: t - 1,
                mode,
            }) {
                terms.push((j, -1.0));
            }
            for &(from, to, j) in &trans {
                if to == mode {
                    terms.push((j, -1.0));
                } else if from == mode {
                    terms.push((j, 1.0));
                }
            }
            if !terms.is_empty() || rhs != 0.0 {
                b.m.add_row(
                    format!("flow[{},{t},{mode}]", unit.id),
                    terms,
                    Sense::Eq,
                    rhs,
                );
            }
        }
        if !trans.is_empty() {
            let terms: Vec<_> = trans.iter().map(|&(_, _, j)| (j, 1.0)).collect();
            b.m.add_row(
                format!("one_transition[{},{t}]", unit.id),
                terms,
                Sense::Le,
                1.0,
            );
        }
    }
}

fn add_output_limits(
    b: &mut Builder<'_>,
    g: usize,
    unit: &PshUnit,
    (gen_max, pump_max): (f64, f64),
) {
    for t in 0..b.case.n_intervals() {
        let limits = [
            (
                Mode::Gen,
                "gen",
                b.index[&VarKey::QGen { unit: g, t }],
                unit.q_gen_min,
                gen_max,
            ),
            (
                Mode::Pump,
                "pump",
                b.index[&VarKey::QPump { unit: g, t }],
                unit.q_pump_min,
                pump_max,
            ),
        ];
        for (mode, family, q, lo, hi) in limits {
            let Some(u) = b.get(VarKey::U { unit: g, t, mode }) else {
                continue;
            };
            b.m.add_row(
                format!("{family}_max[{},{t}]", unit.id),
                [(q, 1.0), (u, -hi)],
                Sense::Le,
                0.0,
            );
            if lo > 0.0 {
                b.m.add_row(
                    format!("{family}_min[{},{t}]", unit.id),
                    [(q, 1.0), (u, -lo)],
                    Sense::Ge,
                    0.0,
                );
            }
        }
    }
}

/// A mode entered during the last `hours` must still be active.
fn add_min_up(b: &mut Builder<'_>, g: usize, unit: &PshUnit, mode: Mode, hours: f64) {
    let len = (hours / b.case.dt() - 1e-9).ceil().max(0.0) as usize;
    if len < 2 {
        return;
    }
    for t in 0..b.case.n_intervals() {
        let mut terms = Vec::new();
        if let Some(j) = b.get(VarKey::U { unit: g, t, mode }) {
            terms.push((j, 1.0));
        }
        for tau in (t + 1).saturating_sub(len)..=t {
            for from in Mode::ALL {
                if let Some(j) = b.get(VarKey::V {
                    unit: g,
                    t: tau,
                    from,
                    to: mode,
                }) {
                    terms.push((j, -1.0));
                }
            }
        }
        if terms.len() > 1 {
            b.m.add_row(
                format!("min_up[{},{t},{mode}]", unit.id),
                terms,
                Sense::Ge,
                0.0,
            );
        }
    }
}

fn add_soc_rows(b: &mut Builder<'_>, r: usize) {
    let case = b.case;
    let res = &case.reservoirs[r];
    let dt = case.dt();
    for t in 0..case.n_intervals() {
        let mut terms = vec![
            (
                b.index[&VarKey::Soc {
                    reservoir: r,
                    t: t + 1,
                }],
                1.0,
            ),
            (b.index[&VarKey::Soc { reservoir: r, t }], -1.0),
        ];
        for (g, unit) in case.units_of(&res.id) {
            terms.push((b.index[&VarKey::QPump { unit: g, t }], -dt * unit.eta_pump));
            terms.push((b.index[&VarKey::QGen { unit: g, t }], dt / unit.eta_gen));
        }
        b.m.add_row(format!("soc[{},{t}]", res.id), terms, Sense::Eq, 0.0);
    }
    let e0 = b.index[&VarKey::Soc { reservoir: r, t: 0 }];
    let e_end = b.index[&VarKey::Soc {
        reservoir: r,
        t: case.n_intervals(),
    }];
    b.m.add_row(
        format!("soc_initial[{}]", res.id),
        [(e0, 1.0)],
        Sense::Eq,
        res.e_initial,
    );
    b.m.add_row(
        format!("soc_final[{}]", res.id),
        [(e_end, 1.0)],
        Sense::Eq,
        res.e_final,
    );
}

/// Units sharing a reservoir never pump and generate in the same interval.
/// The legacy model has no plant indicators, so there each pump/gen pair of
/// units sharing the reservoir gets a pairwise row.
fn add_plant_exclusivity(b: &mut Builder<'_>, r: usize) {
    let case = b.case;
    let res = &case.reservoirs[r];
    let units: Vec<(usize, &PshUnit)> = case.units_of(&res.id).collect();
    for t in 0..case.n_intervals() {
        let ur_pump = b.get(VarKey::Ur {
            reservoir: r,
            t,
            mode: Mode::Pump,
        });
        let ur_gen = b.get(VarKey::Ur {
            reservoir: r,
            t,
            mode: Mode::Gen,
        });
        match (ur_pump, ur_gen) {
            (Some(p), Some(gn)) => {
                b.m.add_row(
                    format!("plant_mode[{},{t}]", res.id),
                    [(p, 1.0), (gn, 1.0)],
                    Sense::Le,
                    1.0,
                );
                for &(g, unit) in &units {
                    for (mode, ur) in [(Mode::Pump, p), (Mode::Gen, gn)] {
                        if let Some(u) = b.get(VarKey::U { unit: g, t, mode }) {
                            b.m.add_row(
                                format!("plant_link[{},{t},{mode}]", unit.id),
                                [(u, 1.0), (ur, -1.0)],
                                Sense::Le,
                                0.0,
                            );
                        }
                    }
                }
            }
            _ => {
                for &(gp, pumper) in &units {
                    for &(gg, _) in &units {
                        if gp == gg {
                            continue;
                        }
                        let pump = b.get(VarKey::U {
                            unit: gp,
                            t,
                            mode: Mode::Pump,
                        });
                        let gen = b.get(VarKey::U {
                            unit: gg,
                            t,
                            mode: Mode::Gen,
                        });
                        if let (Some(p), Some(gn)) = (pump, gen) {
                            let name =
                                format!("plant_pair[{},{},{t}]", pumper.id, case.psh_units[gg].id);
                            b.m.add_row(name, [(p, 1.0), (gn, 1.0)], Sense::Le, 1.0);
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PshSchedule {
    pub id: String,
    pub reservoir_id: String,
    pub mode: Vec<Mode>,
    /// MW
    pub q_gen: Vec<f64>,
    /// MW
    pub q_pump: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocTrajectory {
    pub reservoir_id: String,
    /// MWh at interval boundaries, `n_intervals + 1` values.
    pub e: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalSchedule {
    pub id: String,
    /// MW
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub model: ModelKind,
    pub dt_hours: f64,
    /// MW
    pub net_load: Vec<f64>,
    pub psh: Vec<PshSchedule>,
    pub soc: Vec<SocTrajectory>,
    pub thermal: Vec<ThermalSchedule>,
}

impl Schedule {
    pub fn n_intervals(&self) -> usize {
        self.net_load.len()
    }

    pub fn unit(&self, id: &str) -> Option<&PshSchedule> {
        self.psh.iter().find(|p| p.id == id)
    }

    /// Net PSH injection (generation minus pumping) in MW.
    pub fn psh_net(&self, t: usize) -> f64 {
        self.psh.iter().map(|p| p.q_gen[t] - p.q_pump[t]).sum()
    }

    /// State of charge of `reservoir_id` at interval boundaries.
    pub fn soc_of(&self, reservoir_id: &str) -> Option<&[f64]> {
        self.soc
            .iter()
            .find(|s| s.reservoir_id == reservoir_id)
            .map(|s| s.e.as_slice())
    }
}

/// Decode a solution of a model built by this module. Legacy and baseline
/// models carry no state of charge; their trajectories are reconstructed from
/// the pump and generation schedule.
pub fn decode_schedule(
    case: &ValidatedCase,
    map: &VariableMap,
    x: &[f64],
) -> Result<Schedule, FormulationError> {
    if x.len() != map.keys.len() {
        return Err(FormulationError::SolutionLength {
            expected: map.keys.len(),
            got: x.len(),
        });
    }
    for (j, key) in map.keys.iter().enumerate() {
        if matches!(key, VarKey::U { .. } | VarKey::V { .. })
            && (x[j] - x[j].round()).abs() > crate::solver::INTEGRALITY_TOL
        {
            return Err(FormulationError::NonIntegralCommitment {
                variable: var_label(case, *key),
                value: x[j],
            });
        }
    }
    let n_t = case.n_intervals();
    let dt = case.dt();
    let psh: Vec<PshSchedule> = case
        .psh_units
        .iter()
        .enumerate()
        .map(|(g, unit)| {
            let mode = (0..n_t)
                .map(|t| {
                    Mode::ALL
                        .into_iter()
                        .find(|&m| map.u(g, t, m).is_some_and(|j| x[j] > 0.5))
                        .unwrap_or(Mode::AllOff)
                })
                .collect();
            PshSchedule {
                id: unit.id.clone(),
                reservoir_id: unit.reservoir_id.clone(),
                mode,
                q_gen: (0..n_t).map(|t| x[map.q_gen(g, t)]).collect(),
                q_pump: (0..n_t).map(|t| x[map.q_pump(g, t)]).collect(),
            }
        })
        .collect();
    let soc = case
        .reservoirs
        .iter()
        .enumerate()
        .map(|(r, res)| {
            let e = match map.soc(r, 0) {
                Some(_) => (0..=n_t)
                    .map(|t| x[map.soc(r, t).expect("soc variable per interval")])
                    .collect(),
                None => {
                    let mut e = Vec::with_capacity(n_t + 1);
                    e.push(res.e_initial);
                    for t in 0..n_t {
                        let delta: f64 = case
                            .units_of(&res.id)
                            .map(|(g, unit)| {
                                dt * (unit.eta_pump * psh[g].q_pump[t]
                                    - psh[g].q_gen[t] / unit.eta_gen)
                            })
                            .sum();
                        e.push(e[t] + delta);
                    }
                    e
                }
            };
            SocTrajectory {
                reservoir_id: res.id.clone(),
                e,
            }
        })
        .collect();
    let thermal = case
        .thermal_units
        .iter()
        .enumerate()
        .map(|(k, th)| ThermalSchedule {
            id: th.id.clone(),
            output: (0..n_t)
                .map(|t| {
                    th.q_min
                        + (0..th.cost_segments.len())
                            .map(|s| {
                                x[map.index[&VarKey::QThermal {
                                    unit: k,
                                    t,
                                    segment: s,
                                }]]
                            })
                            .sum::<f64>()
                })
                .collect(),
        })
        .collect();
    Ok(Schedule {
        model: map.kind,
        dt_hours: dt,
        net_load: case.horizon.net_load.clone(),
        psh,
        soc,
        thermal,
    })
}

fn var_label(case: &ValidatedCase, key: VarKey) -> String {
    match key {
        VarKey::U { unit, t, mode } => format!("u[{},{t},{mode}]", case.psh_units[unit].id),
        VarKey::V { unit, t, from, to } => {
            format!("v[{},{t},{from},{to}]", case.psh_units[unit].id)
        }
        other => format!("{other:?}"),
    }
}

/// Thermal production cost of a schedule in $, from the units' cost curves.
pub fn thermal_cost(case: &ValidatedCase, schedule: &Schedule) -> f64 {
    case.thermal_units
        .iter()
        .zip(&schedule.thermal)
        .map(|(th, s)| {
            s.output
                .iter()
                .map(|&q| th.cost_rate(q) * schedule.dt_hours)
                .sum::<f64>()
        })
        .sum()
}

/// Largest residuals of the model's defining relations, recomputed from the
/// semantic values of a solution rather than from the model rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    /// |Σ_m u - 1|
    pub exclusivity: f64,
    /// Excess of Σ v over 1.
    pub single_transition: f64,
    /// |u_t - u_{t-1} - inflow + outflow|
    pub flow: f64,
    /// Output outside `[q_min·u, ceiling·u]`.
    pub output_limits: f64,
    /// |supply - net load| in MW.
    pub balance: f64,
    /// |e_{t+1} - e_t - dt·(pump - gen)| in MWh; zero for models without SOC.
    pub soc_recursion: f64,
    pub soc_bounds: f64,
    pub soc_endpoints: f64,
    /// |e_T - e_0 - dt·Σ_t(pump - gen)|
    pub soc_telescoped: f64,
    /// Intervals in which a unit pumps while another on the same
    /// exclusive reservoir generates.
    pub plant_conflicts: usize,
    /// Excess of pump starts over the reservoir limit.
    pub pump_starts: f64,
}

impl Audit {
    pub fn max_residual(&self) -> f64 {
        [
            self.exclusivity,
            self.single_transition,
            self.flow,
            self.output_limits,
            self.balance,
            self.soc_recursion,
            self.soc_bounds,
            self.soc_endpoints,
            self.soc_telescoped,
            self.pump_starts,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn is_clean(&self, tol: f64) -> bool {
        self.max_residual() <= tol && self.plant_conflicts == 0
    }
}

pub fn audit_solution(case: &ValidatedCase, map: &VariableMap, x: &[f64]) -> Audit {
    let n_t = case.n_intervals();
    let dt = case.dt();
    let val = |key: VarKey| map.get(key).map_or(0.0, |j| x[j]);
    let mut a = Audit::default();
    for (g, unit) in case.psh_units.iter().enumerate() {
        let (gen_max, pump_max) = match map.kind {
            ModelKind::Legacy => (unit.q_gen_max, unit.q_pump_max),
            _ => effective_limits(case, unit),
        };
        for t in 0..n_t {
            let u = |mode| val(VarKey::U { unit: g, t, mode });
            a.exclusivity = a
                .exclusivity
                .max((Mode::ALL.into_iter().map(u).sum::<f64>() - 1.0).abs());
            let trans: Vec<_> = map.transitions(g, t).collect();
            a.single_transition = a
                .single_transition
                .max(trans.iter().map(|&(_, _, j)| x[j]).sum::<f64>() - 1.0);
            for mode in Mode::ALL {
                let before = if t == 0 {
                    f64::from(u8::from(unit.initial_mode == mode))
                } else {
                    val(VarKey::U {
                        unit: g,
                        t: t - 1,
                        mode,
                    })
                };
                let inflow: f64 = trans
                    .iter()
                    .filter(|tr| tr.1 == mode)
                    .map(|tr| x[tr.2])
                    .sum();
                let outflow: f64 = trans
                    .iter()
                    .filter(|tr| tr.0 == mode)
                    .map(|tr| x[tr.2])
                    .sum();
                a.flow = a.flow.max((u(mode) - before - inflow + outflow).abs());
            }
            let qg = x[map.q_gen(g, t)];
            let qp = x[map.q_pump(g, t)];
            let (ug, up) = (u(Mode::Gen), u(Mode::Pump));
            let over = [
                unit.q_gen_min * ug - qg,
                qg - gen_max * ug,
                unit.q_pump_min * up - qp,
                qp - pump_max * up,
            ];
            a.output_limits = over.into_iter().fold(a.output_limits, f64::max);
        }
    }
    let schedule = decode_unchecked(case, map, x);
    for t in 0..n_t {
        let supply: f64 =
            schedule.thermal.iter().map(|s| s.output[t]).sum::<f64>() + schedule.psh_net(t);
        a.balance = a.balance.max((supply - case.horizon.net_load[t]).abs());
    }
    for (r, res) in case.reservoirs.iter().enumerate() {
        let delta = |t: usize| -> f64 {
            case.units_of(&res.id)
                .map(|(g, unit)| {
                    dt * (unit.eta_pump * schedule.psh[g].q_pump[t]
                        - schedule.psh[g].q_gen[t] / unit.eta_gen)
                })
                .sum()
        };
        if map.kind == ModelKind::Proposed {
            let e = &schedule.soc[r].e;
            for t in 0..n_t {
                a.soc_recursion = a.soc_recursion.max((e[t + 1] - e[t] - delta(t)).abs());
            }
            for &v in e {
                a.soc_bounds = a.soc_bounds.max(res.e_min - v).max(v - res.e_max);
            }
            a.soc_endpoints = a
                .soc_endpoints
                .max((e[0] - res.e_initial).abs())
                .max((e[n_t] - res.e_final).abs());
            let net: f64 = (0..n_t).map(delta).sum();
            a.soc_telescoped = a.soc_telescoped.max((e[n_t] - e[0] - net).abs());
        }
        if map.kind != ModelKind::Baseline {
            let units: Vec<usize> = case.units_of(&res.id).map(|(g, _)| g).collect();
            for t in 0..n_t {
                if res.plant_exclusive {
                    let on = |g: usize, mode| val(VarKey::U { unit: g, t, mode }) > 0.5;
                    let conflict = units.iter().any(|&p| {
                        on(p, Mode::Pump) && units.iter().any(|&q| q != p && on(q, Mode::Gen))
                    });
                    a.plant_conflicts += usize::from(conflict);
                }
                if let Some(limit) = res.pump_start_limit {
                    let starts: f64 = units
                        .iter()
                        .flat_map(|&g| {
                            map.transitions(g, t)
                                .filter(|tr| tr.1 == Mode::Pump)
                                .map(|tr| x[tr.2])
                        })
                        .sum();
                    a.pump_starts = a.pump_starts.max(starts - f64::from(limit));
                }
            }
        }
    }
    a
}

fn decode_unchecked(case: &ValidatedCase, map: &VariableMap, x: &[f64]) -> Schedule {
    // rounding the binaries cannot change the continuous values decoded
    let rounded: Vec<f64> = x
        .iter()
        .zip(&map.keys)
        .map(|(&v, key)| {
            if matches!(key, VarKey::U { .. } | VarKey::V { .. }) {
                v.round()
            } else {
                v
            }
        })
        .collect();
    decode_schedule(case, map, &rounded).expect("length and integrality hold")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::model_stats;
    use crate::model::{two_unit_system, validate_case, LegacyBid, PriceProfile};
    use std::collections::BTreeSet;

    fn one_unit(net_load: Vec<f64>) -> ValidatedCase {
        let mut c = two_unit_system(net_load);
        c.psh_units.truncate(1);
        validate_case(c).unwrap()
    }

    fn family_count(m: &Milp, family: &str) -> usize {
        m.rows.iter().filter(|r| r.family() == family).count()
    }

    fn var_count(m: &Milp, family: &str) -> usize {
        m.variables.iter().filter(|v| v.family() == family).count()
    }

    #[test]
    fn effective_limits_for_two_unit_data() {
        let case = validate_case(two_unit_system(vec![800.0; 24])).unwrap();
        let (gen, pump) = effective_limits(&case, &case.psh_units[0]);
        assert_eq!(pump, 200.0);
        assert_eq!(gen, 200.0);
    }

    #[test]
    fn proposed_index_sets_for_four_intervals() {
        let case = one_unit(vec![800.0; 4]);
        let (m, map) = build_proposed(&case, ObjectiveMode::ThermalOnly).unwrap();
        assert_eq!(var_count(&m, "u"), 12);
        assert_eq!(var_count(&m, "v"), 24);
        assert_eq!(var_count(&m, "e"), 5);
        assert_eq!(family_count(&m, "mode"), 4);
        assert_eq!(family_count(&m, "flow"), 12);
        assert_eq!(family_count(&m, "one_transition"), 4);
        assert_eq!(family_count(&m, "soc"), 4);
        assert_eq!(family_count(&m, "soc_initial"), 1);
        assert_eq!(family_count(&m, "soc_final"), 1);
        assert_eq!(map.keys().len(), m.n_vars());
        let e0 = m.row_index("soc_initial[upper]").unwrap();
        assert_eq!(m.rows[e0].rhs, 2600.0);
        let e4 = m.row_index("soc_final[upper]").unwrap();
        assert_eq!(m.rows[e4].terms, vec![(map.soc(0, 4).unwrap(), 1.0)]);
    }

    #[test]
    fn every_variable_has_one_key() {
        let case = validate_case(two_unit_system(vec![800.0; 6])).unwrap();
        let (m, map) = build_proposed(&case, ObjectiveMode::WithPshBids).unwrap();
        let mut seen = std::collections::HashSet::new();
        for j in 0..m.n_vars() {
            let key = map.key(j);
            assert!(seen.insert(key));
            assert_eq!(map.get(key), Some(j));
        }
    }

    #[test]
    fn soc_row_nonzeros_grow_with_shared_units() {
        let case = validate_case(two_unit_system(vec![800.0; 3])).unwrap();
        let (m, _) = build_proposed(&case, ObjectiveMode::ThermalOnly).unwrap();
        for row in m.rows.iter().filter(|r| r.family() == "soc") {
            assert_eq!(row.terms.len(), 2 + 2 * 2);
        }
    }

    fn with_bids(
        mut c: crate::model::Case,
        pump: std::ops::Range<usize>,
        gen: std::ops::Range<usize>,
        daily: f64,
    ) -> ValidatedCase {
        let n = c.horizon.n_intervals;
        c.legacy_bids = Some(
            c.psh_units
                .iter()
                .map(|u| LegacyBid {
                    psh_id: u.id.clone(),
                    gen_offer_price: PriceProfile::Flat(26.0),
                    pump_bid_price: PriceProfile::Flat(24.0),
                    pump_window: pump.clone().collect(),
                    gen_window: gen.clone().filter(|t| *t < n).collect::<BTreeSet<_>>(),
                    daily_max_gen: daily,
                })
                .collect(),
        );
        validate_case(c).unwrap()
    }

    #[test]
    fn legacy_pump_binaries_only_in_window() {
        let mut c = two_unit_system(vec![800.0; 24]);
        c.psh_units.truncate(1);
        let case = with_bids(c, 0..5, 5..24, 810.0);
        let (m, map) = build_legacy(&case).unwrap();
        for t in 0..24 {
            assert_eq!(map.u(0, t, Mode::Pump).is_some(), t < 5, "t = {t}");
            assert_eq!(map.u(0, t, Mode::Gen).is_some(), t >= 5, "t = {t}");
        }
        assert_eq!(m.variables[map.q_pump(0, 5)].upper, 0.0);
        assert_eq!(m.variables[map.q_pump(0, 6)].upper, 0.0);
        assert_eq!(var_count(&m, "e"), 0);
        assert_eq!(family_count(&m, "soc"), 0);
        assert_eq!(family_count(&m, "daily_gen"), 1);
    }

    #[test]
    fn legacy_requires_bids() {
        let case = one_unit(vec![800.0; 4]);
        assert_eq!(
            build_legacy(&case).unwrap_err(),
            FormulationError::MissingLegacyBid("psh1".into())
        );
    }

    #[test]
    fn legacy_soc_is_reconstructed() {
        let mut c = two_unit_system(vec![800.0; 2]);
        c.psh_units.truncate(1);
        let case = with_bids(c, 0..1, 1..2, 0.0);
        let (m, map) = build_legacy(&case).unwrap();
        let mut x = vec![0.0; m.n_vars()];
        x[map.u(0, 0, Mode::Pump).unwrap()] = 1.0;
        x[map
            .get(VarKey::V {
                unit: 0,
                t: 0,
                from: Mode::AllOff,
                to: Mode::Pump,
            })
            .unwrap()] = 1.0;
        x[map.q_pump(0, 0)] = 200.0;
        x[map.u(0, 1, Mode::AllOff).unwrap()] = 1.0;
        x[map
            .get(VarKey::V {
                unit: 0,
                t: 1,
                from: Mode::Pump,
                to: Mode::AllOff,
            })
            .unwrap()] = 1.0;
        let s = decode_schedule(&case, &map, &x).unwrap();
        assert_eq!(s.soc[0].e[1], 2780.0);
        assert_eq!(s.psh[0].mode, vec![Mode::Pump, Mode::AllOff]);
    }

    #[test]
    fn all_off_decodes_to_zero_power() {
        let case = one_unit(vec![800.0; 3]);
        let (m, map) = build_proposed(&case, ObjectiveMode::ThermalOnly).unwrap();
        let mut x = vec![0.0; m.n_vars()];
        for t in 0..3 {
            x[map.u(0, t, Mode::AllOff).unwrap()] = 1.0;
        }
        for t in 0..=3 {
            x[map.soc(0, t).unwrap()] = 2600.0;
        }
        let s = decode_schedule(&case, &map, &x).unwrap();
        assert!(s.psh[0].mode.iter().all(|&m| m == Mode::AllOff));
        assert!(s.psh[0]
            .q_gen
            .iter()
            .chain(&s.psh[0].q_pump)
            .all(|&q| q == 0.0));
        assert_eq!(s.soc[0].e, vec![2600.0; 4]);
    }

    #[test]
    fn fractional_commitment_rejected() {
        let case = one_unit(vec![800.0; 1]);
        let (m, map) = build_proposed(&case, ObjectiveMode::ThermalOnly).unwrap();
        let mut x = vec![0.0; m.n_vars()];
        x[map.u(0, 0, Mode::Gen).unwrap()] = 0.5;
        assert!(matches!(
            decode_schedule(&case, &map, &x),
            Err(FormulationError::NonIntegralCommitment { .. })
        ));
        assert!(matches!(
            decode_schedule(&case, &map, &x[1..]),
            Err(FormulationError::SolutionLength { .. })
        ));
    }

    #[test]
    fn unreachable_end_state_detected() {
        let mut c = two_unit_system(vec![800.0; 2]);
        c.reservoirs[0].e_final = 3500.0;
        let case = validate_case(c).unwrap();
        // two intervals of two pumps move at most 720 MWh
        assert!(matches!(
            build_proposed(&case, ObjectiveMode::ThermalOnly),
            Err(FormulationError::InfeasibleBoundsDetected { .. })
        ));
    }

    #[test]
    fn zero_headroom_disables_modes() {
        let mut c = two_unit_system(vec![800.0; 3]);
        c.reservoirs[0].e_min = 2600.0;
        c.reservoirs[0].e_max = 2600.0;
        let case = validate_case(c).unwrap();
        let (m, map) = build_proposed(&case, ObjectiveMode::ThermalOnly).unwrap();
        assert_eq!(map.warnings.len(), 4);
        assert_eq!(m.variables[map.u(0, 1, Mode::Pump).unwrap()].upper, 0.0);
        assert_eq!(m.variables[map.u(1, 2, Mode::Gen).unwrap()].upper, 0.0);
    }

    #[test]
    fn optional_families() {
        let mut c = two_unit_system(vec![800.0; 5]);
        c.reservoirs[0].pump_start_limit = Some(1);
        c.reservoirs[0].plant_exclusive = true;
        c.psh_units[0].min_up_hours = Some(crate::model::MinUpHours {
            gen: Some(3.0),
            ..Default::default()
        });
        let case = validate_case(c).unwrap();
        let (m, _) = build_proposed(&case, ObjectiveMode::ThermalOnly).unwrap();
        assert_eq!(family_count(&m, "pump_starts"), 5);
        assert_eq!(family_count(&m, "plant_mode"), 5);
        assert_eq!(family_count(&m, "plant_link"), 2 * 2 * 5);
        assert_eq!(var_count(&m, "ur"), 2 * 5);
        assert_eq!(family_count(&m, "min_up"), 5);
        let row = &m.rows[m.row_index("min_up[psh1,4,gen]").unwrap()];
        // u plus entries from two origins over three intervals
        assert_eq!(row.terms.len(), 1 + 2 * 3);
        let (baseline, _) = build_baseline(&case, ObjectiveMode::ThermalOnly);
        assert_eq!(family_count(&baseline, "pump_starts"), 0);
        assert_eq!(var_count(&baseline, "ur"), 0);
        let s = model_stats(&m);
        assert!(s.n_variables > model_stats(&baseline).n_variables);
    }
}
