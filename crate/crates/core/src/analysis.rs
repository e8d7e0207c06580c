//! Proposed-versus-legacy benefit analysis, model size accounting, the
//! brute-force commitment oracle and seeded instance generators.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::formulation::{
    audit_solution, build_legacy, build_proposed, decode_schedule, thermal_cost, Audit,
    FormulationError, ModelKind, ObjectiveMode, Schedule,
};
use crate::milp::{Milp, Sense, Variable};
use crate::model::{
    all_transitions, validate_case, Case, CostSegment, Horizon, LegacyBid, Mode, PriceProfile,
    PshUnit, Reservoir, ThermalUnit, ValidatedCase, ValidationError,
};
use crate::pricing::{compute_lmp, psh_profit, PriceSeries, PricingError, ProfitStatement};
use crate::solver::{
    solve_lp, LpStatus, MipOptions, MipStatus, SolverError, SolverHandle, DEFAULT_REL_GAP,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("{model} model: no feasible schedule found ({status:?})")]
    NoSolution {
        model: &'static str,
        status: MipStatus,
    },
    #[error("enumeration needs {dimension} LPs, limit is {limit}")]
    TooLarge { dimension: u128, limit: u128 },
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub rel_gap: f64,
    pub node_limit: usize,
    pub solver: SolverHandle,
    /// Objective of the proposed model in single runs. Comparisons always
    /// use [`ObjectiveMode::ThermalOnly`].
    pub objective: ObjectiveMode,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            rel_gap: DEFAULT_REL_GAP,
            node_limit: MipOptions::default().node_limit,
            solver: SolverHandle::default(),
            objective: ObjectiveMode::ThermalOnly,
        }
    }
}

impl RunOptions {
    fn mip_options(&self) -> MipOptions {
        MipOptions {
            rel_gap: self.rel_gap,
            node_limit: self.node_limit,
            ..MipOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub status: MipStatus,
    /// Model objective in $.
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes_explored: usize,
    pub backend: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedRun {
    pub model: ModelKind,
    pub schedule: Schedule,
    pub prices: PriceSeries,
    pub solve: SolveSummary,
    /// Thermal production cost of the dispatch in $.
    pub thermal_cost: f64,
    /// Residuals of the incumbent against the model's defining relations.
    pub audit: Audit,
}

/// Build, solve, decode and price one model.
pub fn run_model(
    case: &ValidatedCase,
    kind: ModelKind,
    options: &RunOptions,
) -> Result<SolvedRun, AnalysisError> {
    let (model, map) = match kind {
        ModelKind::Legacy => build_legacy(case)?,
        ModelKind::Proposed => build_proposed(case, options.objective)?,
        ModelKind::Baseline => crate::formulation::build_baseline(case, options.objective),
    };
    let mip = options.solver.solve_mip(&model, &options.mip_options())?;
    if !mip.has_incumbent() {
        return Err(AnalysisError::NoSolution {
            model: kind.as_str(),
            status: mip.status,
        });
    }
    let schedule = decode_schedule(case, &map, &mip.incumbent)?;
    let prices = compute_lmp(&model, &mip, &map)?;
    Ok(SolvedRun {
        model: kind,
        audit: audit_solution(case, &map, &mip.incumbent),
        thermal_cost: thermal_cost(case, &schedule),
        schedule,
        prices,
        solve: SolveSummary {
            status: mip.status,
            objective: mip.objective,
            best_bound: mip.best_bound,
            gap: mip.gap,
            nodes_explored: mip.nodes_explored,
            backend: options.solver.backend_name().to_string(),
        },
    })
}

/// Reservoir limits inherited from a legacy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedEndpoints {
    pub reservoir_id: String,
    /// MWh
    pub e_final: f64,
    /// MWh
    pub e_min: f64,
    /// MWh
    pub e_max: f64,
    /// The derived floor lies below the physical floor.
    pub below_physical_floor: bool,
    /// The derived ceiling lies above the physical ceiling.
    pub above_physical_ceiling: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedCase {
    pub case: Case,
    pub endpoints: Vec<MatchedEndpoints>,
}

/// Copy of `case` whose reservoirs end where the legacy schedule ends and
/// whose limits span exactly the legacy run's total discharge below and total
/// charge above the starting level. The derived limits replace the physical
/// ones even when they are wider; such cases are flagged.
pub fn derive_matched_bounds(case: &ValidatedCase, legacy: &Schedule) -> MatchedCase {
    let dt = legacy.dt_hours;
    let mut out = case.case().clone();
    let mut endpoints = Vec::new();
    for res in &mut out.reservoirs {
        let (mut charged, mut discharged) = (0.0, 0.0);
        for unit in case.psh_units.iter().filter(|u| u.reservoir_id == res.id) {
            let s = legacy.unit(&unit.id).expect("schedule covers every unit");
            charged += dt * unit.eta_pump * s.q_pump.iter().sum::<f64>();
            discharged += dt * s.q_gen.iter().sum::<f64>() / unit.eta_gen;
        }
        let e_min = res.e_initial - discharged;
        let e_max = res.e_initial + charged;
        let end = legacy
            .soc_of(&res.id)
            .and_then(|e| e.last().copied())
            .unwrap_or(res.e_initial);
        let matched = MatchedEndpoints {
            reservoir_id: res.id.clone(),
            e_final: end.clamp(e_min, e_max),
            e_min,
            e_max,
            below_physical_floor: e_min < res.e_min,
            above_physical_ceiling: e_max > res.e_max,
        };
        res.e_min = matched.e_min;
        res.e_max = matched.e_max;
        res.e_final = matched.e_final;
        endpoints.push(matched);
    }
    MatchedCase {
        case: out,
        endpoints,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitBenefit {
    pub psh_id: String,
    pub legacy: ProfitStatement,
    pub proposed: ProfitStatement,
    /// `(proposed - legacy) / |legacy| * 100`, absent when the legacy profit is zero.
    pub profit_improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenefitReport {
    /// Thermal production cost of the legacy dispatch in $.
    pub legacy_objective: f64,
    /// Thermal production cost of the proposed dispatch in $.
    pub proposed_objective: f64,
    /// `(legacy - proposed) / |legacy| * 100`, absent when the legacy cost is zero.
    pub objective_improvement_pct: Option<f64>,
    pub units: Vec<UnitBenefit>,
    pub matched_soc_endpoints: Vec<MatchedEndpoints>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub report: BenefitReport,
    pub legacy: SolvedRun,
    pub proposed: SolvedRun,
}

fn pct_change(from: f64, to: f64) -> Option<f64> {
    (from != 0.0).then(|| (to - from) / from.abs() * 100.0)
}

/// Solve the legacy model, hand its reservoir outcome to the proposed model
/// and compare thermal cost and owner profits, each run settled at its own
/// prices.
pub fn compare_models(
    case: &ValidatedCase,
    options: &RunOptions,
) -> Result<Comparison, AnalysisError> {
    let legacy = run_model(case, ModelKind::Legacy, options)?;
    let matched = derive_matched_bounds(case, &legacy.schedule);
    let matched_case = validate_case(matched.case)?;
    let proposed_options = RunOptions {
        objective: ObjectiveMode::ThermalOnly,
        ..options.clone()
    };
    let proposed = run_model(&matched_case, ModelKind::Proposed, &proposed_options)?;

    let mut warnings = Vec::new();
    for m in &matched.endpoints {
        if m.below_physical_floor {
            warnings.push(format!(
                "reservoir {}: derived floor {} MWh is below the physical floor",
                m.reservoir_id, m.e_min
            ));
        }
        if m.above_physical_ceiling {
            warnings.push(format!(
                "reservoir {}: derived ceiling {} MWh is above the physical ceiling",
                m.reservoir_id, m.e_max
            ));
        }
    }
    for (name, run) in [("legacy", &legacy), ("proposed", &proposed)] {
        if !matches!(run.solve.status, MipStatus::Optimal | MipStatus::GapReached) {
            warnings.push(format!(
                "{name} run stopped with {:?}, gap {}",
                run.solve.status, run.solve.gap
            ));
        }
    }
    let units = case
        .psh_units
        .iter()
        .map(|u| -> Result<UnitBenefit, AnalysisError> {
            let l = psh_profit(&legacy.schedule, &legacy.prices, &u.id)?;
            let p = psh_profit(&proposed.schedule, &proposed.prices, &u.id)?;
            Ok(UnitBenefit {
                psh_id: u.id.clone(),
                profit_improvement_pct: pct_change(l.profit, p.profit),
                legacy: l,
                proposed: p,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let legacy_objective = legacy.thermal_cost;
    let proposed_objective = proposed.solve.objective;
    let report = BenefitReport {
        legacy_objective,
        proposed_objective,
        objective_improvement_pct: pct_change(legacy_objective, proposed_objective).map(|p| -p),
        units,
        matched_soc_endpoints: matched.endpoints,
        warnings,
    };
    Ok(Comparison {
        report,
        legacy,
        proposed,
    })
}

/// Number of mode sequences a unit can follow over the horizon, honouring
/// transition feasibility and minimum residence times.
fn unit_sequences(unit: &PshUnit, usable: [bool; 3], n_t: usize, dt: f64) -> Vec<Vec<Mode>> {
    let min_len = |m: Mode| -> usize {
        unit.min_up_hours
            .as_ref()
            .and_then(|h| h.get(m))
            .map_or(1, |hours| ((hours / dt) - 1e-9).ceil().max(1.0) as usize)
    };
    let mut out = Vec::new();
    let mut seq = Vec::with_capacity(n_t);
    // run_start: interval at which the current run was entered inside the
    // horizon (None for the run continuing from before the horizon)
    fn walk(
        unit: &PshUnit,
        usable: &[bool; 3],
        n_t: usize,
        min_len: &dyn Fn(Mode) -> usize,
        seq: &mut Vec<Mode>,
        run_start: Option<usize>,
        out: &mut Vec<Vec<Mode>>,
    ) {
        let t = seq.len();
        if t == n_t {
            out.push(seq.clone());
            return;
        }
        let prev = seq.last().copied().unwrap_or(unit.initial_mode);
        for m in Mode::ALL {
            if !usable[m.index()] {
                continue;
            }
            let start = if m == prev && t > 0 {
                run_start
            } else if m == prev {
                None
            } else {
                if !unit.allows(prev, m) {
                    continue;
                }
                // leaving a run entered inside the horizon before its minimum length
                if t > 0 {
                    if let Some(s) = run_start {
                        if t - s < min_len(prev) {
                            continue;
                        }
                    }
                }
                Some(t)
            };
            seq.push(m);
            walk(unit, usable, n_t, min_len, seq, start, out);
            seq.pop();
        }
    }
    walk(unit, &usable, n_t, &min_len, &mut seq, None, &mut out);
    out
}

/// Reservoir-limited output ceilings, recomputed here so the oracle does not
/// share code with the model builders.
fn ceilings(case: &ValidatedCase, unit: &PshUnit) -> (f64, f64) {
    let res = case
        .reservoirs
        .iter()
        .find(|r| r.id == unit.reservoir_id)
        .expect("validated reference");
    let span = res.e_max - res.e_min;
    let dt = case.horizon.dt_hours;
    (
        (span * unit.eta_gen / dt).min(unit.q_gen_max),
        (span / (unit.eta_pump * dt)).min(unit.q_pump_max),
    )
}

fn usable_modes(case: &ValidatedCase, unit: &PshUnit) -> [bool; 3] {
    let (gen, pump) = ceilings(case, unit);
    [true, unit.q_gen_min <= gen, unit.q_pump_min <= pump]
}

/// Size of the joint enumeration performed by [`brute_force_uc`]: the
/// product over units of their feasible mode sequences.
pub fn enumeration_size(case: &ValidatedCase) -> u128 {
    let n_t = case.horizon.n_intervals;
    let dt = case.horizon.dt_hours;
    case.psh_units
        .iter()
        .map(|u| count_sequences(u, usable_modes(case, u), n_t, dt))
        .fold(1u128, |acc, c| acc.saturating_mul(c))
}

fn count_sequences(unit: &PshUnit, usable: [bool; 3], n_t: usize, dt: f64) -> u128 {
    if unit.min_up_hours.is_some() {
        // residence rules make the state richer; fall back to the exact walk
        // only when the plain bound is small
        let plain = count_sequences(
            &PshUnit {
                min_up_hours: None,
                ..unit.clone()
            },
            usable,
            n_t,
            dt,
        );
        if plain > 1_000_000 {
            return plain;
        }
        return unit_sequences(unit, usable, n_t, dt).len() as u128;
    }
    let mut ways = [0u128; 3];
    let mut first = true;
    for _ in 0..n_t {
        let mut next = [0u128; 3];
        for m in Mode::ALL {
            if !usable[m.index()] {
                continue;
            }
            next[m.index()] = if first {
                u128::from(m == unit.initial_mode || unit.allows(unit.initial_mode, m))
            } else {
                Mode::ALL
                    .into_iter()
                    .filter(|&p| p == m || unit.allows(p, m))
                    .map(|p| ways[p.index()])
                    .fold(0u128, |a, b| a.saturating_add(b))
            };
        }
        ways = next;
        first = false;
    }
    ways.iter().fold(0u128, |a, &b| a.saturating_add(b))
}

/// Minimum objective of the proposed model by enumerating every joint mode
/// schedule and solving the remaining dispatch LP for each. `None` when no
/// schedule is feasible.
///
/// The dispatch LP is built here from the case data directly: state of
/// charge is expressed through cumulative sums rather than reservoir
/// variables, and there are no commitment or transition variables.
pub fn brute_force_uc(
    case: &ValidatedCase,
    objective: ObjectiveMode,
    max_dimension: u128,
) -> Result<Option<f64>, AnalysisError> {
    let dimension = enumeration_size(case);
    if dimension > max_dimension {
        return Err(AnalysisError::TooLarge {
            dimension,
            limit: max_dimension,
        });
    }
    let n_t = case.horizon.n_intervals;
    let dt = case.horizon.dt_hours;
    let per_unit: Vec<Vec<Vec<Mode>>> = case
        .psh_units
        .iter()
        .map(|u| unit_sequences(u, usable_modes(case, u), n_t, dt))
        .collect();
    if per_unit.iter().any(|s| s.is_empty()) {
        return Ok(None);
    }
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; per_unit.len()];
    loop {
        let modes: Vec<&[Mode]> = pick
            .iter()
            .zip(&per_unit)
            .map(|(&i, s)| s[i].as_slice())
            .collect();
        if joint_rules_hold(case, &modes) {
            if let Some(obj) = fixed_mode_dispatch(case, &modes, objective)? {
                best = Some(best.map_or(obj, |b| b.min(obj)));
            }
        }
        // odometer over the per-unit sequence lists
        let mut k = 0;
        loop {
            if k == pick.len() {
                return Ok(best);
            }
            pick[k] += 1;
            if pick[k] < per_unit[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
    }
}

/// Pump start limits and plant exclusivity across units of a reservoir.
fn joint_rules_hold(case: &ValidatedCase, modes: &[&[Mode]]) -> bool {
    for res in &case.reservoirs {
        let members: Vec<usize> = case
            .psh_units
            .iter()
            .enumerate()
            .filter(|(_, u)| u.reservoir_id == res.id)
            .map(|(g, _)| g)
            .collect();
        for t in 0..case.horizon.n_intervals {
            if res.plant_exclusive {
                let pumping = members.iter().any(|&g| modes[g][t] == Mode::Pump);
                let generating = members.iter().any(|&g| modes[g][t] == Mode::Gen);
                if pumping && generating {
                    return false;
                }
            }
            if let Some(limit) = res.pump_start_limit {
                let starts = members
                    .iter()
                    .filter(|&&g| {
                        let prev = if t == 0 {
                            case.psh_units[g].initial_mode
                        } else {
                            modes[g][t - 1]
                        };
                        modes[g][t] == Mode::Pump && prev != Mode::Pump
                    })
                    .count();
                if starts > limit as usize {
                    return false;
                }
            }
        }
    }
    true
}

fn fixed_mode_dispatch(
    case: &ValidatedCase,
    modes: &[&[Mode]],
    objective: ObjectiveMode,
) -> Result<Option<f64>, AnalysisError> {
    let n_t = case.horizon.n_intervals;
    let dt = case.horizon.dt_hours;
    let mut m = Milp::new();
    let mut gen = vec![vec![0usize; n_t]; case.psh_units.len()];
    let mut pump = vec![vec![0usize; n_t]; case.psh_units.len()];
    for (g, unit) in case.psh_units.iter().enumerate() {
        let (gen_cap, pump_cap) = ceilings(case, unit);
        let bid = case
            .legacy_bids
            .as_ref()
            .and_then(|b| b.iter().find(|b| b.psh_id == unit.id));
        for t in 0..n_t {
            let (offer, bid_price) = match (objective, bid) {
                (ObjectiveMode::WithPshBids, Some(b)) => {
                    (b.gen_offer_price.at(t), b.pump_bid_price.at(t))
                }
                _ => (0.0, 0.0),
            };
            let (glo, ghi) = if modes[g][t] == Mode::Gen {
                (unit.q_gen_min, gen_cap)
            } else {
                (0.0, 0.0)
            };
            let (plo, phi) = if modes[g][t] == Mode::Pump {
                (unit.q_pump_min, pump_cap)
            } else {
                (0.0, 0.0)
            };
            gen[g][t] = m.add_var(Variable::continuous(
                format!("g{g}_{t}"),
                glo,
                ghi,
                offer * dt,
            ));
            pump[g][t] = m.add_var(Variable::continuous(
                format!("p{g}_{t}"),
                plo,
                phi,
                -bid_price * dt,
            ));
        }
    }
    for t in 0..n_t {
        let mut terms = Vec::new();
        let mut rhs = case.horizon.net_load[t];
        for th in &case.thermal_units {
            let base = th.cost_segments.first().map_or(0.0, |s| s.price);
            m.constant_offset += base * th.q_min * dt;
            rhs -= th.q_min;
            for (s, seg) in th.cost_segments.iter().enumerate() {
                terms.push((
                    m.add_var(Variable::continuous(
                        format!("{}_{t}_{s}", th.id),
                        0.0,
                        seg.width,
                        seg.price * dt,
                    )),
                    1.0,
                ));
            }
        }
        for g in 0..case.psh_units.len() {
            terms.push((gen[g][t], 1.0));
            terms.push((pump[g][t], -1.0));
        }
        m.add_row(format!("d{t}"), terms, Sense::Eq, rhs);
    }
    for res in &case.reservoirs {
        let mut cumulative: Vec<(usize, f64)> = Vec::new();
        for t in 0..n_t {
            for (g, unit) in case
                .psh_units
                .iter()
                .enumerate()
                .filter(|(_, u)| u.reservoir_id == res.id)
            {
                cumulative.push((pump[g][t], dt * unit.eta_pump));
                cumulative.push((gen[g][t], -dt / unit.eta_gen));
            }
            // e_{t+1} - e_initial as a running sum
            if t + 1 == n_t {
                m.add_row(
                    format!("{}_end", res.id),
                    cumulative.clone(),
                    Sense::Eq,
                    res.e_final - res.e_initial,
                );
            }
            m.add_row(
                format!("{}_hi{t}", res.id),
                cumulative.clone(),
                Sense::Le,
                res.e_max - res.e_initial,
            );
            m.add_row(
                format!("{}_lo{t}", res.id),
                cumulative.clone(),
                Sense::Ge,
                res.e_min - res.e_initial,
            );
        }
    }
    let lp = solve_lp(&m)?;
    Ok((lp.status == LpStatus::Optimal).then_some(lp.objective))
}

/// Size differences between the configuration model and the same model
/// without reservoir variables and rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    /// Added variables per family (e.g. `e`, `ur`).
    pub added_variables: BTreeMap<String, usize>,
    pub added_continuous: usize,
    pub added_binaries: usize,
    /// Added rows per family.
    pub added_rows: BTreeMap<String, usize>,
    /// Added nonzeros per row family, counting every term of the added rows.
    pub added_nonzeros: BTreeMap<String, usize>,
    /// Term count of each state-of-charge recursion row, by reservoir.
    pub soc_row_nonzeros: BTreeMap<String, Vec<usize>>,
}

/// Compare two models by variable and row family names.
pub fn compactness_report(proposed: &Milp, baseline: &Milp) -> CompactnessReport {
    let mut r = CompactnessReport::default();
    let count_vars = |m: &Milp| {
        let mut c: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for v in &m.variables {
            let e = c.entry(v.family().to_string()).or_default();
            if v.is_binary() {
                e.1 += 1;
            } else {
                e.0 += 1;
            }
        }
        c
    };
    let count_rows = |m: &Milp| {
        let mut c: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for row in &m.rows {
            let e = c.entry(row.family().to_string()).or_default();
            e.0 += 1;
            e.1 += row.terms.len();
        }
        c
    };
    let (pv, bv) = (count_vars(proposed), count_vars(baseline));
    for (family, &(cont, bin)) in &pv {
        let (bc, bb) = bv.get(family).copied().unwrap_or_default();
        let added = (cont + bin).saturating_sub(bc + bb);
        if added > 0 {
            r.added_variables.insert(family.clone(), added);
        }
        r.added_continuous += cont.saturating_sub(bc);
        r.added_binaries += bin.saturating_sub(bb);
    }
    let (pr, br) = (count_rows(proposed), count_rows(baseline));
    for (family, &(rows, nz)) in &pr {
        let (brows, bnz) = br.get(family).copied().unwrap_or_default();
        if rows > brows {
            r.added_rows.insert(family.clone(), rows - brows);
            r.added_nonzeros.insert(family.clone(), nz - bnz);
        }
    }
    for row in proposed.rows.iter().filter(|row| row.family() == "soc") {
        let reservoir = row.name[4..]
            .split(',')
            .next()
            .unwrap_or_default()
            .to_string();
        r.soc_row_nonzeros
            .entry(reservoir)
            .or_default()
            .push(row.terms.len());
    }
    r
}

/// Closed-form size of the reservoir extension for a case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactnessFormulas {
    /// R·(T+1)
    pub soc_variables: usize,
    /// 2·T per plant-exclusive reservoir.
    pub plant_variables: usize,
    /// 2 + 2·|units on the reservoir| for each reservoir.
    pub soc_row_nonzeros: BTreeMap<String, usize>,
}

pub fn compactness_formulas(case: &ValidatedCase) -> CompactnessFormulas {
    let n_t = case.horizon.n_intervals;
    let r = case.reservoirs.len();
    CompactnessFormulas {
        soc_variables: r * (n_t + 1),
        plant_variables: case
            .reservoirs
            .iter()
            .filter(|res| res.plant_exclusive)
            .count()
            * 2
            * n_t,
        soc_row_nonzeros: case
            .reservoirs
            .iter()
            .map(|res| {
                (
                    res.id.clone(),
                    2 + 2 * case
                        .psh_units
                        .iter()
                        .filter(|u| u.reservoir_id == res.id)
                        .count(),
                )
            })
            .collect(),
    }
}

/// Shape of a synthetic daily net-load curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadShape {
    /// Depth of the overnight valley as a fraction of the peak, in [0, 1).
    pub valley_depth: f64,
    pub peak_count: usize,
    /// Highest net load in MW.
    pub peak_mw: f64,
}

/// Smooth daily curve: a valley around the early morning and `peak_count`
/// bumps spread over the day, scaled so the maximum is `peak_mw` and the
/// minimum is `peak_mw·(1 - valley_depth)`.
pub fn synthetic_net_load(rng: &mut impl Rng, n_intervals: usize, shape: &LoadShape) -> Vec<f64> {
    let day = n_intervals as f64;
    let valley_at = day * rng.gen_range(0.12..0.3);
    let valley_width = day * rng.gen_range(0.08..0.15);
    let peaks: Vec<(f64, f64, f64)> = (0..shape.peak_count.max(1))
        .map(|k| {
            let slot = day
                * (0.4
                    + 0.5 * (k as f64 + rng.gen_range(0.2..0.8)) / shape.peak_count.max(1) as f64);
            (
                slot.min(day - 1.0),
                day * rng.gen_range(0.05..0.12),
                rng.gen_range(0.6..1.0),
            )
        })
        .collect();
    let raw: Vec<f64> = (0..n_intervals)
        .map(|t| {
            let x = t as f64 + 0.5;
            let bump = |c: f64, w: f64| (-(x - c).powi(2) / (2.0 * w * w)).exp();
            let mut v = 1.0 - bump(valley_at, valley_width);
            for &(c, w, h) in &peaks {
                v += h * bump(c, w);
            }
            v + rng.gen_range(-0.03..0.03)
        })
        .collect();
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let floor = shape.peak_mw * (1.0 - shape.valley_depth);
    raw.iter()
        .map(|&v| {
            let unit = if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
            (floor + unit * (shape.peak_mw - floor)).round()
        })
        .collect()
}

/// Copies of `base` with seeded random net-load curves. Peaks stay within
/// 60-90% of thermal capacity so every scenario can be served.
pub fn random_scenarios(base: &Case, count: usize, seed: u64) -> Vec<(LoadShape, Case)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let capacity: f64 = base.thermal_units.iter().map(|t| t.q_max).sum();
    (0..count)
        .map(|_| {
            let shape = LoadShape {
                valley_depth: rng.gen_range(0.3..0.8),
                peak_count: rng.gen_range(1..=3),
                peak_mw: capacity * rng.gen_range(0.6..0.9),
            };
            let mut case = base.clone();
            case.horizon = Horizon {
                net_load: synthetic_net_load(&mut rng, base.horizon.n_intervals, &shape),
                ..base.horizon.clone()
            };
            (shape, case)
        })
        .collect()
}

/// Shape of a random instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomCaseSpec {
    pub n_intervals: usize,
    pub n_reservoirs: usize,
    /// Units per reservoir.
    pub units_per_reservoir: usize,
    pub n_thermal: usize,
    pub plant_exclusive: bool,
    pub pump_start_limit: Option<u32>,
    pub with_legacy_bids: bool,
}

/// Random valid instance. Thermal capacity always covers the peak net load
/// plus all pumping, so the all-off schedule is always dispatchable.
pub fn random_case(rng: &mut impl Rng, spec: &RandomCaseSpec) -> Case {
    let n_t = spec.n_intervals;
    let mut psh_units = Vec::new();
    let mut reservoirs = Vec::new();
    let mut pump_total = 0.0;
    for r in 0..spec.n_reservoirs {
        let e_min = rng.gen_range(0.0..500.0f64).round();
        let e_max = e_min + rng.gen_range(200.0..1500.0f64).round();
        let e_initial = rng.gen_range(e_min..=e_max).round();
        reservoirs.push(Reservoir {
            id: format!("res{r}"),
            e_min,
            e_max,
            e_initial,
            // returning to the start is always reachable
            e_final: e_initial,
            pump_start_limit: spec.pump_start_limit,
            plant_exclusive: spec.plant_exclusive,
        });
        for k in 0..spec.units_per_reservoir {
            let q_gen_max = rng.gen_range(50.0..250.0f64).round();
            let q_pump_max = rng.gen_range(50.0..250.0f64).round();
            let block = rng.gen_bool(0.5);
            pump_total += q_pump_max;
            let mut transitions = all_transitions();
            if rng.gen_bool(0.3) {
                transitions.retain(|&(a, b)| {
                    !(a == Mode::Gen && b == Mode::Pump || a == Mode::Pump && b == Mode::Gen)
                });
            }
            psh_units.push(PshUnit {
                id: format!("psh{r}_{k}"),
                reservoir_id: format!("res{r}"),
                q_gen_min: (q_gen_max * rng.gen_range(0.0..0.6)).round(),
                q_gen_max,
                q_pump_min: if block {
                    q_pump_max
                } else {
                    (q_pump_max * rng.gen_range(0.0..0.8)).round()
                },
                q_pump_max,
                eta_gen: rng.gen_range(0.75..0.95),
                eta_pump: rng.gen_range(0.75..0.95),
                feasible_transitions: transitions,
                min_up_hours: None,
                initial_mode: Mode::AllOff,
            });
        }
    }
    let net_load: Vec<f64> = (0..n_t)
        .map(|_| rng.gen_range(100.0..900.0f64).round())
        .collect();
    let peak = net_load.iter().fold(0.0f64, |a, &b| a.max(b));
    let needed = peak + pump_total;
    let mut thermal_units = Vec::new();
    let mut remaining = needed * 1.1;
    for k in 0..spec.n_thermal {
        let last = k + 1 == spec.n_thermal;
        let cap = if last {
            remaining.max(50.0)
        } else {
            (remaining * rng.gen_range(0.2..0.5)).round()
        };
        remaining -= cap;
        let q_min = if rng.gen_bool(0.3) {
            (cap * 0.1).round()
        } else {
            0.0
        };
        let n_seg = rng.gen_range(1..=3);
        let width = (cap - q_min) / n_seg as f64;
        let mut price = rng.gen_range(10.0..40.0f64).round();
        let cost_segments = (0..n_seg)
            .map(|_| {
                let seg = CostSegment { price, width };
                price += rng.gen_range(0.0..10.0f64).round();
                seg
            })
            .collect();
        thermal_units.push(ThermalUnit {
            id: format!("th{k}"),
            q_min,
            q_max: cap,
            cost_segments,
        });
    }
    let min_must_run: f64 = thermal_units.iter().map(|t| t.q_min).sum();
    // keep must-run output below the lightest load
    let light = net_load.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min_must_run > light {
        for th in &mut thermal_units {
            let w = th.q_max / th.cost_segments.len() as f64;
            th.q_min = 0.0;
            th.cost_segments.iter_mut().for_each(|s| s.width = w);
        }
    }
    let legacy_bids = spec.with_legacy_bids.then(|| {
        psh_units
            .iter()
            .map(|u| {
                let split = rng.gen_range(1..n_t.max(2));
                let start = rng.gen_range(0..split);
                LegacyBid {
                    psh_id: u.id.clone(),
                    gen_offer_price: PriceProfile::Flat(rng.gen_range(15.0..35.0f64).round()),
                    pump_bid_price: PriceProfile::Flat(rng.gen_range(10.0..30.0f64).round()),
                    pump_window: (start..split).collect(),
                    gen_window: (split..n_t).collect(),
                    daily_max_gen: rng.gen_range(0.0..(u.q_gen_max * n_t as f64)).round(),
                }
            })
            .collect()
    });
    Case {
        psh_units,
        reservoirs,
        thermal_units,
        horizon: Horizon::hourly(net_load),
        legacy_bids,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{build_baseline, ModelKind};
    use crate::model::two_unit_system;
    use crate::solver::solve_mip;

    fn single_unit(load: Vec<f64>) -> ValidatedCase {
        let mut c = two_unit_system(load);
        c.psh_units.truncate(1);
        validate_case(c).unwrap()
    }

    #[test]
    fn idle_legacy_run_pins_the_reservoir() {
        let case = single_unit(vec![500.0; 4]);
        let schedule = Schedule {
            model: ModelKind::Legacy,
            dt_hours: 1.0,
            net_load: vec![500.0; 4],
            psh: vec![crate::formulation::PshSchedule {
                id: "psh1".into(),
                reservoir_id: "upper".into(),
                mode: vec![Mode::AllOff; 4],
                q_gen: vec![0.0; 4],
                q_pump: vec![0.0; 4],
            }],
            soc: vec![crate::formulation::SocTrajectory {
                reservoir_id: "upper".into(),
                e: vec![2600.0; 5],
            }],
            thermal: Vec::new(),
        };
        let matched = derive_matched_bounds(&case, &schedule);
        let r = &matched.case.reservoirs[0];
        assert_eq!((r.e_min, r.e_max, r.e_final), (2600.0, 2600.0, 2600.0));
        let matched_case = validate_case(matched.case).unwrap();
        let (m, map) = build_proposed(&matched_case, ObjectiveMode::ThermalOnly).unwrap();
        let s = solve_mip(&m, &MipOptions::default()).unwrap();
        let decoded = decode_schedule(&matched_case, &map, &s.incumbent).unwrap();
        assert!(decoded.psh[0].mode.iter().all(|&m| m == Mode::AllOff));
    }

    #[test]
    fn matched_limits_from_energy_totals() {
        let case = validate_case(two_unit_system(vec![500.0; 24])).unwrap();
        let mut q_pump = vec![0.0; 24];
        q_pump[..5].fill(200.0);
        let mut q_gen = [0.0; 24];
        // 1620 MWh in total over nine intervals
        q_gen[10..19].fill(180.0);
        let unit = |id: &str| crate::formulation::PshSchedule {
            id: id.into(),
            reservoir_id: "upper".into(),
            mode: vec![Mode::AllOff; 24],
            q_gen: q_gen.iter().map(|q| q / 2.0).collect(),
            q_pump: q_pump.clone(),
        };
        let schedule = Schedule {
            model: ModelKind::Legacy,
            dt_hours: 1.0,
            net_load: vec![500.0; 24],
            psh: vec![unit("psh1"), unit("psh2")],
            soc: vec![crate::formulation::SocTrajectory {
                reservoir_id: "upper".into(),
                e: vec![2600.0; 25],
            }],
            thermal: Vec::new(),
        };
        let matched = derive_matched_bounds(&case, &schedule);
        let e = &matched.endpoints[0];
        assert!((e.e_max - 4400.0).abs() < 1e-9);
        assert!((e.e_min - 800.0).abs() < 1e-9);
        assert_eq!(e.e_final, 2600.0);
        assert!(e.below_physical_floor && e.above_physical_ceiling);
        assert_eq!(matched.case.reservoirs[0].e_min, e.e_min);
    }

    #[test]
    fn brute_force_on_forced_idle_unit_is_thermal_dispatch() {
        let mut c = two_unit_system(vec![700.0]);
        c.psh_units.truncate(1);
        c.reservoirs[0].e_min = 2600.0;
        c.reservoirs[0].e_max = 2600.0;
        let case = validate_case(c).unwrap();
        let obj = brute_force_uc(&case, ObjectiveMode::ThermalOnly, 100)
            .unwrap()
            .unwrap();
        assert!((obj - (500.0 * 15.0 + 200.0 * 20.0)).abs() < 1e-9);
    }

    #[test]
    fn brute_force_guard() {
        let case = validate_case(two_unit_system(vec![700.0; 20])).unwrap();
        assert!(matches!(
            brute_force_uc(&case, ObjectiveMode::ThermalOnly, 1_000_000),
            Err(AnalysisError::TooLarge { .. })
        ));
    }

    #[test]
    fn sequence_count_matches_walk() {
        let case = single_unit(vec![500.0; 5]);
        let u = &case.psh_units[0];
        let usable = usable_modes(&case, u);
        assert_eq!(count_sequences(u, usable, 5, 1.0), 243);
        assert_eq!(unit_sequences(u, usable, 5, 1.0).len(), 243);
        let mut v = u.clone();
        v.feasible_transitions.retain(|&(a, b)| {
            (a, b) != (Mode::Gen, Mode::Pump) && (a, b) != (Mode::Pump, Mode::Gen)
        });
        assert_eq!(
            count_sequences(&v, usable, 5, 1.0) as usize,
            unit_sequences(&v, usable, 5, 1.0).len()
        );
    }

    #[test]
    fn brute_force_agrees_with_mip_on_valley_day() {
        let case = single_unit(vec![300.0, 250.0, 1100.0, 1200.0]);
        let oracle = brute_force_uc(&case, ObjectiveMode::ThermalOnly, 1000)
            .unwrap()
            .unwrap();
        let (m, _) = build_proposed(&case, ObjectiveMode::ThermalOnly).unwrap();
        let s = solve_mip(&m, &MipOptions::with_gap(0.0)).unwrap();
        assert!(
            (s.objective - oracle).abs() <= 1e-6 * oracle.abs(),
            "{} vs {}",
            s.objective,
            oracle
        );
    }

    #[test]
    fn compactness_of_one_reservoir_day() {
        let mut c = two_unit_system(vec![700.0; 24]);
        c.psh_units.truncate(1);
        let case = validate_case(c.clone()).unwrap();
        let (p, _) = build_proposed(&case, ObjectiveMode::ThermalOnly).unwrap();
        let (b, _) = build_baseline(&case, ObjectiveMode::ThermalOnly);
        let r = compactness_report(&p, &b);
        assert_eq!(r.added_variables.get("e"), Some(&25));
        assert_eq!(r.added_continuous, 25);
        assert_eq!(r.added_binaries, 0);
        assert_eq!(r.soc_row_nonzeros["upper"], vec![4; 24]);

        c.reservoirs[0].plant_exclusive = true;
        let case = validate_case(c).unwrap();
        let (p, _) = build_proposed(&case, ObjectiveMode::ThermalOnly).unwrap();
        let (b, _) = build_baseline(&case, ObjectiveMode::ThermalOnly);
        let r = compactness_report(&p, &b);
        assert_eq!(r.added_variables.get("ur"), Some(&48));
        assert_eq!(compactness_formulas(&case).plant_variables, 48);
    }

    #[test]
    fn scenarios_are_reproducible() {
        let base = two_unit_system(vec![0.0; 24]);
        let a = random_scenarios(&base, 3, 7);
        let b = random_scenarios(&base, 3, 7);
        assert_eq!(a, b);
        for (shape, case) in &a {
            let max = case.horizon.net_load.iter().fold(0.0f64, |x, &y| x.max(y));
            let min = case
                .horizon
                .net_load
                .iter()
                .fold(f64::INFINITY, |x, &y| x.min(y));
            assert!((max - shape.peak_mw).abs() <= 0.5);
            assert!((min - shape.peak_mw * (1.0 - shape.valley_depth)).abs() <= 0.5);
        }
        assert_ne!(random_scenarios(&base, 1, 8)[0].1, a[0].1);
    }

    #[test]
    fn random_cases_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let spec = RandomCaseSpec {
                n_intervals: rng.gen_range(1..8),
                n_reservoirs: rng.gen_range(1..3),
                units_per_reservoir: rng.gen_range(1..3),
                n_thermal: 3,
                plant_exclusive: rng.gen_bool(0.5),
                pump_start_limit: rng.gen_bool(0.5).then_some(1),
                with_legacy_bids: true,
            };
            validate_case(random_case(&mut rng, &spec)).unwrap();
        }
    }
}
