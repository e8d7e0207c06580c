//! Interval prices from the dispatch LP with commitments fixed, and PSH
//! owner settlement.

use serde::{Deserialize, Serialize};

use crate::formulation::{Schedule, VariableMap};
use crate::milp::{fix_variable, Milp};
use crate::solver::{solve_lp, LpStatus, MipSolution, SolverError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PricingError {
    #[error("the MIP solution has no incumbent")]
    NoIncumbent,
    #[error("the dispatch LP with fixed commitments is infeasible")]
    FixedLpInfeasible,
    #[error("schedule has {schedule} intervals, prices have {prices}")]
    HorizonMismatch { schedule: usize, prices: usize },
    #[error("no PSH unit {0} in the schedule")]
    UnknownUnit(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    /// $/MWh per interval.
    pub lmp: Vec<f64>,
    /// The fixed LP had a basic variable on a bound; other prices may
    /// support the same dispatch.
    pub degenerate: bool,
    /// Objective of the fixed LP in $.
    pub fixed_objective: f64,
    /// Lagrangian bound of the fixed LP at the reported duals.
    pub dual_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitStatement {
    pub psh_id: String,
    /// $ paid for generation.
    pub energy_revenue: f64,
    /// $ charged for pumping.
    pub pumping_cost: f64,
    pub profit: f64,
}

/// Fix every binary at its incumbent value, re-solve the dispatch LP and
/// read each interval's price from the dual of its energy balance row.
pub fn compute_lmp(
    model: &Milp,
    mip: &MipSolution,
    map: &VariableMap,
) -> Result<PriceSeries, PricingError> {
    let binaries: Vec<usize> = model.binary_indices().collect();
    if !binaries.is_empty() && !mip.has_incumbent() {
        return Err(PricingError::NoIncumbent);
    }
    let mut fixed = model.clone();
    for &j in &binaries {
        fixed = fix_variable(&fixed, j, mip.incumbent[j].round()).map_err(SolverError::from)?;
    }
    let lp = solve_lp(&fixed)?;
    if lp.status != LpStatus::Optimal {
        return Err(PricingError::FixedLpInfeasible);
    }
    Ok(PriceSeries {
        lmp: map
            .balance_rows
            .iter()
            .map(|&i| lp.duals[i] / map.dt_hours)
            .collect(),
        degenerate: lp.degenerate,
        fixed_objective: lp.objective,
        dual_objective: lp.dual_objective,
    })
}

pub fn psh_profit(
    schedule: &Schedule,
    prices: &PriceSeries,
    psh_id: &str,
) -> Result<ProfitStatement, PricingError> {
    if schedule.n_intervals() != prices.lmp.len() {
        return Err(PricingError::HorizonMismatch {
            schedule: schedule.n_intervals(),
            prices: prices.lmp.len(),
        });
    }
    let unit = schedule
        .unit(psh_id)
        .ok_or_else(|| PricingError::UnknownUnit(psh_id.into()))?;
    let dt = schedule.dt_hours;
    let energy_revenue: f64 = prices
        .lmp
        .iter()
        .zip(&unit.q_gen)
        .map(|(p, q)| p * q * dt)
        .sum();
    let pumping_cost: f64 = prices
        .lmp
        .iter()
        .zip(&unit.q_pump)
        .map(|(p, q)| p * q * dt)
        .sum();
    Ok(ProfitStatement {
        psh_id: psh_id.into(),
        energy_revenue,
        pumping_cost,
        profit: energy_revenue - pumping_cost,
    })
}
