//! Built-in LP and MILP solvers plus the pluggable backend handle.

mod backend;
mod bnb;
mod cuts;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::milp::{Milp, MilpError};

#[cfg(feature = "microlp-backend")]
pub use backend::MicrolpBackend;
pub use backend::{register_backend, SolverBackend, SolverHandle, BACKEND_ENV};
pub use bnb::{solve_mip, solve_mip_observed, BnbEvent};

use simplex::{Outcome, Simplex};

/// Feasibility tolerance for reported LP solutions.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Distance from {0, 1} accepted as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Default relative MIP gap for exact work.
pub const DEFAULT_REL_GAP: f64 = 1e-6;
/// Relative MIP gap accepted for market operation.
pub const OPERATIONAL_REL_GAP: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("invalid model: {0}")]
    InvalidModel(#[from] MilpError),
    #[error("relaxation is unbounded")]
    Unbounded,
    #[error("solver backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// Objective sensitivity to each row's right-hand side.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    /// Includes the model's constant offset.
    pub objective: f64,
    /// Lagrangian bound from `duals` and `reduced_costs`; equals `objective`
    /// at an optimum up to round-off.
    pub dual_objective: f64,
    /// Some basic variable sits on a bound, so the duals may not be unique.
    pub degenerate: bool,
    /// Infeasible: phase-1 row multipliers. Unbounded: improving ray over the
    /// structural variables.
    pub certificate: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    fn without_solution(
        status: LpStatus,
        certificate: Option<Vec<f64>>,
        iterations: usize,
    ) -> Self {
        LpSolution {
            status,
            primal: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            dual_objective: f64::NAN,
            degenerate: false,
            certificate,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn duality_gap(&self) -> f64 {
        (self.objective - self.dual_objective).abs()
    }
}

/// Solve the continuous relaxation of `model` (binaries relaxed to [0, 1]).
pub fn solve_lp(model: &Milp) -> Result<LpSolution, SolverError> {
    model.validate()?;
    let mut lp = Simplex::new(model);
    let outcome = lp.primal()?;
    Ok(extract(model, &mut lp, outcome))
}

fn extract(model: &Milp, lp: &mut Simplex, outcome: Outcome) -> LpSolution {
    match outcome {
        Outcome::Infeasible => {
            LpSolution::without_solution(LpStatus::Infeasible, lp.certificate.take(), lp.iterations)
        }
        Outcome::Unbounded => {
            LpSolution::without_solution(LpStatus::Unbounded, lp.certificate.take(), lp.iterations)
        }
        Outcome::Optimal => {
            let n = lp.n_structural();
            let primal = clean_primal(model, &lp.values()[..n]);
            let (duals, reduced_costs) = lp.duals_and_reduced_costs();
            let dual_objective = lp.dual_objective(&duals) + model.constant_offset;
            LpSolution {
                status: LpStatus::Optimal,
                objective: model.objective_value(&primal),
                primal,
                duals,
                reduced_costs,
                dual_objective,
                degenerate: lp.is_degenerate(),
                certificate: None,
                iterations: lp.iterations,
            }
        }
    }
}

/// Clip round-off outside variable bounds.
fn clean_primal(model: &Milp, x: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(&model.variables)
        .map(|(&v, var)| {
            let v = v.clamp(var.lower, var.upper);
            if v == -0.0 {
                0.0
            } else {
                v
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MipStatus {
    /// Search tree exhausted.
    Optimal,
    /// Stopped with gap at or below the requested relative gap.
    GapReached,
    Infeasible,
    NodeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MipOptions {
    pub rel_gap: f64,
    pub node_limit: usize,
    /// Rounds of Gomory cuts at the root; 0 disables them.
    pub cut_rounds: usize,
}

impl Default for MipOptions {
    fn default() -> Self {
        MipOptions {
            rel_gap: DEFAULT_REL_GAP,
            node_limit: 1_000_000,
            cut_rounds: 20,
        }
    }
}

impl MipOptions {
    pub fn with_gap(rel_gap: f64) -> Self {
        MipOptions {
            rel_gap,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipSolution {
    pub status: MipStatus,
    /// Empty when no integral point was found.
    pub incumbent: Vec<f64>,
    /// `+inf` without an incumbent.
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes_explored: usize,
}

impl MipSolution {
    pub fn has_incumbent(&self) -> bool {
        !self.incumbent.is_empty()
    }
}

/// Relative gap for minimization, `+inf` without an incumbent.
pub fn relative_gap(objective: f64, best_bound: f64) -> f64 {
    if !objective.is_finite() {
        return f64::INFINITY;
    }
    ((objective - best_bound) / objective.abs().max(1e-10)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Sense, Variable};

    fn one_var(lo: f64, hi: f64, cost: f64) -> (Milp, usize) {
        let mut m = Milp::new();
        let x = m.add_var(Variable::continuous("x", lo, hi, cost));
        (m, x)
    }

    #[test]
    fn min_x_above_one() {
        let (mut m, x) = one_var(0.0, 10.0, 1.0);
        m.add_row("floor", [(x, 1.0)], Sense::Ge, 1.0);
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.primal[0] - 1.0).abs() < 1e-12);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
        assert!(s.duality_gap() < 1e-9);
    }

    #[test]
    fn contradictory_rows() {
        let (mut m, x) = one_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        m.add_row("a", [(x, 1.0)], Sense::Le, 1.0);
        m.add_row("b", [(x, 1.0)], Sense::Ge, 2.0);
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        assert!(s.certificate.is_some());
    }

    #[test]
    fn unbounded_ray() {
        let (mut m, x) = one_var(0.0, f64::INFINITY, -1.0);
        m.add_row("a", [(x, 1.0)], Sense::Ge, 1.0);
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
        assert_eq!(s.certificate.unwrap(), vec![1.0]);
    }

    #[test]
    fn free_variable_and_equalities() {
        // min x + 2y st x + y = 3, x - y = 1  -> x=2, y=1
        let mut m = Milp::new();
        let x = m.add_var(Variable::continuous(
            "x",
            f64::NEG_INFINITY,
            f64::INFINITY,
            1.0,
        ));
        let y = m.add_var(Variable::continuous(
            "y",
            f64::NEG_INFINITY,
            f64::INFINITY,
            2.0,
        ));
        m.add_row("s", [(x, 1.0), (y, 1.0)], Sense::Eq, 3.0);
        m.add_row("d", [(x, 1.0), (y, -1.0)], Sense::Eq, 1.0);
        let s = solve_lp(&m).unwrap();
        assert!((s.primal[0] - 2.0).abs() < 1e-9 && (s.primal[1] - 1.0).abs() < 1e-9);
        assert!((s.objective - 4.0).abs() < 1e-9);
        // duals: 1 = y1 + y2, 2 = y1 - y2
        assert!((s.duals[0] - 1.5).abs() < 1e-9 && (s.duals[1] + 0.5).abs() < 1e-9);
    }

    #[test]
    fn classic_production_lp() {
        // max 3a + 5b st a <= 4, 2b <= 12, 3a + 2b <= 18 -> a=2, b=6, obj 36
        let mut m = Milp::new();
        let a = m.add_var(Variable::continuous("a", 0.0, f64::INFINITY, -3.0));
        let b = m.add_var(Variable::continuous("b", 0.0, f64::INFINITY, -5.0));
        m.add_row("r1", [(a, 1.0)], Sense::Le, 4.0);
        m.add_row("r2", [(b, 2.0)], Sense::Le, 12.0);
        m.add_row("r3", [(a, 3.0), (b, 2.0)], Sense::Le, 18.0);
        let s = solve_lp(&m).unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        // shadow prices of the textbook example: 0, -1.5, -1
        assert!(s.duals[0].abs() < 1e-9);
        assert!((s.duals[1] + 1.5).abs() < 1e-9);
        assert!((s.duals[2] + 1.0).abs() < 1e-9);
        assert!(s.duality_gap() < 1e-9);
    }

    #[test]
    fn relaxation_ignores_integrality() {
        let mut m = Milp::new();
        let b = m.add_var(Variable::binary("b", -1.0));
        m.add_row("half", [(b, 2.0)], Sense::Le, 1.0);
        let s = solve_lp(&m).unwrap();
        assert!((s.primal[b] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gap_definition() {
        assert_eq!(relative_gap(100.0, 99.0), 0.01);
        assert_eq!(relative_gap(f64::INFINITY, 0.0), f64::INFINITY);
        assert_eq!(relative_gap(5.0, 5.0), 0.0);
    }
}
