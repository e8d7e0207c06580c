use std::fmt;
use std::sync::Arc;

use crate::milp::Milp;

use super::{
    solve_lp, solve_mip, LpSolution, MipOptions, MipSolution, SolverError, INTEGRALITY_TOL,
};

/// Environment variable naming the solver backend (`builtin` or `microlp`).
pub const BACKEND_ENV: &str = "PSH_SOLVER_BACKEND";

/// Row violation above which a backend incumbent is rejected.
const BACKEND_ROW_TOL: f64 = 1e-6;

/// External MILP solver. Results must honour the same contracts as the
/// built-in [`solve_lp`] and [`solve_mip`].
pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &str;

    fn solve_lp(&self, model: &Milp) -> Result<LpSolution, SolverError>;

    fn solve_mip(&self, model: &Milp, options: &MipOptions) -> Result<MipSolution, SolverError>;
}

/// Routes solves to a registered backend, or to the built-in solver when
/// none is registered.
#[derive(Clone, Default)]
pub struct SolverHandle {
    backend: Option<Arc<dyn SolverBackend>>,
}

impl fmt::Debug for SolverHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverHandle")
            .field("backend", &self.backend_name())
            .finish()
    }
}

pub fn register_backend(backend: impl SolverBackend + 'static) -> SolverHandle {
    SolverHandle {
        backend: Some(Arc::new(backend)),
    }
}

impl SolverHandle {
    pub fn builtin() -> Self {
        SolverHandle { backend: None }
    }

    /// Select a backend by name: `builtin` (or empty) and, with the
    /// `microlp-backend` feature, `microlp`.
    pub fn by_name(name: &str) -> Result<Self, SolverError> {
        match name.trim() {
            "" | "builtin" => Ok(Self::builtin()),
            #[cfg(feature = "microlp-backend")]
            "microlp" => Ok(register_backend(super::MicrolpBackend)),
            other => Err(SolverError::BackendUnavailable(format!(
                "unknown backend `{other}`"
            ))),
        }
    }

    /// Backend from [`BACKEND_ENV`], built-in when unset.
    pub fn from_env() -> Result<Self, SolverError> {
        match std::env::var(BACKEND_ENV) {
            Ok(name) => Self::by_name(&name),
            Err(_) => Ok(Self::builtin()),
        }
    }

    pub fn backend_name(&self) -> &str {
        self.backend.as_deref().map_or("builtin", |b| b.name())
    }

    pub fn solve_lp(&self, model: &Milp) -> Result<LpSolution, SolverError> {
        match &self.backend {
            None => solve_lp(model),
            Some(b) => {
                let sol = b.solve_lp(model)?;
                if sol.is_optimal() {
                    check_point(model, &sol.primal, false, b.name())?;
                }
                Ok(sol)
            }
        }
    }

    pub fn solve_mip(
        &self,
        model: &Milp,
        options: &MipOptions,
    ) -> Result<MipSolution, SolverError> {
        match &self.backend {
            None => solve_mip(model, options),
            Some(b) => {
                let sol = b.solve_mip(model, options)?;
                if sol.has_incumbent() {
                    check_point(model, &sol.incumbent, true, b.name())?;
                }
                Ok(sol)
            }
        }
    }
}

fn check_point(model: &Milp, x: &[f64], integral: bool, name: &str) -> Result<(), SolverError> {
    if x.len() != model.n_vars() {
        return Err(SolverError::BackendUnavailable(format!(
            "{name}: returned {} values for {} variables",
            x.len(),
            model.n_vars()
        )));
    }
    let viol = model.max_violation(x);
    if viol > BACKEND_ROW_TOL {
        return Err(SolverError::BackendUnavailable(format!(
            "{name}: solution violates the model by {viol:e}"
        )));
    }
    if integral && model.max_integrality_violation(x) > INTEGRALITY_TOL {
        return Err(SolverError::BackendUnavailable(format!(
            "{name}: incumbent is not integral"
        )));
    }
    Ok(())
}

#[cfg(feature = "microlp-backend")]
mod microlp_impl {
    use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOptions, SolveOutcome};

    use super::*;
    use crate::milp::Sense;
    use crate::solver::{relative_gap, LpStatus, MipStatus};

    /// Pure-Rust backend on the `microlp` crate. Provides primal values and
    /// objectives only; duals stay with the built-in solver.
    #[derive(Debug, Clone, Copy, Default)]
    pub struct MicrolpBackend;

    fn build(model: &Milp, relax: bool) -> (Problem, Vec<microlp::Variable>) {
        let mut p = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = model
            .variables
            .iter()
            .map(|v| {
                if v.is_binary() && !relax {
                    p.add_integer_var(
                        v.objective_coeff,
                        (v.lower.ceil() as i32, v.upper.floor() as i32),
                    )
                } else {
                    p.add_var(v.objective_coeff, (v.lower, v.upper))
                }
            })
            .collect();
        for row in &model.rows {
            let op = match row.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Ge => ComparisonOp::Ge,
                Sense::Eq => ComparisonOp::Eq,
            };
            let terms: Vec<(microlp::Variable, f64)> =
                row.terms.iter().map(|&(j, a)| (vars[j], a)).collect();
            p.add_constraint(terms.as_slice(), op, row.rhs);
        }
        (p, vars)
    }

    fn map_err(e: microlp::Error) -> SolverError {
        SolverError::BackendUnavailable(format!("microlp: {e}"))
    }

    impl SolverBackend for MicrolpBackend {
        fn name(&self) -> &str {
            "microlp"
        }

        fn solve_lp(&self, model: &Milp) -> Result<LpSolution, SolverError> {
            model.validate()?;
            let (p, vars) = build(model, true);
            let empty = |status| LpSolution {
                status,
                primal: Vec::new(),
                duals: Vec::new(),
                reduced_costs: Vec::new(),
                objective: if status == LpStatus::Unbounded {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                },
                dual_objective: f64::NAN,
                degenerate: false,
                certificate: None,
                iterations: 0,
            };
            match p.solve() {
                Err(microlp::Error::Infeasible) => Ok(empty(LpStatus::Infeasible)),
                Err(microlp::Error::Unbounded) => Ok(empty(LpStatus::Unbounded)),
                Err(e) => Err(map_err(e)),
                Ok(SolveOutcome::Interrupted(_)) => Err(SolverError::BackendUnavailable(
                    "microlp: interrupted".into(),
                )),
                Ok(SolveOutcome::Solution(sol)) => {
                    let primal: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
                    Ok(LpSolution {
                        objective: model.objective_value(&primal),
                        primal,
                        ..empty(LpStatus::Optimal)
                    })
                }
            }
        }

        fn solve_mip(
            &self,
            model: &Milp,
            options: &MipOptions,
        ) -> Result<MipSolution, SolverError> {
            model.validate()?;
            let (p, vars) = build(model, false);
            let mut opts = SolveOptions::default();
            opts.mip_gap = options.rel_gap;
            opts.node_limit = Some(options.node_limit as u64);
            match p.solve_with(opts) {
                Err(microlp::Error::Infeasible) => Ok(MipSolution {
                    status: MipStatus::Infeasible,
                    incumbent: Vec::new(),
                    objective: f64::INFINITY,
                    best_bound: f64::INFINITY,
                    gap: f64::INFINITY,
                    nodes_explored: 0,
                }),
                Err(microlp::Error::Unbounded) => Err(SolverError::Unbounded),
                Err(e) => Err(map_err(e)),
                Ok(SolveOutcome::Interrupted(_)) => Ok(MipSolution {
                    status: MipStatus::NodeLimit,
                    incumbent: Vec::new(),
                    objective: f64::INFINITY,
                    best_bound: f64::NEG_INFINITY,
                    gap: f64::INFINITY,
                    nodes_explored: options.node_limit,
                }),
                Ok(SolveOutcome::Solution(sol)) => {
                    let incumbent: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
                    let objective = model.objective_value(&incumbent);
                    let gap = sol.gap().unwrap_or(0.0).max(0.0);
                    let best_bound = objective - gap * objective.abs();
                    let status = if gap <= 0.0 {
                        MipStatus::Optimal
                    } else {
                        MipStatus::GapReached
                    };
                    Ok(MipSolution {
                        status,
                        gap: relative_gap(objective, best_bound),
                        incumbent,
                        objective,
                        best_bound,
                        nodes_explored: sol.stats().nodes_solved as usize,
                    })
                }
            }
        }
    }
}

#[cfg(feature = "microlp-backend")]
pub use microlp_impl::MicrolpBackend;
