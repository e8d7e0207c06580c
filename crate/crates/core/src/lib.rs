//! Day-ahead unit commitment and economic dispatch with configuration-based
//! pumped storage hydro units.
//!
//! The crate builds two market-clearing MILPs from a [`Case`]: the proposed
//! configuration model, where the operator co-optimizes pump/generate modes
//! and reservoir state of charge, and the legacy model, where owners submit
//! windows, prices and a daily generation limit. A built-in simplex and
//! branch-and-bound solver clears either model; prices come from the duals
//! of the energy balance rows with commitments fixed.

pub mod analysis;
pub mod formulation;
pub mod io;
pub mod milp;
pub mod model;
pub mod pricing;
pub mod solver;

pub use milp::{fix_variable, model_stats, Milp, ModelStats};
pub use model::{validate_case, Case, Mode, ValidatedCase};
