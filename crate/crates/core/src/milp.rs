//! Solver-agnostic sparse MILP container.
//!
//! Models are append-only: variables and rows are added during construction
//! and never removed, so indices handed out by [`Milp::add_var`] and
//! [`Milp::add_row`] stay valid for the model's lifetime.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrality {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integrality: Integrality,
    pub objective_coeff: f64,
}

impl Variable {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> Self {
        Variable {
            name: name.into(),
            lower,
            upper,
            integrality: Integrality::Continuous,
            objective_coeff: cost,
        }
    }

    pub fn binary(name: impl Into<String>, cost: f64) -> Self {
        Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            integrality: Integrality::Binary,
            objective_coeff: cost,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.integrality == Integrality::Binary
    }

    /// Name up to the first `[`, e.g. `u` for `u[psh1,3,gen]`.
    pub fn family(&self) -> &str {
        family_of(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    fn lp_symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl ConstraintRow {
    pub fn family(&self) -> &str {
        family_of(&self.name)
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

fn family_of(name: &str) -> &str {
    name.split('[').next().unwrap_or(name)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MilpError {
    #[error("variable `{name}`: value {value} outside bounds [{lower}, {upper}]")]
    ValueOutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("variable index {0} out of range")]
    NoSuchVariable(usize),
    #[error("row `{row}`: {detail}")]
    InvalidRow { row: String, detail: String },
    #[error("variable `{name}`: {detail}")]
    InvalidVariable { name: String, detail: String },
}

/// Minimization model: `min c'x + constant_offset` over rows and bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Milp {
    pub variables: Vec<Variable>,
    pub rows: Vec<ConstraintRow>,
    pub constant_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelStats {
    pub n_variables: usize,
    pub n_binaries: usize,
    pub n_constraints: usize,
    pub n_nonzeros: usize,
}

impl std::ops::Add for ModelStats {
    type Output = ModelStats;

    fn add(self, o: ModelStats) -> ModelStats {
        ModelStats {
            n_variables: self.n_variables + o.n_variables,
            n_binaries: self.n_binaries + o.n_binaries,
            n_constraints: self.n_constraints + o.n_constraints,
            n_nonzeros: self.n_nonzeros + o.n_nonzeros,
        }
    }
}

impl Milp {
    pub fn new() -> Self {
        Milp::default()
    }

    pub fn add_var(&mut self, var: Variable) -> usize {
        self.variables.push(var);
        self.variables.len() - 1
    }

    /// Append a row. Terms on the same variable are merged and exact zeros
    /// dropped, so stored rows always satisfy the no-duplicate/nonzero rule.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (j, a) in terms {
            match merged.iter_mut().find(|(k, _)| *k == j) {
                Some(entry) => entry.1 += a,
                None => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(ConstraintRow {
            name: name.into(),
            terms: merged,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.constant_offset
            + self
                .variables
                .iter()
                .zip(x)
                .map(|(v, xi)| v.objective_coeff * xi)
                .sum::<f64>()
    }

    pub fn binary_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_binary())
            .map(|(j, _)| j)
    }

    pub fn row_index(&self, name: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.name == name)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Check the structural invariants: bounds ordered, binaries in [0,1],
    /// row terms in range, unique and finite nonzero.
    pub fn validate(&self) -> Result<(), MilpError> {
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(MilpError::InvalidVariable {
                    name: v.name.clone(),
                    detail: format!("bounds [{}, {}]", v.lower, v.upper),
                });
            }
            if v.is_binary() && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(MilpError::InvalidVariable {
                    name: v.name.clone(),
                    detail: "binary bounds outside [0, 1]".into(),
                });
            }
            if !v.objective_coeff.is_finite() {
                return Err(MilpError::InvalidVariable {
                    name: v.name.clone(),
                    detail: "objective coefficient not finite".into(),
                });
            }
        }
        let n = self.variables.len();
        for row in &self.rows {
            let mut seen = std::collections::HashSet::new();
            for &(j, a) in &row.terms {
                if j >= n {
                    return Err(MilpError::InvalidRow {
                        row: row.name.clone(),
                        detail: format!("variable index {j} out of range"),
                    });
                }
                if !seen.insert(j) {
                    return Err(MilpError::InvalidRow {
                        row: row.name.clone(),
                        detail: format!("duplicate variable index {j}"),
                    });
                }
                if !a.is_finite() || a == 0.0 {
                    return Err(MilpError::InvalidRow {
                        row: row.name.clone(),
                        detail: format!("coefficient {a}"),
                    });
                }
            }
            if !row.rhs.is_finite() {
                return Err(MilpError::InvalidRow {
                    row: row.name.clone(),
                    detail: "rhs not finite".into(),
                });
            }
        }
        Ok(())
    }

    /// Largest row violation and bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &xi)| (v.lower - xi).max(xi - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Largest distance of a binary variable from {0, 1}.
    pub fn max_integrality_violation(&self, x: &[f64]) -> f64 {
        self.binary_indices()
            .map(|j| (x[j] - x[j].round()).abs())
            .fold(0.0, f64::max)
    }

    /// Disjoint union: `other`'s variables and rows are appended with shifted
    /// indices.
    pub fn append(&mut self, other: &Milp) {
        let shift = self.variables.len();
        self.variables.extend(other.variables.iter().cloned());
        for row in &other.rows {
            self.rows.push(ConstraintRow {
                terms: row.terms.iter().map(|&(j, a)| (j + shift, a)).collect(),
                ..row.clone()
            });
        }
        self.constant_offset += other.constant_offset;
    }

    /// Render in CPLEX LP text format.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::new();
        let name = |j: usize| format!("x{j}");
        let write_expr = |out: &mut String, terms: &mut dyn Iterator<Item = (usize, f64)>| {
            let mut first = true;
            for (j, a) in terms {
                let sign = if a < 0.0 {
                    "-"
                } else if first {
                    ""
                } else {
                    "+"
                };
                let _ = write!(out, " {sign} {:?} {}", a.abs(), name(j));
                first = false;
            }
            if first {
                out.push_str(" 0 x0");
            }
        };
        out.push_str("\\ variables are named x<index>; original names follow in comments\n");
        for (j, v) in self.variables.iter().enumerate() {
            let _ = writeln!(out, "\\ x{j} {}", v.name);
        }
        out.push_str("Minimize\n obj:");
        let mut obj = self
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.objective_coeff != 0.0)
            .map(|(j, v)| (j, v.objective_coeff));
        write_expr(&mut out, &mut obj);
        if self.constant_offset != 0.0 {
            let _ = write!(out, " + {:?} constant", self.constant_offset);
        }
        out.push_str("\nSubject To\n");
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " r{i}:");
            write_expr(&mut out, &mut row.terms.iter().copied());
            let _ = writeln!(out, " {} {:?}", row.sense.lp_symbol(), row.rhs);
        }
        out.push_str("Bounds\n");
        if self.constant_offset != 0.0 {
            out.push_str(" constant = 1\n");
        }
        for (j, v) in self.variables.iter().enumerate() {
            let lo = if v.lower == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                format!("{:?}", v.lower)
            };
            let hi = if v.upper == f64::INFINITY {
                "+inf".to_string()
            } else {
                format!("{:?}", v.upper)
            };
            let _ = writeln!(out, " {lo} <= {} <= {hi}", name(j));
        }
        let bins: Vec<String> = self.binary_indices().map(name).collect();
        if !bins.is_empty() {
            out.push_str("Binaries\n");
            for chunk in bins.chunks(10) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }
}

pub fn model_stats(model: &Milp) -> ModelStats {
    ModelStats {
        n_variables: model.variables.len(),
        n_binaries: model.variables.iter().filter(|v| v.is_binary()).count(),
        n_constraints: model.rows.len(),
        n_nonzeros: model.rows.iter().map(|r| r.terms.len()).sum(),
    }
}

/// Copy of `model` with variable `index` fixed at `value`.
pub fn fix_variable(model: &Milp, index: usize, value: f64) -> Result<Milp, MilpError> {
    let var = model
        .variables
        .get(index)
        .ok_or(MilpError::NoSuchVariable(index))?;
    let in_bounds = value >= var.lower && value <= var.upper;
    let integral = !var.is_binary() || value == 0.0 || value == 1.0;
    if !in_bounds || !integral {
        return Err(MilpError::ValueOutOfBounds {
            name: var.name.clone(),
            value,
            lower: var.lower,
            upper: var.upper,
        });
    }
    let mut fixed = model.clone();
    fixed.variables[index].lower = value;
    fixed.variables[index].upper = value;
    Ok(fixed)
}

/// Count variables, binaries, rows and row nonzeros in LP text produced by
/// [`Milp::to_lp_string`].
pub fn lp_text_stats(text: &str) -> ModelStats {
    #[derive(PartialEq)]
    enum Section {
        None,
        Objective,
        Rows,
        Bounds,
        Binaries,
    }
    let mut section = Section::None;
    let mut stats = ModelStats::default();
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with('\\') || line.is_empty() {
            continue;
        }
        match line {
            "Minimize" => section = Section::Objective,
            "Subject To" => section = Section::Rows,
            "Bounds" => section = Section::Bounds,
            "Binaries" => section = Section::Binaries,
            "End" => section = Section::None,
            _ => match section {
                Section::Rows => {
                    stats.n_constraints += 1;
                    // `0 x0` is the placeholder for an empty expression
                    let toks: Vec<&str> = line.split_whitespace().collect();
                    stats.n_nonzeros += toks
                        .iter()
                        .enumerate()
                        .filter(|&(k, tok)| {
                            tok.starts_with('x')
                                && tok[1..].chars().all(|c| c.is_ascii_digit())
                                && (k == 0 || toks[k - 1] != "0")
                        })
                        .count();
                }
                Section::Bounds => {
                    if line.split_whitespace().any(|tok| tok.starts_with('x')) {
                        stats.n_variables += 1;
                    }
                }
                Section::Binaries => stats.n_binaries += line.split_whitespace().count(),
                _ => {}
            },
        }
    }
    stats
}
