//! Gomory mixed-integer cuts from the optimal root tableau.
//!
//! Each tableau row with a fractional basic binary gives one cut. Nonbasic
//! variables are measured as distance from their active bound; binaries
//! count as integer, everything else (including row logicals) as
//! continuous. Cuts are mapped back to structural space and only kept if
//! they are numerically tame and cut off the current point.

use crate::milp::Milp;

use super::simplex::{Simplex, VarState};

/// Basic binaries closer than this to an integer are not used as sources.
const MIN_FRACTION: f64 = 0.005;
/// Largest accepted ratio between cut coefficients.
const MAX_DYNAMISM: f64 = 1e7;
/// Minimum violation per unit coefficient norm.
const MIN_EFFICACY: f64 = 1e-5;

/// `Σ terms >= rhs` over structural variables.
#[derive(Debug, Clone)]
pub(crate) struct Cut {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
    pub efficacy: f64,
}

pub(crate) fn gomory_cuts(
    lp: &Simplex,
    model: &Milp,
    is_binary: &[bool],
    limit: usize,
) -> Vec<Cut> {
    let n = lp.n_structural();
    let x = lp.values();
    let mut cuts = Vec::new();
    for r in 0..lp.n_rows() {
        let (basic, row) = lp.tableau_row(r);
        if basic >= n || !is_binary[basic] {
            continue;
        }
        let beta = x[basic];
        let f0 = beta - beta.floor();
        if !(MIN_FRACTION..=1.0 - MIN_FRACTION).contains(&f0) {
            continue;
        }
        if let Some(cut) = cut_from_row(lp, model, is_binary, &row, f0) {
            cuts.push(cut);
        }
    }
    cuts.sort_by(|a, b| b.efficacy.total_cmp(&a.efficacy));
    let mut kept: Vec<Cut> = Vec::new();
    for cut in cuts {
        if kept.len() >= limit {
            break;
        }
        if kept.iter().all(|k| !nearly_parallel(k, &cut)) {
            kept.push(cut);
        }
    }
    kept
}

fn cut_from_row(
    lp: &Simplex,
    model: &Milp,
    is_binary: &[bool],
    row: &[(usize, f64)],
    f0: f64,
) -> Option<Cut> {
    let n = lp.n_structural();
    let mut coef = vec![0.0; n];
    let mut rhs = 1.0;
    for &(j, alpha) in row {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo == hi {
            continue;
        }
        let (abar, at_upper) = match lp.state_of(j) {
            VarState::AtLower => (alpha, false),
            VarState::AtUpper => (-alpha, true),
            VarState::Free | VarState::Basic => return None,
        };
        let gamma = if j < n && is_binary[j] {
            let fj = abar - abar.floor();
            if fj <= f0 {
                fj / f0
            } else {
                (1.0 - fj) / (1.0 - f0)
            }
        } else if abar >= 0.0 {
            abar / f0
        } else {
            -abar / (1.0 - f0)
        };
        if gamma == 0.0 {
            continue;
        }
        // s_j = x_j - lo  or  hi - x_j, where a logical's x is its row activity
        let (sign, bound) = if at_upper { (-1.0, hi) } else { (1.0, lo) };
        rhs += gamma * sign * bound;
        if j < n {
            coef[j] += gamma * sign;
        } else {
            for &(k, a) in lp.row_terms(j - n) {
                coef[k] += gamma * sign * a;
            }
        }
    }
    finish(model, lp.values(), coef, rhs)
}

/// Drop negligible coefficients (relaxing with variable bounds), check
/// numerics and violation.
fn finish(model: &Milp, x: &[f64], coef: Vec<f64>, mut rhs: f64) -> Option<Cut> {
    let big = coef.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if big == 0.0 || !big.is_finite() {
        return None;
    }
    let mut terms = Vec::new();
    for (j, c) in coef.into_iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        if c.abs() < big / MAX_DYNAMISM {
            // c x_j <= max over the box; moving it right keeps the cut valid
            let v = &model.variables[j];
            let worst = if c > 0.0 { c * v.upper } else { c * v.lower };
            if !worst.is_finite() {
                return None;
            }
            rhs -= worst;
            continue;
        }
        terms.push((j, c / big));
    }
    rhs /= big;
    if terms.is_empty() || !rhs.is_finite() {
        return None;
    }
    let activity: f64 = terms.iter().map(|&(j, c)| c * x[j]).sum();
    let norm = terms.iter().map(|&(_, c)| c * c).sum::<f64>().sqrt();
    let efficacy = (rhs - activity) / norm;
    (efficacy > MIN_EFFICACY).then_some(Cut {
        terms,
        rhs,
        efficacy,
    })
}

fn nearly_parallel(a: &Cut, b: &Cut) -> bool {
    let norm = |c: &Cut| c.terms.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
    let mut dot = 0.0;
    let (mut i, mut k) = (0, 0);
    while i < a.terms.len() && k < b.terms.len() {
        match a.terms[i].0.cmp(&b.terms[k].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => k += 1,
            std::cmp::Ordering::Equal => {
                dot += a.terms[i].1 * b.terms[k].1;
                i += 1;
                k += 1;
            }
        }
    }
    dot / (norm(a) * norm(b)) > 0.999
}
