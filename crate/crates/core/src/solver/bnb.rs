//! Best-bound branch and bound over binary variables.
//!
//! All node relaxations share one simplex instance. Nodes differ only in
//! variable bounds, so the last optimal basis is dual feasible for every
//! node and each relaxation is re-optimized with the dual method.
//!
//! The root is tightened with rounds of Gomory cuts; cuts that stop binding
//! are dropped again so node relaxations stay small. Branching uses
//! pseudocosts, initialized by strong branching until each direction of a
//! variable has a few observations. After branching the search plunges into
//! the more promising child while its bound stays in the better half of the
//! current gap; otherwise the open node with the smallest bound is next.
//! Bounds are compared on a grid of 1e-9 relative to the root bound, and
//! among equal bounds the newest node goes first. A diving heuristic looks
//! for a first incumbent, and once one exists, binaries whose reduced cost
//! alone closes the gap are fixed in the subtree.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::milp::Milp;

use super::cuts::gomory_cuts;
use super::simplex::{Outcome, RowSpec, Simplex, VarState};
use super::{
    relative_gap, MipOptions, MipSolution, MipStatus, SolverError, FEASIBILITY_TOL, INTEGRALITY_TOL,
};

/// Nodes between heuristic dives while no incumbent is known.
const DIVE_EVERY: usize = 200;
/// Cuts added per root round.
const CUTS_PER_ROUND: usize = 50;
/// Observations per direction after which a pseudocost is trusted.
const RELIABLE: u32 = 8;
/// Strong-branching evaluations per node.
const STRONG_CANDIDATES: usize = 100;
/// Strong-branching evaluations without a better candidate before giving up.
const STRONG_LOOKAHEAD: usize = 8;
/// Dual simplex iterations per strong-branching child.
const STRONG_ITERATIONS: usize = 10_000;
/// Plunge while the child bound lies within this fraction of the gap.
const PLUNGE_FRACTION: f64 = 0.5;

/// Progress notifications from [`solve_mip_observed`].
#[derive(Debug)]
pub enum BnbEvent<'a> {
    Incumbent {
        objective: f64,
        values: &'a [f64],
    },
    /// Emitted after every processed node.
    Progress {
        best_bound: f64,
        incumbent: f64,
        nodes: usize,
    },
}

/// The branching decision that created a node.
#[derive(Clone, Copy)]
struct Origin {
    var: usize,
    up: bool,
    /// Fractional part of the variable in the parent relaxation.
    frac: f64,
    parent_obj: f64,
}

struct Node {
    id: usize,
    /// Lower bound on the subtree, rounded down to the comparison grid.
    key: f64,
    fixings: Vec<(usize, f64)>,
    origin: Option<Origin>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest key must compare greatest, and
    // among equal keys the largest id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| self.id.cmp(&other.id))
    }
}

#[derive(Default)]
struct Tree {
    open: BinaryHeap<Node>,
    plunge: Option<Node>,
    next_id: usize,
}

impl Tree {
    fn is_empty(&self) -> bool {
        self.open.is_empty() && self.plunge.is_none()
    }

    fn floor(&self, quantum: f64) -> f64 {
        let heap = self.open.peek().map_or(f64::INFINITY, |n| n.key * quantum);
        let plunge = self
            .plunge
            .as_ref()
            .map_or(f64::INFINITY, |n| n.key * quantum);
        heap.min(plunge)
    }

    fn next(&mut self) -> Option<Node> {
        self.plunge.take().or_else(|| self.open.pop())
    }

    fn node(&mut self, key: f64, fixings: Vec<(usize, f64)>, origin: Option<Origin>) -> Node {
        self.next_id += 1;
        Node {
            id: self.next_id,
            key,
            fixings,
            origin,
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Pseudocost {
    down: f64,
    n_down: u32,
    up: f64,
    n_up: u32,
}

impl Pseudocost {
    fn record(&mut self, up: bool, per_unit: f64) {
        if up {
            self.up += per_unit;
            self.n_up += 1;
        } else {
            self.down += per_unit;
            self.n_down += 1;
        }
    }

    fn reliable(&self) -> bool {
        self.n_down >= RELIABLE && self.n_up >= RELIABLE
    }
}

fn score(down_gain: f64, up_gain: f64) -> f64 {
    down_gain.max(1e-6) * up_gain.max(1e-6)
}

enum Branching {
    On {
        var: usize,
        frac: f64,
        down: f64,
        up: f64,
    },
    /// Strong branching proved one side useless; the variable was fixed in
    /// the relaxation and the node must be re-solved.
    Fixed(usize, f64),
    /// Both sides are infeasible or cannot beat the incumbent.
    Prune,
}

pub fn solve_mip(model: &Milp, options: &MipOptions) -> Result<MipSolution, SolverError> {
    solve_mip_observed(model, options, |_| {})
}

struct Search<'m> {
    model: &'m Milp,
    binaries: Vec<usize>,
    lp: Simplex,
    /// Cuts currently in the relaxation, kept to rebuild it.
    cuts: Vec<RowSpec>,
    pseudo: Vec<Pseudocost>,
    incumbent: Vec<f64>,
    incumbent_obj: f64,
}

impl Search<'_> {
    fn apply(&mut self, fixings: &[(usize, f64)]) {
        for &j in &self.binaries {
            let v = &self.model.variables[j];
            self.lp.set_bounds(j, v.lower, v.upper);
        }
        for &(j, val) in fixings {
            self.lp.set_bounds(j, val, val);
        }
    }

    /// Fresh relaxation with the current cuts, after a numerical failure.
    fn rebuild(&mut self, fixings: &[(usize, f64)]) {
        self.lp = Simplex::new(self.model);
        self.lp.add_rows(&self.cuts);
        self.apply(fixings);
    }

    /// Solve the relaxation of a node, rebuilding once on numerical trouble.
    fn solve_node(
        &mut self,
        fixings: &[(usize, f64)],
        first: bool,
    ) -> Result<Outcome, SolverError> {
        self.apply(fixings);
        let r = if first {
            self.lp.primal()
        } else {
            self.lp.dual()
        };
        match r {
            Err(SolverError::NumericalBreakdown(_)) => {
                self.rebuild(fixings);
                self.lp.primal()
            }
            other => other,
        }
    }

    fn objective(&self) -> f64 {
        self.model
            .objective_value(&self.lp.values()[..self.model.n_vars()])
    }

    fn fractional(&self) -> Vec<(usize, f64)> {
        let x = self.lp.values();
        self.binaries
            .iter()
            .filter_map(|&j| {
                let f = x[j] - x[j].floor();
                ((x[j] - x[j].round()).abs() > INTEGRALITY_TOL).then_some((j, f))
            })
            .collect()
    }

    fn most_fractional(&self) -> Option<usize> {
        let x = self.lp.values();
        let mut branch: Option<(usize, f64)> = None;
        for &j in &self.binaries {
            let frac = (x[j] - x[j].round()).abs();
            if frac > INTEGRALITY_TOL && branch.is_none_or(|(_, f)| frac > f + 1e-12) {
                branch = Some((j, frac));
            }
        }
        branch.map(|(j, _)| j)
    }

    /// Average per-unit gains over all observed variables, 1 when none.
    fn average_pseudocost(&self) -> (f64, f64) {
        let (mut d, mut nd, mut u, mut nu) = (0.0, 0u32, 0.0, 0u32);
        for p in &self.pseudo {
            d += p.down;
            nd += p.n_down;
            u += p.up;
            nu += p.n_up;
        }
        let avg = |s: f64, n: u32| if n == 0 { 1.0 } else { s / f64::from(n) };
        (avg(d, nd), avg(u, nu))
    }

    fn estimate(&self, j: usize, frac: f64, avg: (f64, f64)) -> (f64, f64) {
        let p = &self.pseudo[j];
        let down = if p.n_down == 0 {
            avg.0
        } else {
            p.down / f64::from(p.n_down)
        };
        let up = if p.n_up == 0 {
            avg.1
        } else {
            p.up / f64::from(p.n_up)
        };
        (frac * down, (1.0 - frac) * up)
    }

    /// Objective bound of the relaxation with `j` fixed at `val`, `None`
    /// when infeasible. A stopped dual run still gives a valid bound.
    fn probe(&mut self, j: usize, val: f64, obj: f64) -> Option<f64> {
        self.lp.set_bounds(j, val, val);
        match self.lp.dual_limited(STRONG_ITERATIONS) {
            Ok(Some(Outcome::Optimal)) | Ok(None)
                if self.lp.values()[..self.model.n_vars()]
                    .iter()
                    .all(|v| v.is_finite()) =>
            {
                Some(self.objective().max(obj))
            }
            Ok(Some(Outcome::Infeasible)) => None,
            _ => Some(obj),
        }
    }

    /// Reliability branching: pseudocost scores, with strong branching on
    /// candidates whose pseudocosts are not yet trusted.
    fn select_branch(&mut self, obj: f64) -> Branching {
        let mut cands = self.fractional();
        let avg = self.average_pseudocost();
        let scored = |s: &Self, &(j, f): &(usize, f64)| {
            let (d, u) = s.estimate(j, f, avg);
            score(d, u)
        };
        cands.sort_by(|a, b| {
            scored(self, b)
                .total_cmp(&scored(self, a))
                .then(a.0.cmp(&b.0))
        });
        let mut best: Option<(f64, usize, f64, f64, f64)> = None;
        let snapshot = self.lp.clone();
        let (mut strong, mut since_better) = (0, 0);
        for &(j, f) in &cands {
            let unreliable = !self.pseudo[j].reliable();
            let (down, up, s) =
                if unreliable && strong < STRONG_CANDIDATES && since_better < STRONG_LOOKAHEAD {
                    strong += 1;
                    let down = self.probe(j, 0.0, obj);
                    self.lp.clone_from(&snapshot);
                    let up = self.probe(j, 1.0, obj);
                    self.lp.clone_from(&snapshot);
                    if let Some(d) = down {
                        self.pseudo[j].record(false, (d - obj) / f);
                    }
                    if let Some(u) = up {
                        self.pseudo[j].record(true, (u - obj) / (1.0 - f));
                    }
                    let cut_off = |b: Option<f64>| b.is_none_or(|b| b >= self.incumbent_obj);
                    match (cut_off(down), cut_off(up)) {
                        (true, true) => return Branching::Prune,
                        (true, false) => {
                            self.lp.set_bounds(j, 1.0, 1.0);
                            return Branching::Fixed(j, 1.0);
                        }
                        (false, true) => {
                            self.lp.set_bounds(j, 0.0, 0.0);
                            return Branching::Fixed(j, 0.0);
                        }
                        (false, false) => {}
                    }
                    let (d, u) = (down.unwrap_or(obj), up.unwrap_or(obj));
                    (d, u, score(d - obj, u - obj))
                } else {
                    let (gd, gu) = self.estimate(j, f, avg);
                    (obj, obj, score(gd, gu))
                };
            if best.is_none_or(|b| s > b.0) {
                best = Some((s, j, f, down, up));
                since_better = 0;
            } else if unreliable {
                since_better += 1;
            }
        }
        let (_, var, frac, down, up) = best.expect("called with a fractional relaxation");
        Branching::On {
            var,
            frac,
            down,
            up,
        }
    }

    /// Fix the binaries at their rounded values, re-solve the continuous
    /// part and keep the point if it improves the incumbent.
    fn polish(&mut self, observe: &mut impl FnMut(&BnbEvent<'_>)) -> Result<(), SolverError> {
        let n = self.model.n_vars();
        let snapped: Vec<(usize, f64)> = self
            .binaries
            .iter()
            .map(|&j| (j, self.lp.values()[j].round()))
            .collect();
        for &(j, val) in &snapped {
            self.lp.set_bounds(j, val, val);
        }
        if self.lp.dual()? != Outcome::Optimal {
            return Ok(());
        }
        let mut cand = self.lp.values()[..n].to_vec();
        for &(j, val) in &snapped {
            cand[j] = val;
        }
        for (c, v) in cand.iter_mut().zip(&self.model.variables) {
            *c = c.clamp(v.lower, v.upper);
        }
        let cand_obj = self.model.objective_value(&cand);
        if cand_obj < self.incumbent_obj && self.model.max_violation(&cand) <= FEASIBILITY_TOL {
            self.incumbent_obj = cand_obj;
            self.incumbent = cand;
            observe(&BnbEvent::Incumbent {
                objective: self.incumbent_obj,
                values: &self.incumbent,
            });
        }
        Ok(())
    }

    /// Fractional diving from the current optimal relaxation: repeatedly fix
    /// the least fractional binary at its nearest value, trying the other
    /// value once if that is infeasible.
    fn dive(&mut self, observe: &mut impl FnMut(&BnbEvent<'_>)) -> Result<(), SolverError> {
        for _ in 0..=self.binaries.len() {
            let x = self.lp.values();
            let mut pick: Option<(usize, f64)> = None;
            for &j in &self.binaries {
                let frac = (x[j] - x[j].round()).abs();
                if frac > INTEGRALITY_TOL && pick.is_none_or(|(_, f)| frac < f - 1e-12) {
                    pick = Some((j, frac));
                }
            }
            let Some((j, _)) = pick else {
                return self.polish(observe);
            };
            let near = self.lp.values()[j].round();
            let mut solved = false;
            for val in [near, 1.0 - near] {
                self.lp.set_bounds(j, val, val);
                if self.lp.dual()? == Outcome::Optimal {
                    solved = true;
                    break;
                }
            }
            if !solved || self.objective() >= self.incumbent_obj {
                return Ok(());
            }
        }
        Ok(())
    }

    /// Rounds of Gomory cuts at the root, dropping cuts that no longer bind
    /// after each round. Returns false if the cuts prove the relaxation
    /// infeasible.
    fn cut_rounds(&mut self, rounds: usize) -> Result<bool, SolverError> {
        let mut is_binary = vec![false; self.model.n_vars()];
        for &j in &self.binaries {
            is_binary[j] = true;
        }
        let base_rows = self.lp.n_rows();
        let max_rows = base_rows + self.model.n_rows().max(100);
        let mut stalls = 0;
        for _ in 0..rounds {
            if self.most_fractional().is_none() || self.lp.n_rows() >= max_rows {
                break;
            }
            let before = self.objective();
            let room = max_rows - self.lp.n_rows();
            let cuts = gomory_cuts(&self.lp, self.model, &is_binary, CUTS_PER_ROUND.min(room));
            if cuts.is_empty() {
                break;
            }
            let rows: Vec<_> = cuts
                .into_iter()
                .map(|c| (c.terms, c.rhs, f64::INFINITY))
                .collect();
            self.lp.add_rows(&rows);
            self.cuts.extend(rows);
            match self.lp.dual()? {
                Outcome::Optimal => {}
                Outcome::Infeasible => return Ok(false),
                Outcome::Unbounded => return Err(SolverError::Unbounded),
            }
            let n = self.lp.n_structural();
            let mut q = 0;
            let lp = &self.lp;
            self.cuts.retain(|_| {
                let keep = lp.state_of(n + base_rows + q) != VarState::Basic;
                q += 1;
                keep
            });
            self.lp.drop_slack_rows(base_rows);
            let after = self.objective();
            if after - before <= 1e-6 * before.abs().max(1.0) {
                stalls += 1;
                if stalls >= 3 {
                    break;
                }
            } else {
                stalls = 0;
            }
        }
        Ok(true)
    }

    /// Binaries at a bound whose reduced cost pushes the relaxation past the
    /// incumbent if moved to the other bound.
    fn reduced_cost_fixings(&self, node_obj: f64) -> Vec<(usize, f64)> {
        let (_, d) = self.lp.duals_and_reduced_costs();
        let slack = self.incumbent_obj - node_obj;
        self.binaries
            .iter()
            .filter_map(|&j| {
                let v = &self.model.variables[j];
                if v.lower == v.upper || self.lp.lower[j] == self.lp.upper[j] {
                    return None;
                }
                match self.lp.nonbasic_side(j) {
                    Some(false) if d[j] > slack => Some((j, 0.0)),
                    Some(true) if -d[j] > slack => Some((j, 1.0)),
                    _ => None,
                }
            })
            .collect()
    }
}

fn progress<'a>(
    tree: &Tree,
    quantum: f64,
    pruned_floor: f64,
    search: &Search<'_>,
    nodes: usize,
) -> BnbEvent<'a> {
    BnbEvent::Progress {
        best_bound: tree
            .floor(quantum)
            .min(pruned_floor)
            .min(search.incumbent_obj),
        incumbent: search.incumbent_obj,
        nodes,
    }
}

pub fn solve_mip_observed(
    model: &Milp,
    options: &MipOptions,
    mut observe: impl FnMut(&BnbEvent<'_>),
) -> Result<MipSolution, SolverError> {
    if options.rel_gap.is_nan() || options.rel_gap < 0.0 {
        return Err(SolverError::InvalidOption(format!(
            "rel_gap = {}",
            options.rel_gap
        )));
    }
    model.validate()?;
    let mut search = Search {
        model,
        binaries: model.binary_indices().collect(),
        lp: Simplex::new(model),
        cuts: Vec::new(),
        pseudo: vec![Pseudocost::default(); model.n_vars()],
        incumbent: Vec::new(),
        incumbent_obj: f64::INFINITY,
    };

    // smallest bound among integral nodes dropped while below the incumbent
    let mut pruned_floor = f64::INFINITY;
    let mut quantum = f64::NAN;
    let mut nodes = 0usize;
    let mut tree = Tree {
        plunge: Some(Node {
            id: 0,
            key: f64::NEG_INFINITY,
            fixings: Vec::new(),
            origin: None,
        }),
        ..Tree::default()
    };

    let finish = |status, incumbent: Vec<f64>, objective: f64, best_bound: f64, nodes| {
        let best_bound = if objective.is_finite() {
            best_bound.min(objective)
        } else {
            best_bound
        };
        MipSolution {
            status,
            gap: relative_gap(objective, best_bound),
            incumbent,
            objective,
            best_bound,
            nodes_explored: nodes,
        }
    };

    loop {
        let best_bound = tree.floor(quantum).min(pruned_floor);
        let incumbent_obj = search.incumbent_obj;
        if tree.is_empty() {
            let incumbent = std::mem::take(&mut search.incumbent);
            return Ok(if incumbent.is_empty() {
                finish(
                    MipStatus::Infeasible,
                    incumbent,
                    f64::INFINITY,
                    f64::INFINITY,
                    nodes,
                )
            } else {
                finish(
                    MipStatus::Optimal,
                    incumbent,
                    incumbent_obj,
                    best_bound,
                    nodes,
                )
            });
        }
        if incumbent_obj.is_finite()
            && relative_gap(incumbent_obj, best_bound.min(incumbent_obj)) <= options.rel_gap
        {
            let incumbent = std::mem::take(&mut search.incumbent);
            return Ok(finish(
                MipStatus::GapReached,
                incumbent,
                incumbent_obj,
                best_bound,
                nodes,
            ));
        }
        if nodes >= options.node_limit {
            let incumbent = std::mem::take(&mut search.incumbent);
            return Ok(finish(
                MipStatus::NodeLimit,
                incumbent,
                incumbent_obj,
                best_bound,
                nodes,
            ));
        }

        let node = tree.next().expect("checked non-empty");
        if node.key * quantum >= incumbent_obj {
            continue;
        }
        nodes += 1;
        let mut fixings = node.fixings;
        match search.solve_node(&fixings, nodes == 1)? {
            Outcome::Infeasible => {
                observe(&progress(&tree, quantum, pruned_floor, &search, nodes));
                continue;
            }
            Outcome::Unbounded => return Err(SolverError::Unbounded),
            Outcome::Optimal => {}
        }
        if nodes == 1 && options.cut_rounds > 0 && !search.cut_rounds(options.cut_rounds)? {
            observe(&progress(&tree, quantum, pruned_floor, &search, nodes));
            continue;
        }
        let mut obj = search.objective();
        if nodes == 1 {
            quantum = 1e-9 * obj.abs().max(1.0);
        }
        if let Some(o) = node.origin {
            let gain = (obj - o.parent_obj).max(0.0);
            search.pseudo[o.var].record(o.up, gain / if o.up { 1.0 - o.frac } else { o.frac });
        }

        loop {
            if obj >= search.incumbent_obj {
                break;
            }
            if search.most_fractional().is_none() {
                if search.polish(&mut observe).is_err() {
                    search.rebuild(&fixings);
                }
                if obj < search.incumbent_obj {
                    pruned_floor = pruned_floor.min(obj);
                }
                break;
            }
            if search.incumbent_obj.is_finite() {
                for (j, val) in search.reduced_cost_fixings(obj) {
                    // already at this bound, so the relaxation is unchanged
                    search.lp.set_bounds(j, val, val);
                    fixings.push((j, val));
                }
            }
            match search.select_branch(obj) {
                Branching::Prune => break,
                Branching::Fixed(j, val) => {
                    fixings.push((j, val));
                    match search.lp.dual() {
                        Ok(Outcome::Optimal) => obj = search.objective().max(obj),
                        Ok(_) => break,
                        Err(SolverError::NumericalBreakdown(_)) => {
                            search.rebuild(&fixings);
                            if search.lp.primal()? != Outcome::Optimal {
                                break;
                            }
                            obj = search.objective().max(obj);
                        }
                        Err(e) => return Err(e),
                    }
                }
                Branching::On {
                    var,
                    frac,
                    down,
                    up,
                } => {
                    if !search.incumbent_obj.is_finite() && (nodes - 1).is_multiple_of(DIVE_EVERY) {
                        // a failed dive only costs the heuristic
                        if search.dive(&mut observe).is_err() {
                            search.rebuild(&fixings);
                        }
                    }
                    let grid = |b: f64| (b / quantum).floor().max(node.key);
                    let mut children = Vec::with_capacity(2);
                    for (val, bound) in [(0.0, down), (1.0, up)] {
                        if bound >= search.incumbent_obj {
                            continue;
                        }
                        let mut child = fixings.clone();
                        child.push((var, val));
                        let origin = Origin {
                            var,
                            up: val == 1.0,
                            frac,
                            parent_obj: obj,
                        };
                        children.push((bound, tree.node(grid(bound), child, Some(origin))));
                    }
                    // the down child wins ties
                    children.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let mut children = children.into_iter();
                    if let Some((bound, first)) = children.next() {
                        let floor = tree.floor(quantum).min(pruned_floor);
                        let gap = search.incumbent_obj - floor;
                        if !gap.is_finite() || bound <= floor + PLUNGE_FRACTION * gap {
                            tree.plunge = Some(first);
                        } else {
                            tree.open.push(first);
                        }
                    }
                    tree.open.extend(children.map(|c| c.1));
                    break;
                }
            }
        }
        observe(&progress(&tree, quantum, pruned_floor, &search, nodes));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Sense, Variable};

    #[test]
    fn single_binary() {
        let mut m = Milp::new();
        m.add_var(Variable::binary("x", -1.0));
        let s = solve_mip(&m, &MipOptions::default()).unwrap();
        assert_eq!(s.incumbent, vec![1.0]);
        assert_eq!(s.objective, -1.0);
        assert_eq!(s.gap, 0.0);
        assert_eq!(s.nodes_explored, 1);
    }

    #[test]
    fn knapsack() {
        // max 5a + 4b + 3c st 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        // binaries -> a=1, b=0, c=1 (8) vs a=1,b=1 (9: 2+3=5, 4+1=5, 3+4=7 ok) -> 9
        let mut m = Milp::new();
        let a = m.add_var(Variable::binary("a", -5.0));
        let b = m.add_var(Variable::binary("b", -4.0));
        let c = m.add_var(Variable::binary("c", -3.0));
        m.add_row("r1", [(a, 2.0), (b, 3.0), (c, 1.0)], Sense::Le, 5.0);
        m.add_row("r2", [(a, 4.0), (b, 1.0), (c, 2.0)], Sense::Le, 11.0);
        m.add_row("r3", [(a, 3.0), (b, 4.0), (c, 2.0)], Sense::Le, 8.0);
        let s = solve_mip(&m, &MipOptions::default()).unwrap();
        assert_eq!(s.status, MipStatus::Optimal);
        assert_eq!(s.objective, -9.0);
        assert_eq!(s.incumbent, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn infeasible_integer_program() {
        let mut m = Milp::new();
        let a = m.add_var(Variable::binary("a", 0.0));
        let b = m.add_var(Variable::binary("b", 0.0));
        m.add_row("odd", [(a, 2.0), (b, 2.0)], Sense::Eq, 1.0);
        let s = solve_mip(&m, &MipOptions::default()).unwrap();
        assert_eq!(s.status, MipStatus::Infeasible);
        assert!(!s.has_incumbent());
    }

    #[test]
    fn rejects_negative_gap() {
        assert!(matches!(
            solve_mip(&Milp::new(), &MipOptions::with_gap(-1.0)),
            Err(SolverError::InvalidOption(_))
        ));
    }
}
