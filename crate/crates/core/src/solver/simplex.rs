//! Bounded revised simplex over the form `A x - r = 0`, `l <= (x, r) <= u`.
//!
//! Every row gets a logical variable `r_i` carrying the row bounds, so the
//! slack basis is `-I` and bound changes never touch the matrix. The basis
//! inverse is kept dense (column-major) and refreshed with a kernel
//! factorization that only inverts the block of basic structural columns.
//!
//! The primal method uses a composite phase 1 (minimize the sum of bound
//! infeasibilities) and switches to Bland's rule after a run of degenerate
//! pivots. The dual method is used to re-optimize after bound changes, which
//! keeps a previously optimal basis dual feasible.

use crate::milp::{Milp, Sense};

use super::SolverError;

pub(crate) const PIVOT_TOL: f64 = 1e-9;
pub(crate) const PRIMAL_TOL: f64 = 1e-9;
pub(crate) const DUAL_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const DEGENERATE_RUN_FOR_BLAND: usize = 50;

/// Terms, lower and upper bound of a row appended after construction.
pub(crate) type RowSpec = (Vec<(usize, f64)>, f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone)]
pub(crate) struct Simplex {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rows: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    /// Position of each variable in `basis`, `usize::MAX` when nonbasic.
    position: Vec<usize>,
    binv: Vec<f64>,
    since_refactor: usize,
    pub(crate) iterations: usize,
    /// Row multipliers from the last phase-1 stall (infeasibility proof) or the
    /// unbounded direction over structurals.
    pub(crate) certificate: Option<Vec<f64>>,
}

impl Simplex {
    pub(crate) fn new(model: &Milp) -> Self {
        let n = model.n_vars();
        let m = model.n_rows();
        let mut cols = vec![Vec::new(); n];
        let mut rows = Vec::with_capacity(m);
        for (i, row) in model.rows.iter().enumerate() {
            for &(j, a) in &row.terms {
                cols[j].push((i, a));
            }
            rows.push(row.terms.clone());
        }
        let mut cost = vec![0.0; n + m];
        let mut lower = vec![0.0; n + m];
        let mut upper = vec![0.0; n + m];
        for (j, v) in model.variables.iter().enumerate() {
            cost[j] = v.objective_coeff;
            lower[j] = v.lower;
            upper[j] = v.upper;
        }
        for (i, row) in model.rows.iter().enumerate() {
            let (lo, hi) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            lower[n + i] = lo;
            upper[n + i] = hi;
        }
        let mut s = Simplex {
            n,
            m,
            cols,
            rows,
            cost,
            lower,
            upper,
            x: vec![0.0; n + m],
            state: vec![VarState::AtLower; n + m],
            basis: (n..n + m).collect(),
            position: vec![usize::MAX; n + m],
            binv: vec![0.0; m * m],
            since_refactor: 0,
            iterations: 0,
            certificate: None,
        };
        for i in 0..m {
            s.state[n + i] = VarState::Basic;
            s.position[n + i] = i;
            s.binv[i * m + i] = -1.0;
        }
        for j in 0..n {
            s.place_nonbasic(j, None);
        }
        s.compute_basic_values();
        s
    }

    pub(crate) fn n_structural(&self) -> usize {
        self.n
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.x
    }

    /// Put nonbasic `j` on a bound. With a reduced cost, pick the bound that
    /// keeps it dual feasible when possible.
    fn place_nonbasic(&mut self, j: usize, reduced_cost: Option<f64>) {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        let prefer_upper = match reduced_cost {
            Some(d) if d < -DUAL_TOL => true,
            Some(d) if d > DUAL_TOL => false,
            _ => self.state[j] == VarState::AtUpper,
        };
        let (state, value) = if lo == hi {
            (VarState::AtLower, lo)
        } else if prefer_upper && hi.is_finite() {
            (VarState::AtUpper, hi)
        } else if lo.is_finite() {
            (VarState::AtLower, lo)
        } else if hi.is_finite() {
            (VarState::AtUpper, hi)
        } else {
            (VarState::Free, 0.0)
        };
        self.state[j] = state;
        self.x[j] = value;
    }

    fn column(&self, j: usize) -> ColumnIter<'_> {
        if j < self.n {
            ColumnIter::Structural(self.cols[j].iter())
        } else {
            ColumnIter::Logical(Some(j - self.n))
        }
    }

    /// `B^-1 a_j`
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for (i, a) in self.column(j) {
            let col = &self.binv[i * m..(i + 1) * m];
            for (o, &b) in out.iter_mut().zip(col) {
                *o += a * b;
            }
        }
        out
    }

    /// Row `r` of `B^-1`.
    fn btran_unit(&self, r: usize) -> Vec<f64> {
        let m = self.m;
        (0..m).map(|k| self.binv[k * m + r]).collect()
    }

    /// `y = c_B' B^-1`
    fn duals_for(&self, basic_cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|k| {
                let col = &self.binv[k * m..(k + 1) * m];
                col.iter().zip(basic_cost).map(|(b, c)| b * c).sum()
            })
            .collect()
    }

    fn reduced_cost(&self, j: usize, cost: f64, y: &[f64]) -> f64 {
        cost - self.column(j).map(|(i, a)| a * y[i]).sum::<f64>()
    }

    fn row_dot(&self, j: usize, rho: &[f64]) -> f64 {
        self.column(j).map(|(i, a)| a * rho[i]).sum()
    }

    fn compute_basic_values(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.n + self.m {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                for (i, a) in self.column(j) {
                    rhs[i] -= a * xj;
                }
            }
        }
        let mut xb = vec![0.0; m];
        for (k, &w) in rhs.iter().enumerate() {
            if w != 0.0 {
                let col = &self.binv[k * m..(k + 1) * m];
                for (o, &b) in xb.iter_mut().zip(col) {
                    *o += b * w;
                }
            }
        }
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    fn pivot_inverse(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let ar = alpha[r];
        for k in 0..m {
            let col = &mut self.binv[k * m..(k + 1) * m];
            let piv = col[r] / ar;
            if piv != 0.0 {
                for (i, c) in col.iter_mut().enumerate() {
                    *c -= alpha[i] * piv;
                }
            }
            col[r] = piv;
        }
    }

    /// Swap `entering` into basis position `r`; the leaving variable goes to
    /// `leave_state` at `leave_value`.
    fn exchange(
        &mut self,
        r: usize,
        entering: usize,
        alpha: &[f64],
        leave_state: VarState,
        leave_value: f64,
    ) -> Result<(), SolverError> {
        let leaving = self.basis[r];
        self.pivot_inverse(r, alpha);
        self.basis[r] = entering;
        self.position[entering] = r;
        self.state[entering] = VarState::Basic;
        self.position[leaving] = usize::MAX;
        self.state[leaving] = leave_state;
        self.x[leaving] = leave_value;
        self.since_refactor += 1;
        self.iterations += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Rebuild `B^-1` from scratch and recompute basic values.
    pub(crate) fn refactor(&mut self) -> Result<(), SolverError> {
        match self.try_invert() {
            Ok(()) => {}
            Err(dependent) => {
                self.repair(&dependent);
                self.try_invert().map_err(|_| {
                    SolverError::NumericalBreakdown("basis stays singular after repair".into())
                })?;
            }
        }
        self.since_refactor = 0;
        self.compute_basic_values();
        Ok(())
    }

    /// Invert the basis through the kernel of basic structural columns. On a
    /// singular kernel, returns the basis positions of dependent structurals.
    fn try_invert(&mut self) -> Result<(), Vec<usize>> {
        let (n, m) = (self.n, self.m);
        // rows whose logical is nonbasic form the kernel rows
        let kernel_rows: Vec<usize> = (0..m)
            .filter(|&i| self.state[n + i] != VarState::Basic)
            .collect();
        let kernel_cols: Vec<usize> = (0..m).filter(|&p| self.basis[p] < n).collect();
        let k = kernel_cols.len();
        debug_assert_eq!(k, kernel_rows.len());
        let mut row_slot = vec![usize::MAX; m];
        for (a, &i) in kernel_rows.iter().enumerate() {
            row_slot[i] = a;
        }
        // K[a][b] = A[kernel_rows[a], basis[kernel_cols[b]]], stored row-major
        let mut kmat = vec![0.0; k * k];
        for (b, &p) in kernel_cols.iter().enumerate() {
            for &(i, a) in &self.cols[self.basis[p]] {
                if row_slot[i] != usize::MAX {
                    kmat[row_slot[i] * k + b] = a;
                }
            }
        }
        let kinv = invert_dense(&mut kmat, k).map_err(|bad_cols| {
            bad_cols
                .into_iter()
                .map(|b| kernel_cols[b])
                .collect::<Vec<_>>()
        })?;

        self.binv.iter_mut().for_each(|v| *v = 0.0);
        let mut col_slot = vec![usize::MAX; m];
        for (b, &p) in kernel_cols.iter().enumerate() {
            col_slot[p] = b;
        }
        for p in 0..m {
            let j = self.basis[p];
            if j < n {
                let b = col_slot[p];
                for (a, &i) in kernel_rows.iter().enumerate() {
                    self.binv[i * m + p] = kinv[b * k + a];
                }
            } else {
                let i = j - n;
                // row p = A[i, S] K^-1 on kernel columns, -1 on column i
                for &(jj, coef) in &self.rows[i] {
                    let q = self.position[jj];
                    if q == usize::MAX {
                        continue;
                    }
                    let b = col_slot[q];
                    for (a, &ii) in kernel_rows.iter().enumerate() {
                        self.binv[ii * m + p] += coef * kinv[b * k + a];
                    }
                }
                self.binv[i * m + p] = -1.0;
            }
        }
        Ok(())
    }

    /// Replace dependent basic structurals by logicals of uncovered rows.
    fn repair(&mut self, dependent: &[usize]) {
        let n = self.n;
        let mut free_rows: Vec<usize> = Vec::new();
        // rows not covered: nonbasic logicals whose rows are not spanned. Use
        // a greedy choice: rows touched by the dependent columns first.
        for &p in dependent {
            let j = self.basis[p];
            let row = self.cols[j]
                .iter()
                .map(|&(i, _)| i)
                .find(|&i| self.state[n + i] != VarState::Basic && !free_rows.contains(&i))
                .or_else(|| {
                    (0..self.m)
                        .find(|&i| self.state[n + i] != VarState::Basic && !free_rows.contains(&i))
                });
            if let Some(i) = row {
                free_rows.push(i);
                let logical = n + i;
                self.basis[p] = logical;
                self.position[logical] = p;
                self.state[logical] = VarState::Basic;
                self.position[j] = usize::MAX;
                self.state[j] = VarState::AtLower;
                self.place_nonbasic(j, None);
            }
        }
    }

    /// Set bounds of structural `j`. Basic values are refreshed lazily by the
    /// next solve.
    pub(crate) fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.state[j] != VarState::Basic {
            self.place_nonbasic(j, None);
        }
    }

    fn basic_costs(&self) -> Vec<f64> {
        self.basis.iter().map(|&j| self.cost[j]).collect()
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lower[j] - PRIMAL_TOL {
            self.lower[j] - v
        } else if v > self.upper[j] + PRIMAL_TOL {
            v - self.upper[j]
        } else {
            0.0
        }
    }

    fn iteration_cap(&self) -> usize {
        self.iterations + 50 * (self.n + self.m) + 1000
    }

    /// Primal simplex from the current basis.
    pub(crate) fn primal(&mut self) -> Result<Outcome, SolverError> {
        self.certificate = None;
        self.compute_basic_values();
        let cap = self.iteration_cap();
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations > cap {
                return Err(SolverError::NumericalBreakdown(
                    "primal simplex iteration limit".into(),
                ));
            }
            // composite objective: phase 1 while any basic variable is out of bounds
            let mut phase_one = false;
            let basic_cost: Vec<f64> = self
                .basis
                .iter()
                .map(|&j| {
                    let v = self.x[j];
                    if v < self.lower[j] - PRIMAL_TOL {
                        phase_one = true;
                        -1.0
                    } else if v > self.upper[j] + PRIMAL_TOL {
                        phase_one = true;
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            let basic_cost = if phase_one {
                basic_cost
            } else {
                self.basic_costs()
            };
            let y = self.duals_for(&basic_cost);
            let bland = degenerate_run >= DEGENERATE_RUN_FOR_BLAND;

            let mut entering: Option<(usize, f64, f64)> = None; // (j, d, direction)
            for j in 0..self.n + self.m {
                let st = self.state[j];
                if st == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let c = if phase_one { 0.0 } else { self.cost[j] };
                let d = self.reduced_cost(j, c, &y);
                let dir = match st {
                    VarState::AtLower if d < -DUAL_TOL => 1.0,
                    VarState::AtUpper if d > DUAL_TOL => -1.0,
                    VarState::Free if d.abs() > DUAL_TOL => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, d, dir));
                    break;
                }
                if entering.is_none_or(|(_, best, _)| d.abs() > best.abs()) {
                    entering = Some((j, d, dir));
                }
            }
            let Some((q, _, dir)) = entering else {
                if phase_one {
                    self.certificate = Some(y);
                    return Ok(Outcome::Infeasible);
                }
                return Ok(Outcome::Optimal);
            };

            let alpha = self.ftran(q);
            let step = self.primal_ratio(q, dir, &alpha, phase_one, bland);
            match step {
                Step::Unbounded => {
                    if phase_one {
                        return Err(SolverError::NumericalBreakdown(
                            "phase 1 found no blocking variable".into(),
                        ));
                    }
                    let mut ray = vec![0.0; self.n];
                    if q < self.n {
                        ray[q] = dir;
                    }
                    for (p, &j) in self.basis.iter().enumerate() {
                        if j < self.n {
                            ray[j] = -dir * alpha[p];
                        }
                    }
                    self.certificate = Some(ray);
                    return Ok(Outcome::Unbounded);
                }
                Step::Flip(theta) => {
                    self.apply_step(q, dir, theta, &alpha);
                    self.state[q] = if dir > 0.0 {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.x[q] = if dir > 0.0 {
                        self.upper[q]
                    } else {
                        self.lower[q]
                    };
                    self.iterations += 1;
                    degenerate_run = 0;
                }
                Step::Pivot {
                    row,
                    theta,
                    target,
                    to_upper,
                } => {
                    self.apply_step(q, dir, theta, &alpha);
                    degenerate_run = if theta <= PRIMAL_TOL {
                        degenerate_run + 1
                    } else {
                        0
                    };
                    let leave_state = if to_upper {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    let entering_value = self.x[q];
                    self.exchange(row, q, &alpha, leave_state, target)?;
                    if self.since_refactor != 0 {
                        self.x[q] = entering_value;
                    }
                }
            }
        }
    }

    fn apply_step(&mut self, q: usize, dir: f64, theta: f64, alpha: &[f64]) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += dir * theta;
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] -= dir * theta * alpha[p];
        }
    }

    /// Two-pass (Harris) ratio test for the primal method.
    fn primal_ratio(
        &self,
        q: usize,
        dir: f64,
        alpha: &[f64],
        phase_one: bool,
        bland: bool,
    ) -> Step {
        // candidates: (position, distance, rate, target, to_upper)
        let mut cands: Vec<(usize, f64, f64, f64, bool)> = Vec::new();
        for (p, &j) in self.basis.iter().enumerate() {
            let rate = -dir * alpha[p];
            if rate.abs() <= PIVOT_TOL {
                continue;
            }
            let v = self.x[j];
            let (lo, hi) = (self.lower[j], self.upper[j]);
            let below = v < lo - PRIMAL_TOL;
            let above = v > hi + PRIMAL_TOL;
            let (target, to_upper) = if rate < 0.0 {
                if below {
                    continue;
                } else if above && phase_one {
                    (hi, true)
                } else {
                    (lo, false)
                }
            } else if above {
                continue;
            } else if below && phase_one {
                (lo, false)
            } else {
                (hi, true)
            };
            if !target.is_finite() {
                continue;
            }
            let dist = ((target - v) / rate).max(0.0);
            cands.push((p, dist, rate, target, to_upper));
        }
        let flip = self.upper[q] - self.lower[q];
        if cands.is_empty() {
            return if flip.is_finite() {
                Step::Flip(flip)
            } else {
                Step::Unbounded
            };
        }
        let theta_max = cands
            .iter()
            .map(|&(_, dist, rate, _, _)| dist + PRIMAL_TOL / rate.abs())
            .fold(f64::INFINITY, f64::min);
        if flip.is_finite() && flip <= theta_max {
            return Step::Flip(flip);
        }
        let mut best: Option<(usize, f64, f64, f64, bool)> = None;
        for c in cands.iter().copied().filter(|c| c.1 <= theta_max) {
            let better = match best {
                None => true,
                Some(b) if bland => self.basis[c.0] < self.basis[b.0],
                Some(b) => c.2.abs() > b.2.abs(),
            };
            if better {
                best = Some(c);
            }
        }
        let (row, theta, _, target, to_upper) = best.expect("theta_max comes from a candidate");
        Step::Pivot {
            row,
            theta,
            target,
            to_upper,
        }
    }

    /// Re-seat nonbasic variables on the bound matching their reduced-cost
    /// sign. Returns false when some nonbasic variable cannot be made dual
    /// feasible (infinite bound on the required side).
    fn make_dual_feasible(&mut self) -> bool {
        let y = self.duals_for(&self.basic_costs());
        let mut ok = true;
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let d = self.reduced_cost(j, self.cost[j], &y);
            self.place_nonbasic(j, Some(d));
            let bad = match self.state[j] {
                _ if self.lower[j] == self.upper[j] => false,
                VarState::AtLower => d < -DUAL_TOL,
                VarState::AtUpper => d > DUAL_TOL,
                VarState::Free => d.abs() > DUAL_TOL,
                VarState::Basic => false,
            };
            ok &= !bad;
        }
        ok
    }

    /// Dual simplex from the current basis, falling back to the primal
    /// method if the basis is not dual feasible.
    pub(crate) fn dual(&mut self) -> Result<Outcome, SolverError> {
        Ok(self.dual_inner(None)?.expect("no iteration limit"))
    }

    /// Dual simplex stopped after `limit` iterations (`None` then). The
    /// objective of a stopped run is a lower bound on the relaxation, since
    /// the basis stays dual feasible. A basis that is not dual feasible to
    /// begin with is solved to the end with the primal method.
    pub(crate) fn dual_limited(&mut self, limit: usize) -> Result<Option<Outcome>, SolverError> {
        self.dual_inner(Some(limit))
    }

    fn dual_inner(&mut self, limit: Option<usize>) -> Result<Option<Outcome>, SolverError> {
        self.certificate = None;
        if !self.make_dual_feasible() {
            return self.primal().map(Some);
        }
        self.compute_basic_values();
        let cap = self.iteration_cap();
        let stop = limit.map_or(usize::MAX, |l| self.iterations + l);
        let mut degenerate_run = 0usize;
        let mut y = self.duals_for(&self.basic_costs());
        loop {
            if self.iterations > cap {
                return Err(SolverError::NumericalBreakdown(
                    "dual simplex iteration limit".into(),
                ));
            }
            if self.iterations >= stop {
                return Ok(None);
            }
            let bland = degenerate_run >= DEGENERATE_RUN_FOR_BLAND;
            let mut leave: Option<(usize, f64)> = None;
            for (p, &j) in self.basis.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf > 0.0 {
                    let better = match leave {
                        None => true,
                        Some((bp, _)) if bland => j < self.basis[bp],
                        Some((_, bi)) => inf > bi,
                    };
                    if better {
                        leave = Some((p, inf));
                    }
                }
            }
            let Some((r, _)) = leave else {
                // primal feasible; confirm optimality with the primal method,
                // which returns at once when no reduced cost is attractive
                return self.primal().map(Some);
            };
            let jr = self.basis[r];
            let increase = self.x[jr] < self.lower[jr];
            let target = if increase {
                self.lower[jr]
            } else {
                self.upper[jr]
            };

            let rho = self.btran_unit(r);
            // candidates: (j, ratio, |alpha_rj|, alpha_rj, d_j)
            let mut cands: Vec<(usize, f64, f64, f64, f64)> = Vec::new();
            for j in 0..self.n + self.m {
                let st = self.state[j];
                if st == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let arj = self.row_dot(j, &rho);
                if arj.abs() <= PIVOT_TOL {
                    continue;
                }
                // x_r changes by -arj * t when x_j moves by t
                let eligible = match st {
                    VarState::AtLower => (increase && arj < 0.0) || (!increase && arj > 0.0),
                    VarState::AtUpper => (increase && arj > 0.0) || (!increase && arj < 0.0),
                    VarState::Free => true,
                    VarState::Basic => false,
                };
                if !eligible {
                    continue;
                }
                let d = self.reduced_cost(j, self.cost[j], &y);
                cands.push((j, d.abs() / arj.abs(), arj.abs(), arj, d));
            }
            if cands.is_empty() {
                self.certificate = Some(rho);
                return Ok(Some(Outcome::Infeasible));
            }
            let bound = cands
                .iter()
                .map(|c| c.1 + DUAL_TOL / c.2)
                .fold(f64::INFINITY, f64::min);
            let mut best: Option<(usize, f64, f64, f64, f64)> = None;
            for c in cands.iter().copied().filter(|c| c.1 <= bound) {
                let better = match best {
                    None => true,
                    Some(b) if bland => c.0 < b.0,
                    Some(b) => c.2 > b.2,
                };
                if better {
                    best = Some(c);
                }
            }
            let (q, ratio, _, arq, dq) = best.expect("bound comes from a candidate");
            degenerate_run = if ratio <= DUAL_TOL {
                degenerate_run + 1
            } else {
                0
            };

            let alpha = self.ftran(q);
            if (alpha[r] - arq).abs() > 1e-6 * (1.0 + arq.abs()) {
                // row and column computations disagree: refresh and retry
                self.refactor()?;
                y = self.duals_for(&self.basic_costs());
                continue;
            }
            let t = (target - self.x[jr]) / (-alpha[r]);
            self.x[q] += t;
            for (p, &j) in self.basis.iter().enumerate() {
                self.x[j] -= alpha[p] * t;
            }
            let entering_value = self.x[q];
            let leave_state = if increase {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            self.exchange(r, q, &alpha, leave_state, target)?;
            if self.since_refactor != 0 {
                self.x[q] = entering_value;
                // d_j -= (d_q / alpha_rq) alpha_rj, i.e. y moves along row r of B^-1
                let step = dq / arq;
                for (yi, ri) in y.iter_mut().zip(&rho) {
                    *yi += step * ri;
                }
            } else {
                y = self.duals_for(&self.basic_costs());
            }
        }
    }

    /// Duals `y` (sensitivity of the objective to each row bound) and reduced
    /// costs of all structurals for the current basis.
    pub(crate) fn duals_and_reduced_costs(&self) -> (Vec<f64>, Vec<f64>) {
        let y = self.duals_for(&self.basic_costs());
        let d = (0..self.n)
            .map(|j| {
                if self.state[j] == VarState::Basic {
                    0.0
                } else {
                    self.reduced_cost(j, self.cost[j], &y)
                }
            })
            .collect();
        (y, d)
    }

    /// Bound a nonbasic structural sits on: `Some(false)` at lower,
    /// `Some(true)` at upper, `None` when basic or free.
    pub(crate) fn nonbasic_side(&self, j: usize) -> Option<bool> {
        match self.state[j] {
            VarState::AtLower => Some(false),
            VarState::AtUpper => Some(true),
            VarState::Basic | VarState::Free => None,
        }
    }

    /// Basic variable at basis position `r` and the nonzero entries of its
    /// tableau row: `x_B[r] = -Σ alpha_j x_j` over nonbasic `j`.
    pub(crate) fn tableau_row(&self, r: usize) -> (usize, Vec<(usize, f64)>) {
        let rho = self.btran_unit(r);
        let row = (0..self.n + self.m)
            .filter(|&j| self.state[j] != VarState::Basic)
            .filter_map(|j| {
                let a = self.row_dot(j, &rho);
                (a.abs() > 1e-11).then_some((j, a))
            })
            .collect();
        (self.basis[r], row)
    }

    pub(crate) fn n_rows(&self) -> usize {
        self.m
    }

    pub(crate) fn state_of(&self, j: usize) -> VarState {
        self.state[j]
    }

    /// Terms of row `i`.
    pub(crate) fn row_terms(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Append rows `lo <= a x <= hi` with their logicals basic. The basis
    /// stays dual feasible, so the dual method restores optimality.
    pub(crate) fn add_rows(&mut self, new_rows: &[RowSpec]) {
        let (n, m0) = (self.n, self.m);
        let k = new_rows.len();
        let m = m0 + k;
        // B' = [B 0; C -1]  =>  B'^-1 = [B^-1 0; C B^-1 -1]
        let mut binv = vec![0.0; m * m];
        for c in 0..m0 {
            binv[c * m..c * m + m0].copy_from_slice(&self.binv[c * m0..(c + 1) * m0]);
        }
        for (q, (terms, lo, hi)) in new_rows.iter().enumerate() {
            let i = m0 + q;
            // row q of C B^-1 is Σ_p C[q,p] (B^-1)[p, :] over basic positions p
            for &(j, a) in terms {
                let p = self.position[j];
                if p != usize::MAX {
                    for c in 0..m0 {
                        binv[c * m + i] += a * self.binv[c * m0 + p];
                    }
                }
                self.cols[j].push((i, a));
            }
            binv[i * m + i] = -1.0;
            self.rows.push(terms.clone());
            self.cost.push(0.0);
            self.lower.push(*lo);
            self.upper.push(*hi);
            self.x.push(terms.iter().map(|&(j, a)| a * self.x[j]).sum());
            self.state.push(VarState::Basic);
            self.position.push(i);
            self.basis.push(n + i);
        }
        self.m = m;
        self.binv = binv;
    }

    /// Remove rows at index `first` and beyond whose logical is basic, i.e.
    /// rows that do not bind at the current basis. Returns how many went.
    ///
    /// A basic logical is the unit column `-e_i` in position `p`, so the
    /// inverse of the reduced basis is `B^-1` without row `p` and column `i`.
    pub(crate) fn drop_slack_rows(&mut self, first: usize) -> usize {
        let (n, m) = (self.n, self.m);
        let dropped: Vec<bool> = (0..m)
            .map(|i| i >= first && self.state[n + i] == VarState::Basic)
            .collect();
        let k = dropped.iter().filter(|&&d| d).count();
        if k == 0 {
            return 0;
        }
        let m2 = m - k;
        let mut new_row = vec![usize::MAX; m];
        let mut next = 0;
        for i in 0..m {
            if !dropped[i] {
                new_row[i] = next;
                next += 1;
            }
        }
        let kept_positions: Vec<usize> = (0..m)
            .filter(|&p| !(self.basis[p] >= n && dropped[self.basis[p] - n]))
            .collect();
        debug_assert_eq!(kept_positions.len(), m2);
        let mut binv = vec![0.0; m2 * m2];
        for i in 0..m {
            if dropped[i] {
                continue;
            }
            let c2 = new_row[i];
            for (p2, &p) in kept_positions.iter().enumerate() {
                binv[c2 * m2 + p2] = self.binv[i * m + p];
            }
        }
        let basis: Vec<usize> = kept_positions
            .iter()
            .map(|&p| {
                let j = self.basis[p];
                if j < n {
                    j
                } else {
                    n + new_row[j - n]
                }
            })
            .collect();
        for col in &mut self.cols {
            col.retain(|&(i, _)| !dropped[i]);
            for e in col.iter_mut() {
                e.0 = new_row[e.0];
            }
        }
        let keep_var = |j: usize| j < n || !dropped[j - n];
        let filter = |v: &mut Vec<f64>| {
            let mut j = 0;
            v.retain(|_| {
                let keep = keep_var(j);
                j += 1;
                keep
            });
        };
        filter(&mut self.cost);
        filter(&mut self.lower);
        filter(&mut self.upper);
        filter(&mut self.x);
        let mut j = 0;
        self.state.retain(|_| {
            let keep = keep_var(j);
            j += 1;
            keep
        });
        let mut i = 0;
        self.rows.retain(|_| {
            let keep = !dropped[i];
            i += 1;
            keep
        });
        self.m = m2;
        self.binv = binv;
        self.basis = basis;
        self.position = vec![usize::MAX; n + m2];
        for (p, &j) in self.basis.iter().enumerate() {
            self.position[j] = p;
        }
        k
    }

    /// Lagrangian dual objective: every variable priced at the bound its
    /// reduced cost points to.
    pub(crate) fn dual_objective(&self, y: &[f64]) -> f64 {
        let mut total = 0.0;
        for j in 0..self.n + self.m {
            let d = if self.state[j] == VarState::Basic {
                0.0
            } else {
                self.reduced_cost(j, self.cost[j], y)
            };
            if d == 0.0 {
                continue;
            }
            let at = if d.abs() <= DUAL_TOL {
                self.x[j]
            } else if d > 0.0 {
                self.lower[j]
            } else {
                self.upper[j]
            };
            total += d * at;
        }
        total
    }

    /// True when some basic variable sits on a bound, so the duals may not
    /// be unique.
    pub(crate) fn is_degenerate(&self) -> bool {
        self.basis.iter().any(|&j| {
            let v = self.x[j];
            (self.lower[j].is_finite() && (v - self.lower[j]).abs() <= 1e-9 * (1.0 + v.abs()))
                || (self.upper[j].is_finite()
                    && (v - self.upper[j]).abs() <= 1e-9 * (1.0 + v.abs()))
        })
    }
}

enum Step {
    Unbounded,
    Flip(f64),
    Pivot {
        row: usize,
        theta: f64,
        target: f64,
        to_upper: bool,
    },
}

enum ColumnIter<'a> {
    Structural(std::slice::Iter<'a, (usize, f64)>),
    Logical(Option<usize>),
}

impl Iterator for ColumnIter<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColumnIter::Structural(it) => it.next().copied(),
            ColumnIter::Logical(i) => i.take().map(|i| (i, -1.0)),
        }
    }
}

/// Gauss-Jordan inverse of a row-major `k x k` matrix with partial pivoting.
/// On failure returns the columns that had no acceptable pivot.
fn invert_dense(a: &mut [f64], k: usize) -> Result<Vec<f64>, Vec<usize>> {
    let mut inv = vec![0.0; k * k];
    for i in 0..k {
        inv[i * k + i] = 1.0;
    }
    let mut bad = Vec::new();
    let mut used = vec![false; k];
    // pivot row chosen for each column
    let mut pivot_row = vec![usize::MAX; k];
    for c in 0..k {
        let mut best = None;
        let mut best_val = 1e-11;
        for r in 0..k {
            if !used[r] && a[r * k + c].abs() > best_val {
                best_val = a[r * k + c].abs();
                best = Some(r);
            }
        }
        let Some(p) = best else {
            bad.push(c);
            continue;
        };
        used[p] = true;
        pivot_row[c] = p;
        let piv = a[p * k + c];
        for v in &mut a[p * k..(p + 1) * k] {
            *v /= piv;
        }
        for v in &mut inv[p * k..(p + 1) * k] {
            *v /= piv;
        }
        for r in 0..k {
            if r == p {
                continue;
            }
            let f = a[r * k + c];
            if f == 0.0 {
                continue;
            }
            for cc in 0..k {
                a[r * k + cc] -= f * a[p * k + cc];
                inv[r * k + cc] -= f * inv[p * k + cc];
            }
        }
    }
    if !bad.is_empty() {
        return Err(bad);
    }
    // row p of the reduced system holds the inverse row for column c
    let mut out = vec![0.0; k * k];
    for c in 0..k {
        let p = pivot_row[c];
        out[c * k..(c + 1) * k].copy_from_slice(&inv[p * k..(p + 1) * k]);
    }
    Ok(out)
}
