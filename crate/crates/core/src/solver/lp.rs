//! Bounded dual simplex for the linear relaxation of a [`MilpModel`].
//!
//! Every row `r` gets a logical variable `s_r = a_r x` bounded by the row's
//! sense, so the constraint matrix is `[A | -I]` with right-hand side zero.
//! The basis is kept as a sparse LU factorization with product-form updates.

use super::factor::Factor;
use crate::milp::{MilpModel, Sense};

const NONE: usize = usize::MAX;
const ARTIFICIAL_BOUND: f64 = 1e7;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
/// Iterations without objective progress before switching to Bland's rule.
const STALL_LIMIT: u32 = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpOutcome {
    Optimal,
    Infeasible,
    /// The objective provably exceeds the cutoff.
    Cutoff,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct Lp {
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    row_start: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    /// Costs of the `n + m` variables (zero for logicals).
    cost: Vec<f64>,
    /// Costs the dual simplex works with (perturbed copy of `cost`).
    work_cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    d: Vec<f64>,
    status: Vec<Status>,
    /// Set when a nonbasic value sits on an artificial bound.
    artificial: Vec<bool>,
    /// Basic variable at each basis position.
    head: Vec<usize>,
    /// Basis position of each variable, `NONE` when nonbasic.
    pos: Vec<usize>,
    factor: Factor,
    /// Dual steepest-edge weights `||e_i^T B^-1||^2` by basis position.
    weights: Vec<f64>,
    pub iterations: u64,
    /// Row `p` of `B^-1`, indexed by constraint row.
    rho: Vec<f64>,
    alpha_row: Vec<f64>,
}

impl Lp {
    pub fn new(model: &MilpModel) -> Lp {
        let n = model.num_vars();
        let m = model.constraints.len();
        let mut col_count = vec![0usize; n + 1];
        let mut row_start = Vec::with_capacity(m + 1);
        let mut row_col = Vec::new();
        let mut row_val = Vec::new();
        let mut lb = Vec::with_capacity(n + m);
        let mut ub = Vec::with_capacity(n + m);
        for v in &model.variables {
            lb.push(v.lower);
            ub.push(v.upper);
        }
        row_start.push(0);
        for c in &model.constraints {
            for &(v, a) in &c.terms {
                row_col.push(v.0);
                row_val.push(a);
                col_count[v.0 + 1] += 1;
            }
            row_start.push(row_col.len());
            let (lo, hi) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            lb.push(lo);
            ub.push(hi);
        }
        for j in 0..n {
            col_count[j + 1] += col_count[j];
        }
        let col_start = col_count.clone();
        let mut fill = col_count;
        let mut col_row = vec![0; row_col.len()];
        let mut col_val = vec![0.0; row_col.len()];
        for r in 0..m {
            for e in row_start[r]..row_start[r + 1] {
                let j = row_col[e];
                col_row[fill[j]] = r;
                col_val[fill[j]] = row_val[e];
                fill[j] += 1;
            }
        }
        let mut cost = vec![0.0; n + m];
        for &(v, c) in &model.objective {
            cost[v.0] = c;
        }
        let mut lp = Lp {
            n,
            m,
            col_start,
            col_row,
            col_val,
            row_start,
            row_col,
            row_val,
            d: cost.clone(),
            work_cost: cost.clone(),
            cost,
            lb,
            ub,
            x: vec![0.0; n + m],
            status: vec![Status::Lower; n + m],
            artificial: vec![false; n + m],
            head: Vec::new(),
            pos: vec![NONE; n + m],
            factor: Factor::default(),
            weights: vec![1.0; m],
            iterations: 0,
            rho: vec![0.0; m],
            alpha_row: vec![0.0; n + m],
        };
        lp.slack_basis();
        lp
    }

    /// Structural values of the current basic solution.
    pub fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lb[j], self.ub[j])
    }

    /// Changes the bounds of structural `j`, keeping the basis dual feasible.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lb[j] = lower;
        self.ub[j] = upper;
        if self.status[j] != Status::Basic {
            self.place_nonbasic(j);
        }
    }

    fn slack_basis(&mut self) {
        self.head = (self.n..self.n + self.m).collect();
        self.weights.iter_mut().for_each(|w| *w = 1.0);
        for r in 0..self.m {
            self.status[self.n + r] = Status::Basic;
            self.pos[self.n + r] = r;
        }
        self.work_cost.copy_from_slice(&self.cost);
        for j in 0..self.n {
            self.pos[j] = NONE;
            self.d[j] = self.cost[j];
            self.status[j] = Status::Lower;
            self.place_nonbasic(j);
        }
        self.refactor();
    }

    fn updates(&self) -> usize {
        self.factor.updates()
    }

    /// Puts nonbasic `j` on the bound its reduced cost calls for.
    fn place_nonbasic(&mut self, j: usize) {
        let (l, u) = (self.lb[j], self.ub[j]);
        self.artificial[j] = false;
        let dj = self.d[j];
        let want_upper = if l == u {
            false
        } else if dj > DUAL_TOL {
            false
        } else if dj < -DUAL_TOL {
            true
        } else {
            match self.status[j] {
                Status::Upper => u.is_finite() || !l.is_finite(),
                _ => !l.is_finite() && u.is_finite(),
            }
        };
        if want_upper {
            self.status[j] = Status::Upper;
            if u.is_finite() {
                self.x[j] = u;
            } else {
                self.x[j] = ARTIFICIAL_BOUND;
                self.artificial[j] = true;
            }
        } else if l.is_finite() {
            self.status[j] = Status::Lower;
            self.x[j] = l;
        } else if dj.abs() <= DUAL_TOL && !u.is_finite() {
            self.status[j] = Status::Zero;
            self.x[j] = 0.0;
        } else {
            self.status[j] = Status::Lower;
            self.x[j] = -ARTIFICIAL_BOUND;
            self.artificial[j] = true;
        }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_start[j]..self.col_start[j + 1];
        self.col_row[range.clone()]
            .iter()
            .copied()
            .zip(self.col_val[range].iter().copied())
    }

    /// Factorizes the current basis. Columns that turn out dependent are
    /// swapped for the logicals of the rows left without a pivot.
    fn refactor(&mut self) {
        loop {
            let columns: Vec<Vec<(usize, f64)>> = self
                .head
                .iter()
                .map(|&j| {
                    if j < self.n {
                        self.column(j).collect()
                    } else {
                        vec![(j - self.n, -1.0)]
                    }
                })
                .collect();
            match Factor::new(self.m, &columns) {
                Ok(f) => {
                    self.factor = f;
                    return;
                }
                Err(singular) => {
                    for (&p, &r) in singular.positions.iter().zip(&singular.rows) {
                        let out = self.head[p];
                        let logical = self.n + r;
                        self.pos[out] = NONE;
                        self.status[out] = Status::Lower;
                        self.place_nonbasic(out);
                        self.head[p] = logical;
                        self.weights[p] = 1.0;
                        self.pos[logical] = p;
                        self.status[logical] = Status::Basic;
                        self.artificial[logical] = false;
                    }
                }
            }
        }
    }

    fn recompute_primal(&mut self) {
        // B x_B = -N x_N; a nonbasic logical contributes +x_r to row r.
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.status[j] == Status::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            if j < self.n {
                for e in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.col_row[e]] -= self.col_val[e] * xj;
                }
            } else {
                rhs[j - self.n] += xj;
            }
        }
        self.factor.ftran(&mut rhs);
        for (i, &j) in self.head.iter().enumerate() {
            self.x[j] = rhs[i];
        }
    }

    fn recompute_duals(&mut self) {
        let mut y: Vec<f64> = self.head.iter().map(|&j| self.work_cost[j]).collect();
        self.factor.btran(&mut y);
        for j in 0..self.n {
            if self.status[j] == Status::Basic {
                self.d[j] = 0.0;
            } else {
                let ya: f64 = self.column(j).map(|(r, a)| y[r] * a).sum();
                self.d[j] = self.work_cost[j] - ya;
            }
        }
        for r in 0..self.m {
            let j = self.n + r;
            self.d[j] = if self.status[j] == Status::Basic {
                0.0
            } else {
                self.work_cost[j] + y[r]
            };
        }
    }

    /// Moves nonbasic variables whose reduced cost has the wrong sign to the
    /// opposite bound. Returns false if that is impossible for some variable.
    fn restore_dual_feasibility(&mut self) -> bool {
        let mut ok = true;
        for j in 0..self.n + self.m {
            let dj = self.d[j];
            let wrong = match self.status[j] {
                Status::Basic => false,
                Status::Lower => dj < -DUAL_TOL && self.lb[j] != self.ub[j],
                Status::Upper => dj > DUAL_TOL && self.lb[j] != self.ub[j],
                Status::Zero => dj.abs() > DUAL_TOL,
            };
            if wrong {
                self.place_nonbasic(j);
                if self.artificial[j] && j >= self.n {
                    ok = false;
                }
            }
        }
        ok
    }

    fn primal_infeasibility(&self, j: usize) -> f64 {
        let x = self.x[j];
        let (l, u) = (self.lb[j], self.ub[j]);
        if x < l - PRIMAL_TOL * l.abs().max(1.0) {
            l - x
        } else if x > u + PRIMAL_TOL * u.abs().max(1.0) {
            x - u
        } else {
            0.0
        }
    }

    /// Brings the basis back to dual feasibility for the original costs.
    fn reset_duals(&mut self) {
        self.work_cost.copy_from_slice(&self.cost);
        self.recompute_duals();
        if !self.restore_dual_feasibility() {
            self.slack_basis();
        }
        self.recompute_primal();
    }

    /// Shifts the costs of movable nonbasic variables away from zero reduced
    /// cost, in the direction that keeps the basis dual feasible.
    fn perturb_costs(&mut self) {
        for j in 0..self.n + self.m {
            if self.lb[j] == self.ub[j] {
                continue;
            }
            let sign = match self.status[j] {
                Status::Lower => 1.0,
                Status::Upper => -1.0,
                Status::Basic | Status::Zero => continue,
            };
            let delta = sign * self.perturbation(j);
            self.work_cost[j] = self.cost[j] + delta;
            self.d[j] += delta;
        }
    }

    /// Deterministic pseudo-random perturbation size for variable `j`.
    fn perturbation(&self, j: usize) -> f64 {
        let h = (j as u64 ^ self.iterations).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11;
        let u = 1.0 + (h as f64) / (1u64 << 53) as f64;
        5e-7 * u * (1.0 + self.cost[j].abs())
    }

    fn work_objective(&self) -> f64 {
        (0..self.n + self.m)
            .map(|j| self.work_cost[j] * self.x[j])
            .sum()
    }

    /// Solves the relaxation from the current basis: dual simplex on slightly
    /// perturbed costs, then primal simplex on the original costs.
    ///
    /// Returns `Cutoff` when the optimum exceeds `cutoff`.
    pub fn solve(&mut self, cutoff: f64, max_iterations: u64) -> LpOutcome {
        let start = self.iterations;
        if self.updates() >= 50 {
            self.refactor();
        }
        self.reset_duals();
        self.perturb_costs();
        match self.dual_phase(start + max_iterations) {
            LpOutcome::Optimal => {}
            other => {
                self.work_cost.copy_from_slice(&self.cost);
                return other;
            }
        }
        self.work_cost.copy_from_slice(&self.cost);
        self.recompute_duals();
        match self.primal_phase(start + max_iterations) {
            LpOutcome::Optimal => {}
            other => return other,
        }
        if (0..self.n).any(|j| self.artificial[j] && self.status[j] != Status::Basic) {
            return LpOutcome::Unbounded;
        }
        if self.objective() > cutoff {
            return LpOutcome::Cutoff;
        }
        LpOutcome::Optimal
    }

    fn dual_phase(&mut self, iteration_limit: u64) -> LpOutcome {
        let mut bland = false;
        let mut stall = 0u32;
        let mut best = f64::NEG_INFINITY;
        let mut verified = false;
        loop {
            if self.iterations >= iteration_limit {
                return LpOutcome::IterationLimit;
            }
            let obj = self.work_objective();
            if obj > best + 1e-12 * obj.abs().max(1.0) {
                best = obj;
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            }

            let Some(p) = self.select_leaving(bland) else {
                // Confirm on a fresh factorization before declaring optimality.
                if self.updates() > 0 && !verified {
                    verified = true;
                    self.refresh();
                    continue;
                }
                return LpOutcome::Optimal;
            };
            let to_upper = self.x[p] > self.ub[p];
            let bound = if to_upper { self.ub[p] } else { self.lb[p] };

            self.btran(p);
            self.compute_pivot_row();
            let Some(q) = self.ratio_test(to_upper, bland) else {
                if self.updates() > 0 && !verified {
                    verified = true;
                    self.refresh();
                    continue;
                }
                return LpOutcome::Infeasible;
            };
            let alpha_q = self.ftran(q);
            let pivot_ftran = self.alpha_at(&alpha_q, p);
            let pivot_row = self.alpha_row[q];
            self.iterations += 1;
            if !self.pivot_is_sound(pivot_ftran, pivot_row) {
                continue;
            }
            verified = false;

            let delta = (self.x[p] - bound) / pivot_ftran;
            self.move_primal(&alpha_q, q, delta);
            self.x[p] = bound;

            let theta = self.d[q] / pivot_row;
            self.update_duals(q, theta, true);
            self.d[p] = -theta;
            // Shift the cost of a degenerate leaving variable so it does not
            // re-enter at zero reduced cost.
            let floor = self.perturbation(p);
            let shifted = if to_upper {
                self.d[p].min(-floor)
            } else {
                self.d[p].max(floor)
            };
            self.work_cost[p] += shifted - self.d[p];
            self.d[p] = shifted;

            self.update_weights(p, &alpha_q);
            self.pivot(p, q, &alpha_q);
            self.status[p] = if to_upper {
                Status::Upper
            } else {
                Status::Lower
            };
            self.artificial[p] = false;
            self.status[q] = Status::Basic;
            self.artificial[q] = false;
            if self.needs_refactor() {
                self.refresh();
            }
        }
    }

    fn primal_phase(&mut self, iteration_limit: u64) -> LpOutcome {
        let mut bland = false;
        let mut stall = 0u32;
        let mut best = f64::INFINITY;
        loop {
            if self.iterations >= iteration_limit {
                return LpOutcome::IterationLimit;
            }
            let obj = self.objective();
            if obj < best - 1e-12 * obj.abs().max(1.0) {
                best = obj;
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            }
            // Entering: the most attractive reduced cost, or the lowest index under Bland.
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.n + self.m {
                if self.lb[j] == self.ub[j] {
                    continue;
                }
                let dj = self.d[j];
                let gain = match self.status[j] {
                    Status::Basic => 0.0,
                    Status::Lower => -dj,
                    Status::Upper => dj,
                    Status::Zero => dj.abs(),
                };
                if gain > DUAL_TOL
                    && (bland && enter.is_none() || !bland && enter.is_none_or(|(_, g)| gain > g))
                {
                    enter = Some((j, gain));
                }
            }
            let Some((q, _)) = enter else {
                return LpOutcome::Optimal;
            };
            let dir = match self.status[q] {
                Status::Lower => 1.0,
                Status::Upper => -1.0,
                _ => -self.d[q].signum(),
            };
            let alpha_q = self.ftran(q);
            // x_B moves by -dir * t * alpha.
            let mut step = if self.lb[q].is_finite() && self.ub[q].is_finite() {
                self.ub[q] - self.lb[q]
            } else {
                f64::INFINITY
            };
            let mut leave: Option<(usize, f64, bool)> = None;
            let mut consider = |j: usize, a: f64, x: f64, lb: f64, ub: f64| {
                let rate = -dir * a;
                if rate.abs() <= PIVOT_TOL {
                    return;
                }
                let (room, to_upper) = if rate < 0.0 {
                    ((x - lb).max(0.0), false)
                } else {
                    ((ub - x).max(0.0), true)
                };
                let t = room / rate.abs();
                let better = match leave {
                    None => t < step,
                    Some((lj, _, _)) => t < step - 1e-12 || (t <= step + 1e-12 && bland && j < lj),
                };
                if better && t.is_finite() {
                    step = t;
                    leave = Some((j, a, to_upper));
                }
            };
            for (i, &a) in alpha_q.iter().enumerate() {
                let j = self.head[i];
                consider(j, a, self.x[j], self.lb[j], self.ub[j]);
            }
            if !step.is_finite() {
                return LpOutcome::Unbounded;
            }
            self.iterations += 1;
            let delta = dir * step;
            match leave {
                None => {
                    // Bound flip of the entering variable.
                    self.move_primal(&alpha_q, q, delta);
                    self.status[q] = if dir > 0.0 {
                        Status::Upper
                    } else {
                        Status::Lower
                    };
                    self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                }
                Some((p, pivot_ftran, to_upper)) => {
                    self.btran(p);
                    self.compute_pivot_row();
                    let pivot_row = self.alpha_row[q];
                    if (pivot_ftran - pivot_row).abs() > 1e-7 * (1.0 + pivot_row.abs()) {
                        if self.updates() == 0 {
                            return LpOutcome::IterationLimit;
                        }
                        self.refactor();
                        self.recompute_duals();
                        self.recompute_primal();
                        continue;
                    }
                    self.move_primal(&alpha_q, q, delta);
                    self.x[p] = if to_upper { self.ub[p] } else { self.lb[p] };
                    let theta = self.d[q] / pivot_row;
                    self.update_duals(q, theta, false);
                    self.d[p] = -theta;
                    self.weights[self.pos[p]] = 1.0;
                    self.pivot(p, q, &alpha_q);
                    self.status[p] = if to_upper {
                        Status::Upper
                    } else {
                        Status::Lower
                    };
                    self.artificial[p] = false;
                    self.status[q] = Status::Basic;
                    self.artificial[q] = false;
                    if self.needs_refactor() {
                        self.refactor();
                        self.recompute_duals();
                        self.recompute_primal();
                    }
                }
            }
        }
    }

    /// Refactors and recomputes duals and primals after numerical drift.
    fn refresh(&mut self) {
        self.refactor();
        self.recompute_duals();
        if !self.restore_dual_feasibility() {
            self.slack_basis();
            self.perturb_costs();
        }
        self.recompute_primal();
    }

    /// Compares the pivot computed by column and by row; on disagreement the
    /// factorization is rebuilt and the iteration skipped.
    fn pivot_is_sound(&mut self, by_column: f64, by_row: f64) -> bool {
        if (by_column - by_row).abs() <= 1e-7 * (1.0 + by_row.abs()) && by_column.abs() >= PIVOT_TOL
        {
            return true;
        }
        if self.updates() == 0 {
            // A fresh factorization disagrees with itself: restart from the slack basis.
            self.slack_basis();
            self.perturb_costs();
            self.recompute_primal();
        } else {
            self.refresh();
        }
        false
    }

    fn move_primal(&mut self, alpha: &[f64], q: usize, delta: f64) {
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                self.x[self.head[i]] -= delta * a;
            }
        }
        self.x[q] += delta;
    }

    fn update_duals(&mut self, q: usize, theta: f64, clamp: bool) {
        for j in 0..self.n + self.m {
            if self.status[j] == Status::Basic || j == q {
                continue;
            }
            let a = self.alpha_row[j];
            if a != 0.0 {
                self.d[j] -= theta * a;
                if clamp {
                    // Harris may leave tiny wrong-signed reduced costs.
                    let wrong = match self.status[j] {
                        Status::Lower => self.d[j] < 0.0,
                        Status::Upper => self.d[j] > 0.0,
                        _ => false,
                    };
                    if wrong && self.d[j].abs() < DUAL_TOL {
                        self.work_cost[j] -= self.d[j];
                        self.d[j] = 0.0;
                    }
                }
            }
        }
        self.d[q] = 0.0;
    }

    fn select_leaving(&self, bland: bool) -> Option<usize> {
        let mut best = None;
        let mut best_val = 0.0;
        for (i, &j) in self.head.iter().enumerate() {
            let inf = self.primal_infeasibility(j);
            if inf > 0.0 {
                if bland {
                    if best.is_none_or(|b| j < b) {
                        best = Some(j);
                    }
                } else {
                    let score = inf * inf / self.weights[i];
                    if score > best_val {
                        best_val = score;
                        best = Some(j);
                    }
                }
            }
        }
        best
    }

    /// Steepest-edge weight update for the pivot at `p`; `rho` holds row `p`
    /// of `B^-1` and `alpha` the entering column.
    fn update_weights(&mut self, p: usize, alpha: &[f64]) {
        let r = self.pos[p];
        let w_r: f64 = self.rho.iter().map(|v| v * v).sum();
        let mut tau = self.rho.clone();
        self.factor.ftran(&mut tau);
        let a_r = alpha[r];
        for (i, &a) in alpha.iter().enumerate() {
            if i == r || a == 0.0 {
                continue;
            }
            let ratio = a / a_r;
            let w = self.weights[i] - 2.0 * ratio * tau[i] + ratio * ratio * w_r;
            self.weights[i] = w.max(1e-6);
        }
        self.weights[r] = (w_r / (a_r * a_r)).max(1e-6);
    }

    /// Fills `rho` with row `p` of `B^-1` (length m, indexed by row).
    fn btran(&mut self, p: usize) {
        let mut e = vec![0.0; self.m];
        e[self.pos[p]] = 1.0;
        self.factor.btran(&mut e);
        self.rho = e;
    }

    /// `alpha_row[j] = rho . column j` for every nonbasic `j`.
    fn compute_pivot_row(&mut self) {
        self.alpha_row.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.m {
            let rr = self.rho[r];
            if rr == 0.0 {
                continue;
            }
            for e in self.row_start[r]..self.row_start[r + 1] {
                self.alpha_row[self.row_col[e]] += rr * self.row_val[e];
            }
            self.alpha_row[self.n + r] = -rr;
        }
        for &j in &self.head {
            self.alpha_row[j] = 0.0;
        }
    }

    fn ratio_test(&self, to_upper: bool, bland: bool) -> Option<usize> {
        let sign = if to_upper { 1.0 } else { -1.0 };
        let eligible = |j: usize| -> Option<f64> {
            let a = self.alpha_row[j];
            if a.abs() <= PIVOT_TOL {
                return None;
            }
            let ok = match self.status[j] {
                Status::Basic => false,
                Status::Lower => self.lb[j] != self.ub[j] && sign * a > 0.0,
                Status::Upper => self.lb[j] != self.ub[j] && sign * a < 0.0,
                Status::Zero => true,
            };
            ok.then_some(a)
        };
        if bland {
            let mut best: Option<(f64, usize)> = None;
            for j in 0..self.n + self.m {
                if let Some(a) = eligible(j) {
                    let ratio = self.d[j].abs() / a.abs();
                    match best {
                        Some((b, _)) if ratio >= b - 1e-12 => {}
                        _ => best = Some((ratio, j)),
                    }
                }
            }
            return best.map(|b| b.1);
        }
        // Harris two-pass.
        let mut bound = f64::INFINITY;
        for j in 0..self.n + self.m {
            if let Some(a) = eligible(j) {
                bound = bound.min((self.d[j].abs() + DUAL_TOL) / a.abs());
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<(f64, usize)> = None;
        for j in 0..self.n + self.m {
            if let Some(a) = eligible(j) {
                if self.d[j].abs() / a.abs() <= bound {
                    match best {
                        Some((b, _)) if a.abs() <= b => {}
                        _ => best = Some((a.abs(), j)),
                    }
                }
            }
        }
        best.map(|b| b.1)
    }

    /// `B^-1 a_q`, indexed by basis position.
    fn ftran(&self, q: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.m];
        if q < self.n {
            for (r, v) in self.column(q) {
                a[r] = v;
            }
        } else {
            a[q - self.n] = -1.0;
        }
        self.factor.ftran(&mut a);
        a
    }

    fn alpha_at(&self, alpha: &[f64], p: usize) -> f64 {
        alpha[self.pos[p]]
    }

    /// Basis change: `q` enters at the position of `p`.
    fn pivot(&mut self, p: usize, q: usize, alpha: &[f64]) {
        let i = self.pos[p];
        self.factor.update(i, alpha);
        self.head[i] = q;
        self.pos[q] = i;
        self.pos[p] = NONE;
    }

    fn needs_refactor(&self) -> bool {
        self.updates() >= 100 || self.factor.size() > 4 * (self.m + self.col_row.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Family, VarKind};

    fn model(vars: &[(f64, f64)], rows: &[(&[f64], Sense, f64)], obj: &[f64]) -> MilpModel {
        let mut m = MilpModel::new();
        let ids: Vec<_> = vars
            .iter()
            .enumerate()
            .map(|(i, &(l, u))| m.add_variable(format!("v{i}"), VarKind::Continuous, l, u, None))
            .collect();
        for (coefs, sense, rhs) in rows {
            let terms = coefs
                .iter()
                .enumerate()
                .map(|(i, &c)| (ids[i], c))
                .collect();
            m.add_constraint(terms, *sense, *rhs, Family::External);
        }
        m.set_objective(obj.iter().enumerate().map(|(i, &c)| (ids[i], c)).collect());
        m
    }

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6, x,y >= 0 -> x = 1.6, y = 1.2
        let m = model(
            &[(0.0, f64::INFINITY), (0.0, f64::INFINITY)],
            &[(&[1.0, 2.0], Sense::Le, 4.0), (&[3.0, 1.0], Sense::Le, 6.0)],
            &[-1.0, -1.0],
        );
        let mut lp = Lp::new(&m);
        // Negative costs on unbounded variables start on artificial bounds.
        assert_eq!(lp.solve(f64::INFINITY, 1000), LpOutcome::Optimal);
        let x = lp.values();
        assert!(
            (x[0] - 1.6).abs() < 1e-9 && (x[1] - 1.2).abs() < 1e-9,
            "{x:?}"
        );
        assert!((lp.objective() + 2.8).abs() < 1e-9);
    }

    #[test]
    fn equality_and_bounds() {
        // min x + 2y + 3z  s.t. x + y + z = 2, x <= 0.5, y <= 1
        let m = model(
            &[(0.0, 0.5), (0.0, 1.0), (0.0, 5.0)],
            &[(&[1.0, 1.0, 1.0], Sense::Eq, 2.0)],
            &[1.0, 2.0, 3.0],
        );
        let mut lp = Lp::new(&m);
        assert_eq!(lp.solve(f64::INFINITY, 1000), LpOutcome::Optimal);
        assert!((lp.objective() - (0.5 + 2.0 + 1.5)).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasibility_and_cutoff() {
        let m = model(
            &[(0.0, 1.0), (0.0, 1.0)],
            &[(&[1.0, 1.0], Sense::Ge, 3.0)],
            &[1.0, 1.0],
        );
        assert_eq!(Lp::new(&m).solve(f64::INFINITY, 100), LpOutcome::Infeasible);
        let m = model(&[(0.0, 4.0)], &[(&[1.0], Sense::Ge, 3.0)], &[1.0]);
        assert_eq!(Lp::new(&m).solve(2.0, 100), LpOutcome::Cutoff);
    }

    #[test]
    fn warm_resolve_after_bound_change() {
        // min -x - y  s.t. x + y <= 1.5, x, y in [0, 1]
        let m = model(
            &[(0.0, 1.0), (0.0, 1.0)],
            &[(&[1.0, 1.0], Sense::Le, 1.5)],
            &[-1.0, -1.0],
        );
        let mut lp = Lp::new(&m);
        assert_eq!(lp.solve(f64::INFINITY, 100), LpOutcome::Optimal);
        assert!((lp.objective() + 1.5).abs() < 1e-9);
        lp.set_bounds(0, 1.0, 1.0);
        lp.set_bounds(1, 1.0, 1.0);
        assert_eq!(lp.solve(f64::INFINITY, 100), LpOutcome::Infeasible);
        lp.set_bounds(1, 0.0, 0.0);
        assert_eq!(lp.solve(f64::INFINITY, 100), LpOutcome::Optimal);
        assert!((lp.objective() + 1.0).abs() < 1e-9);
        lp.set_bounds(0, 0.0, 1.0);
        lp.set_bounds(1, 0.0, 1.0);
        assert_eq!(lp.solve(f64::INFINITY, 100), LpOutcome::Optimal);
        assert!((lp.objective() + 1.5).abs() < 1e-9);
    }

    #[test]
    fn unbounded_is_reported() {
        let m = model(&[(0.0, f64::INFINITY)], &[], &[-1.0]);
        assert_eq!(Lp::new(&m).solve(f64::INFINITY, 100), LpOutcome::Unbounded);
    }

    /// Random LPs against a brute-force vertex enumeration in 2D.
    #[test]
    fn random_two_variable_lps() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let rows: Vec<([f64; 2], f64)> = (0..4)
                .map(|_| {
                    (
                        [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
                        rng.gen_range(0.5..4.0),
                    )
                })
                .collect();
            let obj = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let boxes = [(0.0, 3.0), (-1.0, 2.0)];
            let row_refs: Vec<(&[f64], Sense, f64)> =
                rows.iter().map(|(a, b)| (&a[..], Sense::Le, *b)).collect();
            let m = model(&boxes, &row_refs, &obj);
            let mut lp = Lp::new(&m);
            let outcome = lp.solve(f64::INFINITY, 1000);
            // Brute force: all intersections of pairs of the 8 lines.
            let mut lines: Vec<([f64; 2], f64)> = rows.clone();
            lines.push(([1.0, 0.0], 3.0));
            lines.push(([1.0, 0.0], 0.0));
            lines.push(([0.0, 1.0], 2.0));
            lines.push(([0.0, 1.0], -1.0));
            let feasible = |p: [f64; 2]| {
                p[0] >= -1e-9
                    && p[0] <= 3.0 + 1e-9
                    && p[1] >= -1.0 - 1e-9
                    && p[1] <= 2.0 + 1e-9
                    && rows
                        .iter()
                        .all(|(a, b)| a[0] * p[0] + a[1] * p[1] <= b + 1e-9)
            };
            let mut best = f64::INFINITY;
            for i in 0..lines.len() {
                for j in i + 1..lines.len() {
                    let (a, b) = (lines[i].0, lines[j].0);
                    let det = a[0] * b[1] - a[1] * b[0];
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let p = [
                        (lines[i].1 * b[1] - a[1] * lines[j].1) / det,
                        (a[0] * lines[j].1 - lines[i].1 * b[0]) / det,
                    ];
                    if feasible(p) {
                        best = best.min(obj[0] * p[0] + obj[1] * p[1]);
                    }
                }
            }
            if best.is_finite() {
                assert_eq!(outcome, LpOutcome::Optimal);
                assert!(
                    (lp.objective() - best).abs() < 1e-7,
                    "{} vs {best}",
                    lp.objective()
                );
            } else {
                assert_eq!(outcome, LpOutcome::Infeasible);
            }
        }
    }
}
