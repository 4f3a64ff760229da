//! Depth-first branch-and-bound over the binary variables of a model.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::check::check_feasible;
use super::lp::{Lp, LpOutcome};
use crate::error::{Error, Result};
use crate::milp::{MilpModel, VarKind};

const BIG_M_LIMIT: f64 = 1e9;
const GAP_EPSILON: f64 = 1e-9;
const LP_ITERATION_LIMIT: u64 = 1_000_000;

/// Choice of branching variable among fractional binaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branching {
    /// Value closest to 0.5, ties by lowest variable id.
    #[default]
    MostFractional,
    /// Lowest variable id.
    FirstFractional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Wall-clock limit in seconds.
    pub time_limit: f64,
    /// Relative gap at which the search stops with `Optimal`.
    pub gap_tolerance: f64,
    pub branching: Branching,
    pub node_limit: Option<u64>,
    /// Accepted for interface compatibility; the search runs on one thread.
    pub workers: usize,
    /// Bound nodes with the linear relaxation. When false, nodes are bounded
    /// by the objective over fixed variables only.
    pub use_relaxation: bool,
    pub stop_at_first_feasible: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit: 600.0,
            gap_tolerance: 1e-7,
            branching: Branching::MostFractional,
            node_limit: None,
            workers: 1,
            use_relaxation: true,
            stop_at_first_feasible: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_limit > 0.0) {
            return Err(Error::Config("time limit must be positive".into()));
        }
        if !(self.gap_tolerance >= 0.0) {
            return Err(Error::Config("gap tolerance must be nonnegative".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// An incumbent exists but the search stopped before proving optimality.
    Feasible,
    Infeasible,
    /// Stopped by a limit without an incumbent, or by the time limit.
    TimeLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimeLimit => "time-limit",
        }
    }

    pub fn has_solution(self) -> bool {
        matches!(
            self,
            SolveStatus::Optimal | SolveStatus::Feasible | SolveStatus::TimeLimit
        )
    }
}

/// What happened to the model's warm start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarmStart {
    Absent,
    Accepted,
    /// Ignored; the message names the first violated requirement.
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Incumbent values indexed by variable id.
    pub values: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Proven lower bound on the optimal objective.
    pub bound: f64,
    pub gap: f64,
    /// Seconds.
    pub elapsed: f64,
    pub nodes: u64,
    pub lp_iterations: u64,
    pub warm_start: WarmStart,
}

impl SolveResult {
    /// Equality of everything except the elapsed time.
    pub fn same_outcome(&self, other: &SolveResult) -> bool {
        SolveResult {
            elapsed: 0.0,
            ..self.clone()
        } == SolveResult {
            elapsed: 0.0,
            ..other.clone()
        }
    }
}

pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    if objective.is_infinite() || bound.is_infinite() {
        return f64::INFINITY;
    }
    ((objective - bound).abs() / objective.abs().max(GAP_EPSILON)).max(0.0)
}

/// Rejects models whose coefficients are too large relative to their rows.
pub fn check_numerics(model: &MilpModel) -> Result<()> {
    for (r, c) in model.constraints.iter().enumerate() {
        let scale = c.rhs.abs().max(1.0);
        for &(v, a) in &c.terms {
            if !a.is_finite() || a.abs() > BIG_M_LIMIT * scale {
                return Err(Error::Numeric(format!(
                    "coefficient {a:e} of {} in {} exceeds {BIG_M_LIMIT:e} x max(|rhs|, 1)",
                    model.variables[v.0].name,
                    model.row_name(r)
                )));
            }
        }
        if c.rhs.is_nan() {
            return Err(Error::Numeric(format!(
                "{} has an undefined right-hand side",
                model.row_name(r)
            )));
        }
    }
    for v in &model.variables {
        if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
            return Err(Error::Numeric(format!("{} has empty bounds", v.name)));
        }
        if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
            return Err(Error::Numeric(format!(
                "binary {} has bounds outside [0, 1]",
                v.name
            )));
        }
    }
    for &(v, c) in &model.objective {
        if !c.is_finite() {
            return Err(Error::Numeric(format!(
                "objective coefficient of {} is not finite",
                model.variables[v.0].name
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Node {
    /// Complete list of branching fixings from the root.
    fixings: Vec<(usize, bool)>,
    /// Lower bound inherited from the parent.
    bound: f64,
}

struct Search<'a> {
    model: &'a MilpModel,
    config: &'a SolverConfig,
    lp: Lp,
    binaries: Vec<usize>,
    applied: Vec<(usize, bool)>,
    integral_objective: bool,
    incumbent: Option<(f64, Vec<f64>)>,
}

impl Search<'_> {
    /// Rounds a relaxation bound up when the objective only takes integer values.
    fn round_bound(&self, b: f64) -> f64 {
        if self.integral_objective && b.is_finite() {
            (b - 1e-6).ceil()
        } else {
            b
        }
    }

    /// Nodes whose bound reaches this value cannot improve the incumbent enough.
    fn prune_threshold(&self) -> f64 {
        match &self.incumbent {
            None => f64::INFINITY,
            Some((obj, _)) => {
                if self.integral_objective {
                    obj - 1.0 + 1e-6
                } else {
                    obj - (self.config.gap_tolerance * obj.abs().max(GAP_EPSILON)).max(1e-9)
                }
            }
        }
    }

    fn apply(&mut self, fixings: &[(usize, bool)]) {
        let common = self
            .applied
            .iter()
            .zip(fixings)
            .take_while(|(a, b)| a == b)
            .count();
        for &(j, _) in self.applied[common..].iter().rev() {
            let v = &self.model.variables[j];
            self.lp.set_bounds(j, v.lower, v.upper);
        }
        for &(j, up) in &fixings[common..] {
            let x = if up { 1.0 } else { 0.0 };
            self.lp.set_bounds(j, x, x);
        }
        self.applied = fixings.to_vec();
    }

    fn is_fixed(&self, j: usize) -> bool {
        let (l, u) = self.lp.bounds(j);
        l == u
    }

    /// Objective over fixed variables plus the best case of the others.
    fn combinatorial_bound(&self) -> f64 {
        self.model
            .objective
            .iter()
            .map(|&(v, c)| {
                let (l, u) = self.lp.bounds(v.0);
                (c * l).min(c * u)
            })
            .sum()
    }

    fn try_incumbent(&mut self, mut values: Vec<f64>) -> bool {
        for &j in &self.binaries {
            values[j] = values[j].round();
        }
        let obj = self.model.objective_value(&values);
        if self
            .incumbent
            .as_ref()
            .is_some_and(|(best, _)| obj >= *best)
        {
            return false;
        }
        match check_feasible(self.model, &values) {
            Ok(v) if v.is_empty() => {
                self.incumbent = Some((obj, values));
                true
            }
            _ => false,
        }
    }
}

/// Solves `model` to optimality or until a limit is reached.
pub fn solve(model: &MilpModel, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    check_numerics(model)?;
    let start = Instant::now();
    let binaries: Vec<usize> = (0..model.num_vars())
        .filter(|&j| model.variables[j].kind == VarKind::Binary)
        .collect();
    let integral_objective = model
        .objective
        .iter()
        .all(|&(v, c)| model.variables[v.0].kind == VarKind::Binary && c == c.round());
    let mut search = Search {
        model,
        config,
        lp: Lp::new(model),
        binaries,
        applied: Vec::new(),
        integral_objective,
        incumbent: None,
    };

    let warm_start = match &model.warm_start {
        None => WarmStart::Absent,
        Some(ws) => match check_feasible(model, ws) {
            Ok(v) if v.is_empty() => {
                search.try_incumbent(ws.clone());
                WarmStart::Accepted
            }
            Ok(v) => WarmStart::Rejected(format!("{} violated by {:.3e}", v[0].name, v[0].excess)),
            Err(e) => WarmStart::Rejected(e.to_string()),
        },
    };

    let mut stack = vec![Node {
        fixings: Vec::new(),
        bound: f64::NEG_INFINITY,
    }];
    let mut nodes = 0u64;
    // Bound of subtrees abandoned for numerical reasons.
    let mut lost_bound = f64::INFINITY;
    let mut stopped_by: Option<SolveStatus> = None;

    while let Some(node) = stack.pop() {
        if node.bound >= search.prune_threshold() {
            continue;
        }
        if start.elapsed().as_secs_f64() >= config.time_limit {
            stack.push(node);
            stopped_by = Some(SolveStatus::TimeLimit);
            break;
        }
        if config.node_limit.is_some_and(|l| nodes >= l)
            || (config.stop_at_first_feasible && search.incumbent.is_some())
        {
            stack.push(node);
            stopped_by = Some(SolveStatus::Feasible);
            break;
        }
        nodes += 1;
        search.apply(&node.fixings);

        let unfixed = search
            .binaries
            .iter()
            .copied()
            .find(|&j| !search.is_fixed(j));
        let relax = config.use_relaxation || unfixed.is_none();
        let (node_bound, branch_on) = if relax {
            let cutoff = search.prune_threshold();
            match search.lp.solve(cutoff, LP_ITERATION_LIMIT) {
                LpOutcome::Infeasible | LpOutcome::Cutoff => continue,
                LpOutcome::IterationLimit => {
                    lost_bound = lost_bound.min(node.bound);
                    continue;
                }
                LpOutcome::Unbounded => {
                    return Err(Error::Numeric("linear relaxation is unbounded".into()));
                }
                LpOutcome::Optimal => {}
            }
            let z = search.round_bound(search.lp.objective()).max(node.bound);
            if z >= search.prune_threshold() {
                continue;
            }
            let x = search.lp.values();
            let tol = model.tolerances.integrality;
            let mut pick: Option<(f64, usize)> = None;
            for &j in &search.binaries {
                let f = (x[j] - x[j].round()).abs();
                if f <= tol {
                    continue;
                }
                let score = match config.branching {
                    Branching::MostFractional => f,
                    Branching::FirstFractional => 1.0,
                };
                if pick.is_none_or(|(s, _)| score > s) {
                    pick = Some((score, j));
                }
            }
            match pick {
                None => {
                    let values = x.to_vec();
                    if !search.try_incumbent(values) {
                        // Rounding broke feasibility; the subtree cannot be trusted as exhausted.
                        lost_bound = lost_bound.min(z);
                    }
                    continue;
                }
                Some((_, j)) => (z, (j, x[j] >= 0.5)),
            }
        } else {
            let z = search
                .round_bound(search.combinatorial_bound())
                .max(node.bound);
            if z >= search.prune_threshold() {
                continue;
            }
            (z, (unfixed.expect("checked above"), false))
        };

        let (j, up_first) = branch_on;
        let mut second = node.fixings.clone();
        second.push((j, !up_first));
        let mut first = node.fixings;
        first.push((j, up_first));
        stack.push(Node {
            fixings: second,
            bound: node_bound,
        });
        stack.push(Node {
            fixings: first,
            bound: node_bound,
        });
    }

    let open_bound = stack.iter().map(|n| n.bound).fold(lost_bound, f64::min);
    let (objective, values) = match search.incumbent {
        Some((o, v)) => (Some(o), Some(v)),
        None => (None, None),
    };
    let inc = objective.unwrap_or(f64::INFINITY);
    let mut bound = open_bound.min(inc);
    if search.integral_objective && bound.is_finite() {
        bound = (bound - 1e-6).ceil().min(inc);
    }
    let gap = relative_gap(inc, bound);
    let exhausted = stack.is_empty() && lost_bound == f64::INFINITY;
    let status = if objective.is_some() && (exhausted || gap <= config.gap_tolerance) {
        SolveStatus::Optimal
    } else if exhausted {
        SolveStatus::Infeasible
    } else if let Some(s) = stopped_by {
        if objective.is_some() {
            s
        } else {
            SolveStatus::TimeLimit
        }
    } else if objective.is_some() {
        SolveStatus::Feasible
    } else {
        SolveStatus::TimeLimit
    };
    let bound = if status == SolveStatus::Infeasible {
        f64::INFINITY
    } else {
        bound
    };
    Ok(SolveResult {
        status,
        values,
        objective,
        bound,
        gap: if status == SolveStatus::Optimal {
            gap.min(config.gap_tolerance)
        } else {
            gap
        },
        elapsed: start.elapsed().as_secs_f64(),
        nodes,
        lp_iterations: search.lp.iterations,
        warm_start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Family, Sense};

    fn knapsack() -> MilpModel {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 4 -> a = c = 1, value 8
        let mut m = MilpModel::new();
        let v: Vec<_> = ["a", "b", "c"]
            .iter()
            .map(|n| m.add_variable(n.to_string(), VarKind::Binary, 0.0, 1.0, None))
            .collect();
        m.add_constraint(
            vec![(v[0], 2.0), (v[1], 3.0), (v[2], 1.0)],
            Sense::Le,
            4.0,
            Family::External,
        );
        m.set_objective(vec![(v[0], -5.0), (v[1], -4.0), (v[2], -3.0)]);
        m
    }

    #[test]
    fn solves_small_knapsack() {
        let r = solve(&knapsack(), &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, Some(-8.0));
        assert_eq!(r.values.unwrap(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn enumeration_without_relaxation_agrees() {
        let cfg = SolverConfig {
            use_relaxation: false,
            ..SolverConfig::default()
        };
        let r = solve(&knapsack(), &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, Some(-8.0));
    }

    #[test]
    fn contradictory_fixings_are_infeasible() {
        let mut m = MilpModel::new();
        let x = m.add_variable("x".into(), VarKind::Binary, 0.0, 1.0, None);
        m.add_constraint(vec![(x, 1.0)], Sense::Eq, 1.0, Family::External);
        m.add_constraint(vec![(x, 1.0)], Sense::Eq, 0.0, Family::External);
        let r = solve(&m, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.values.is_none());
    }

    #[test]
    fn warm_start_is_checked() {
        let mut m = knapsack();
        m.warm_start = Some(vec![1.0, 1.0, 0.0]);
        let r = solve(&m, &SolverConfig::default()).unwrap();
        assert!(matches!(r.warm_start, WarmStart::Rejected(_)));
        m.warm_start = Some(vec![0.0, 1.0, 1.0]);
        let r = solve(&m, &SolverConfig::default()).unwrap();
        assert_eq!(r.warm_start, WarmStart::Accepted);
        assert_eq!(r.objective, Some(-8.0));
    }

    #[test]
    fn rejects_huge_coefficients() {
        let mut m = MilpModel::new();
        let x = m.add_variable("x".into(), VarKind::Binary, 0.0, 1.0, None);
        m.add_constraint(vec![(x, 1e12)], Sense::Le, 5.0, Family::External);
        assert!(matches!(
            solve(&m, &SolverConfig::default()),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn node_limit_without_incumbent() {
        let cfg = SolverConfig {
            node_limit: Some(0),
            ..SolverConfig::default()
        };
        let r = solve(&knapsack(), &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::TimeLimit);
        assert_eq!(r.nodes, 0);
    }

    #[test]
    fn gap_definition() {
        assert_eq!(relative_gap(10.0, 8.0), 0.2);
        assert_eq!(relative_gap(0.0, 0.0), 0.0);
        assert!(relative_gap(f64::INFINITY, 1.0).is_infinite());
    }
}
