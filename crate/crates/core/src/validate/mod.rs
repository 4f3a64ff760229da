//! Solution representation and an independent feasibility checker.
//!
//! The checker works on paths and copy assignments only, never on MILP
//! variables, so it can audit any solver's output and serve as a test oracle.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::instance::{ArcId, Instance, LatencyProfile, NodeId, VnfId};
use crate::milp::{Objective, PlacementRule, VariantSpec};

/// One copy of a VNF type on a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CopyRef {
    pub node: NodeId,
    pub vnf: VnfId,
    pub copy: u32,
}

/// Routing and placement decisions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Node sequence of each demand's path, origin first.
    pub paths: Vec<Vec<NodeId>>,
    /// Instantiated copies.
    pub open: BTreeSet<CopyRef>,
    /// For each demand, the copy serving each requested type.
    pub assignment: Vec<BTreeMap<VnfId, CopyRef>>,
}

impl Solution {
    /// Distinct `(node, vnf)` pairs with at least one open copy.
    pub fn presence(&self) -> BTreeSet<(NodeId, VnfId)> {
        self.open.iter().map(|c| (c.node, c.vnf)).collect()
    }

    pub fn nfv_cost(&self, instance: &Instance) -> f64 {
        self.open.iter().map(|c| instance.cost_of(c.vnf)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Role of the violated condition, e.g. `node-capacity`.
    pub constraint: String,
    pub subject: String,
    /// How far the condition is from holding (1 for logical conditions).
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
    pub max_utilization: f64,
    pub nfv_cost: f64,
    pub open_copies: usize,
    /// End-to-end latency per demand (arc latencies only for variants without VNF latency).
    pub latencies: Vec<f64>,
}

/// Quantities derived from a structurally sound solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Bit-rate of each demand on each arc it uses.
    pub arc_rates: Vec<BTreeMap<ArcId, f64>>,
    pub arc_load: Vec<f64>,
    pub max_utilization: f64,
    /// Aggregate traffic entering each used copy.
    pub copy_load: BTreeMap<CopyRef, f64>,
    /// Latency of each copy at its load.
    pub copy_latency: BTreeMap<CopyRef, f64>,
    pub latencies: Vec<f64>,
}

/// Relative tolerance of all comparisons.
pub const TOLERANCE: f64 = 1e-6;

fn excess_le(lhs: f64, rhs: f64) -> Option<f64> {
    let gap = lhs - rhs;
    (gap > TOLERANCE * rhs.abs().max(1.0)).then_some(gap)
}

struct Checker<'a> {
    inst: &'a Instance,
    violations: Vec<Violation>,
}

impl Checker<'_> {
    fn flag(&mut self, constraint: &str, subject: impl Into<String>, excess: f64) {
        self.violations.push(Violation {
            constraint: constraint.to_string(),
            subject: subject.into(),
            excess,
        });
    }

    fn node(&self, i: NodeId) -> &str {
        &self.inst.topology.node(i).name
    }

    fn vnf(&self, f: VnfId) -> &str {
        &self.inst.vnf(f).name
    }

    fn copy(&self, c: &CopyRef) -> String {
        format!("{}#{} on {}", self.vnf(c.vnf), c.copy, self.node(c.node))
    }
}

/// Checks `solution` against every condition of `spec` and computes its objectives.
pub fn validate(instance: &Instance, spec: &VariantSpec, solution: &Solution) -> ValidationReport {
    let mut ck = Checker {
        inst: instance,
        violations: Vec::new(),
    };
    let structural_ok = check_structure(&mut ck, solution);
    let mut report = ValidationReport {
        feasible: false,
        violations: Vec::new(),
        max_utilization: f64::NAN,
        nfv_cost: solution.nfv_cost(instance),
        open_copies: solution.open.len(),
        latencies: Vec::new(),
    };
    if structural_ok {
        check_placement(&mut ck, spec, solution);
        let eval = evaluate(instance, spec, solution);
        check_resources(&mut ck, spec, solution, &eval);
        report.max_utilization = eval.max_utilization;
        report.latencies = eval.latencies;
    }
    report.violations = ck.violations;
    report.feasible = report.violations.is_empty();
    report
}

/// Route shape and assignment completeness. Later checks rely on these.
fn check_structure(ck: &mut Checker, sol: &Solution) -> bool {
    let inst = ck.inst;
    let topo = &inst.topology;
    let before = ck.violations.len();
    if sol.paths.len() != inst.demands.len() || sol.assignment.len() != inst.demands.len() {
        ck.flag(
            "shape",
            format!(
                "{} paths and {} assignments for {} demands",
                sol.paths.len(),
                sol.assignment.len(),
                inst.demands.len()
            ),
            1.0,
        );
        return false;
    }
    for c in &sol.open {
        if c.node.0 >= topo.nodes().len() || c.vnf.0 >= inst.vnfs.len() {
            ck.flag("copy-limit", format!("{c:?}"), 1.0);
            return false;
        }
        let limit = inst.max_copies(c.node, c.vnf);
        if c.copy >= limit {
            let s = ck.copy(c);
            ck.flag("copy-limit", s, (c.copy + 1 - limit) as f64);
        }
    }
    for (k, d) in inst.demands.iter().enumerate() {
        let path = &sol.paths[k];
        if path.first() != Some(&d.origin) || path.last() != Some(&d.destination) {
            ck.flag(
                "route",
                format!("{}: path does not join its endpoints", d.name),
                1.0,
            );
            continue;
        }
        if path.iter().any(|n| n.0 >= topo.nodes().len()) {
            ck.flag("route", format!("{}: unknown node", d.name), 1.0);
            continue;
        }
        let distinct: BTreeSet<_> = path.iter().collect();
        if distinct.len() != path.len() {
            ck.flag("route", format!("{}: path revisits a node", d.name), 1.0);
        }
        for w in path.windows(2) {
            if topo.find_arc(w[0], w[1]).is_none() {
                let s = format!("{}: no arc {} -> {}", d.name, ck.node(w[0]), ck.node(w[1]));
                ck.flag("route", s, 1.0);
            }
        }
        let asg = &sol.assignment[k];
        for &f in &d.chain {
            match asg.get(&f) {
                None => {
                    let s = format!("{}: {} not assigned", d.name, ck.vnf(f));
                    ck.flag("assign-once", s, 1.0);
                }
                Some(c) if c.vnf != f => {
                    let s = format!(
                        "{}: {} served by a {} copy",
                        d.name,
                        ck.vnf(f),
                        ck.vnf(c.vnf)
                    );
                    ck.flag("assign-once", s, 1.0);
                }
                Some(_) => {}
            }
        }
        for f in asg.keys() {
            if !d.requests(*f) {
                let s = format!("{}: {} assigned but not requested", d.name, f);
                ck.flag("assign-once", s, 1.0);
            }
        }
    }
    ck.violations.len() == before
}

fn check_placement(ck: &mut Checker, spec: &VariantSpec, sol: &Solution) {
    let inst = ck.inst;
    let cd = spec.variant.has_compression();
    for (k, d) in inst.demands.iter().enumerate() {
        let path = &sol.paths[k];
        let position: BTreeMap<NodeId, usize> =
            path.iter().enumerate().map(|(p, &n)| (n, p)).collect();
        let asg = &sol.assignment[k];
        for (&f, c) in asg {
            if !sol.open.contains(c) {
                let s = format!("{}: {} is not open", d.name, ck.copy(c));
                ck.flag("copy-open", s, 1.0);
            }
            // A VNF is applied on a node the path enters, so never on the origin.
            match position.get(&c.node) {
                Some(&p) if p > 0 => {}
                _ => {
                    let s = format!("{}: {} is not on the path", d.name, ck.vnf(f));
                    ck.flag("on-path", s, 1.0);
                }
            }
        }
        for (f1, f2) in d.precedences() {
            let (Some(c1), Some(c2)) = (asg.get(&f1), asg.get(&f2)) else {
                continue;
            };
            let (Some(p1), Some(p2)) = (position.get(&c1.node), position.get(&c2.node)) else {
                continue;
            };
            if p1 > p2 {
                let s = format!("{}: {} after {}", d.name, ck.vnf(f1), ck.vnf(f2));
                ck.flag("chain-order", s, (p1 - p2) as f64);
            }
        }
        if cd {
            let mut changing: BTreeMap<NodeId, usize> = BTreeMap::new();
            for (&f, c) in asg {
                if inst.vnf(f).compression != 1.0 {
                    *changing.entry(c.node).or_default() += 1;
                }
            }
            for (n, count) in changing {
                if count > 1 {
                    let s = format!(
                        "{}: {count} bit-rate changing VNFs on {}",
                        d.name,
                        ck.node(n)
                    );
                    ck.flag("one-compression", s, (count - 1) as f64);
                }
            }
        }
    }
    let presence = sol.presence();
    let nfvi: Vec<NodeId> = inst.topology.nfvi_nodes().collect();
    let present = |i: NodeId, f: VnfId| presence.contains(&(i, f));
    for rule in &spec.extensions.rules {
        match rule {
            PlacementRule::Together { a, b } => {
                for &i in &nfvi {
                    if present(i, *a) != present(i, *b) {
                        let s = format!("{} and {} on {}", ck.vnf(*a), ck.vnf(*b), ck.node(i));
                        ck.flag("affinity", s, 1.0);
                    }
                }
            }
            PlacementRule::Apart { a, b } => {
                for &i in &nfvi {
                    if present(i, *a) && present(i, *b) {
                        let s = format!("{} and {} on {}", ck.vnf(*a), ck.vnf(*b), ck.node(i));
                        ck.flag("anti-affinity", s, 1.0);
                    }
                }
            }
            PlacementRule::Pin { vnf, node } => {
                if !present(*node, *vnf) {
                    let s = format!("{} missing on {}", ck.vnf(*vnf), ck.node(*node));
                    ck.flag("pin", s, 1.0);
                }
            }
            PlacementRule::PinAny { vnf, nodes } => {
                let hits = nodes.iter().filter(|&&i| present(i, *vnf)).count();
                if hits != 1 {
                    let s = format!("{} on {hits} of the allowed nodes", ck.vnf(*vnf));
                    ck.flag("pin", s, (hits as f64 - 1.0).abs());
                }
            }
            PlacementRule::Forbid { vnf, node } => {
                if present(*node, *vnf) {
                    let s = format!("{} on {}", ck.vnf(*vnf), ck.node(*node));
                    ck.flag("forbid", s, 1.0);
                }
            }
            PlacementRule::Spread { vnf, min_nodes } => {
                let hits = nfvi.iter().filter(|&&i| present(i, *vnf)).count();
                if hits < *min_nodes as usize {
                    let s = format!("{} on {hits} nodes", ck.vnf(*vnf));
                    ck.flag("spread", s, (*min_nodes as usize - hits) as f64);
                }
            }
        }
    }
    for &(k1, k2) in &spec.extensions.isolation {
        let (Some(a1), Some(a2)) = (sol.assignment.get(k1.0), sol.assignment.get(k2.0)) else {
            continue;
        };
        for (f, c) in a1 {
            if a2.get(f) == Some(c) {
                let s = format!(
                    "{} and {} share {}",
                    inst.demand(k1).name,
                    inst.demand(k2).name,
                    ck.copy(c)
                );
                ck.flag("isolation", s, 1.0);
            }
        }
    }
    if let Objective::CopyCountCap { cap } = spec.objective {
        if sol.open.len() > cap as usize {
            ck.flag(
                "copy-count",
                format!("{} copies open", sol.open.len()),
                (sol.open.len() - cap as usize) as f64,
            );
        }
    }
}

/// Rates, loads and latencies of a structurally sound solution.
///
/// Without compression every arc carries the nominal bandwidth. With it, the
/// rate entering a node is scaled by the factors of all VNFs applied there
/// before it leaves; each copy sees the rate entering its node.
pub fn evaluate(instance: &Instance, spec: &VariantSpec, sol: &Solution) -> Evaluation {
    let topo = &instance.topology;
    let cd = spec.variant.has_compression();
    let mut arc_rates = Vec::with_capacity(instance.demands.len());
    let mut arc_load = vec![0.0; topo.arcs().len()];
    let mut copy_load: BTreeMap<CopyRef, f64> = BTreeMap::new();
    for (k, d) in instance.demands.iter().enumerate() {
        let path = &sol.paths[k];
        let asg = &sol.assignment[k];
        let mut factor_at: BTreeMap<NodeId, f64> = BTreeMap::new();
        for (&f, c) in asg {
            *factor_at.entry(c.node).or_insert(1.0) *= instance.vnf(f).compression;
        }
        let mut entry_rate: BTreeMap<NodeId, f64> = BTreeMap::new();
        let mut rates = BTreeMap::new();
        let mut rate = d.bandwidth;
        for (p, &n) in path.iter().enumerate() {
            entry_rate.insert(n, rate);
            if cd {
                rate *= factor_at.get(&n).copied().unwrap_or(1.0);
            }
            if let Some(&next) = path.get(p + 1) {
                if let Some(a) = topo.find_arc(n, next) {
                    rates.insert(a, rate);
                    arc_load[a.0] += rate;
                }
            }
        }
        for c in asg.values() {
            let load = if cd {
                entry_rate.get(&c.node).copied().unwrap_or(d.bandwidth)
            } else {
                d.bandwidth
            };
            *copy_load.entry(*c).or_default() += load;
        }
        arc_rates.push(rates);
    }
    let max_utilization = topo
        .arc_ids()
        .map(|a| arc_load[a.0] / topo.arc(a).capacity)
        .fold(0.0, f64::max);
    let copy_latency: BTreeMap<CopyRef, f64> = copy_load
        .iter()
        .map(|(c, &load)| (*c, instance.vnf(c.vnf).latency.latency_at(load)))
        .collect();
    let latencies = instance
        .demands
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let arcs: f64 = arc_rates[k].keys().map(|&a| topo.arc(a).latency).sum();
            let vnfs: f64 = if spec.variant.has_latency() {
                sol.assignment[k].values().map(|c| copy_latency[c]).sum()
            } else {
                0.0
            };
            arcs + vnfs
        })
        .collect();
    Evaluation {
        arc_rates,
        arc_load,
        max_utilization,
        copy_load,
        copy_latency,
        latencies,
    }
}

fn check_resources(ck: &mut Checker, spec: &VariantSpec, sol: &Solution, eval: &Evaluation) {
    let inst = ck.inst;
    let topo = &inst.topology;
    for i in topo.nfvi_nodes() {
        let through: f64 = if spec.extensions.core_router {
            eval.arc_rates
                .iter()
                .flat_map(|r| r.iter())
                .filter(|(&a, _)| topo.arc(a).from == i || topo.arc(a).to == i)
                .map(|(_, &rate)| rate)
                .sum()
        } else {
            0.0
        };
        for (r, res) in topo.resources().iter().enumerate() {
            let used: f64 = sol
                .open
                .iter()
                .filter(|c| c.node == i)
                .map(|c| inst.vnf(c.vnf).resources[r])
                .sum::<f64>()
                + through;
            if let Some(e) = excess_le(used, topo.capacity(i, r)) {
                let s = format!("{res} on {}", ck.node(i));
                ck.flag("node-capacity", s, e);
            }
        }
    }
    for c in &sol.open {
        if !topo.node(c.node).is_nfvi() {
            let s = ck.copy(c);
            ck.flag("node-capacity", s, 1.0);
        }
    }
    if let Objective::NfvWithUtilizationCap { u_star, alpha } = spec.objective {
        if let Some(e) = excess_le(eval.max_utilization, u_star + alpha) {
            ck.flag(
                "utilization-cap",
                format!("U = {}", eval.max_utilization),
                e,
            );
        }
    }
    if spec.variant.has_latency() {
        for (c, &load) in &eval.copy_load {
            if let LatencyProfile::Fastpath { max_bandwidth, .. } = inst.vnf(c.vnf).latency {
                if let Some(e) = excess_le(load, max_bandwidth) {
                    let s = ck.copy(c);
                    ck.flag("copy-bandwidth", s, e);
                }
            }
        }
        for (k, d) in inst.demands.iter().enumerate() {
            if let Some(e) = excess_le(eval.latencies[k], d.latency_bound) {
                ck.flag("latency-budget", d.name.clone(), e);
            }
        }
    }
}
