//! Conversion between variable vectors of a built model and [`Solution`]s.

use std::collections::{BTreeMap, BTreeSet};

use super::model::{MilpModel, VarTag};
use super::variant::VariantSpec;
use crate::error::{Error, Result};
use crate::instance::{DemandId, Instance, NodeId, VnfId};
use crate::validate::{evaluate, CopyRef, Solution};

/// Reads paths, open copies and assignments off a (near-)integral vector.
pub fn decode(instance: &Instance, model: &MilpModel, values: &[f64]) -> Result<Solution> {
    if values.len() != model.num_vars() {
        return Err(Error::Numeric(format!(
            "{} values for {} variables",
            values.len(),
            model.num_vars()
        )));
    }
    let topo = &instance.topology;
    let mut next: Vec<BTreeMap<NodeId, Vec<NodeId>>> =
        vec![BTreeMap::new(); instance.demands.len()];
    let mut sol = Solution {
        paths: Vec::new(),
        open: BTreeSet::new(),
        assignment: vec![BTreeMap::new(); instance.demands.len()],
    };
    for (v, &x) in model.variables.iter().zip(values) {
        if x <= 0.5 {
            continue;
        }
        match v.tag {
            Some(VarTag::Route { demand, arc }) => {
                let a = topo.arc(arc);
                next[demand.0].entry(a.from).or_default().push(a.to);
            }
            Some(VarTag::Open { node, vnf, copy }) => {
                sol.open.insert(CopyRef { node, vnf, copy });
            }
            Some(VarTag::Use {
                demand,
                node,
                vnf,
                copy,
            }) => {
                sol.assignment[demand.0].insert(vnf, CopyRef { node, vnf, copy });
            }
            _ => {}
        }
    }
    for (k, d) in instance.demands.iter().enumerate() {
        let mut path = vec![d.origin];
        let mut at = d.origin;
        while at != d.destination {
            let succ = next[k].get(&at).map(Vec::as_slice).unwrap_or(&[]);
            let [n] = succ else {
                return Err(Error::Numeric(format!(
                    "routing values of {} do not form a path at {}",
                    d.name,
                    topo.node(at).name
                )));
            };
            if path.contains(n) || path.len() > topo.nodes().len() {
                return Err(Error::Numeric(format!(
                    "routing values of {} contain a cycle",
                    d.name
                )));
            }
            path.push(*n);
            at = *n;
        }
        sol.paths.push(path);
    }
    Ok(sol)
}

/// Renumbers the copies of each `(node, vnf)` to `0..m`, keeping their order.
pub fn normalize_copies(solution: &Solution) -> Solution {
    let mut renumber: BTreeMap<CopyRef, CopyRef> = BTreeMap::new();
    let mut count: BTreeMap<(NodeId, VnfId), u32> = BTreeMap::new();
    for c in &solution.open {
        let n = count.entry((c.node, c.vnf)).or_default();
        renumber.insert(*c, CopyRef { copy: *n, ..*c });
        *n += 1;
    }
    Solution {
        paths: solution.paths.clone(),
        open: renumber.values().copied().collect(),
        assignment: solution
            .assignment
            .iter()
            .map(|a| {
                a.iter()
                    .map(|(f, c)| (*f, renumber.get(c).copied().unwrap_or(*c)))
                    .collect()
            })
            .collect(),
    }
}

/// The variable vector representing `solution` in `model`.
///
/// Copies are renumbered first so that symmetry breaking holds. Auxiliary
/// variables (positions, utilization, latencies, flows) get their tightest
/// consistent values. Fails when the solution refers to a variable the model
/// does not have, e.g. a copy beyond the node's limit.
pub fn encode(
    instance: &Instance,
    spec: &VariantSpec,
    model: &MilpModel,
    solution: &Solution,
) -> Result<Vec<f64>> {
    let sol = normalize_copies(solution);
    if sol.paths.len() != instance.demands.len() || sol.assignment.len() != instance.demands.len() {
        return Err(Error::Numeric(
            "solution does not cover every demand".into(),
        ));
    }
    let topo = &instance.topology;
    let mut values = vec![0.0; model.num_vars()];
    let mut set = |tag: VarTag, x: f64| -> Result<()> {
        let v = model
            .var(tag)
            .ok_or_else(|| Error::Numeric(format!("model has no variable {}", tag.name())))?;
        values[v.0] = x;
        Ok(())
    };
    for (k, path) in sol.paths.iter().enumerate() {
        let demand = DemandId(k);
        for w in path.windows(2) {
            let arc = topo.find_arc(w[0], w[1]).ok_or_else(|| {
                Error::Numeric(format!(
                    "no arc between consecutive path nodes of demand {k}"
                ))
            })?;
            set(VarTag::Route { demand, arc }, 1.0)?;
        }
        for (p, &node) in path.iter().enumerate() {
            set(VarTag::Position { demand, node }, p as f64)?;
        }
    }
    for c in &sol.open {
        set(
            VarTag::Open {
                node: c.node,
                vnf: c.vnf,
                copy: c.copy,
            },
            1.0,
        )?;
    }
    let eval = evaluate(instance, spec, &sol);
    let cd = spec.variant.has_compression();
    for (k, asg) in sol.assignment.iter().enumerate() {
        let demand = DemandId(k);
        let path = &sol.paths[k];
        for (&f, c) in asg {
            set(
                VarTag::Use {
                    demand,
                    node: c.node,
                    vnf: f,
                    copy: c.copy,
                },
                1.0,
            )?;
            set(
                VarTag::Serve {
                    demand,
                    node: c.node,
                    vnf: f,
                },
                1.0,
            )?;
            if spec.variant.has_latency() {
                let l = eval.copy_latency.get(c).copied().unwrap_or(0.0).max(0.0);
                set(
                    VarTag::VnfLatency {
                        demand,
                        node: c.node,
                        vnf: f,
                    },
                    l,
                )?;
            }
            if cd {
                let pos = path.iter().position(|&n| n == c.node);
                let inflow = match pos {
                    Some(p) if p > 0 => {
                        let a = topo.find_arc(path[p - 1], c.node).expect("checked above");
                        eval.arc_rates[k].get(&a).copied().unwrap_or(0.0)
                    }
                    _ => 0.0,
                };
                set(
                    VarTag::CopyFlow {
                        demand,
                        node: c.node,
                        vnf: f,
                        copy: c.copy,
                    },
                    inflow,
                )?;
            }
        }
        if cd {
            for (&arc, &rate) in &eval.arc_rates[k] {
                set(VarTag::Flow { demand, arc }, rate)?;
            }
        }
    }
    set(VarTag::MaxUtilization, eval.max_utilization)?;
    if !spec.extensions.rules.is_empty() {
        for (node, vnf) in sol.presence() {
            set(VarTag::Presence { node, vnf }, 1.0)?;
        }
    }
    Ok(values)
}
