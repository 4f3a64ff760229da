//! Random desk-scale instances and an exhaustive-enumeration oracle.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vnfpr::instance::{
    extend_graph, ChainOrder, CopyLimit, Demand, Instance, LatencyPiece, LatencyProfile, Link,
    Node, NodeId, Options, Regime, Tier, Topology, VnfId, VnfType,
};
use vnfpr::milp::{Objective, VariantSpec};
use vnfpr::validate::{validate, CopyRef, Solution, ValidationReport};

/// Largest number of joint routings the oracle is willing to enumerate.
pub const ORACLE_LIMIT: usize = 20_000;

/// A random instance with at most 6 nodes, 3 demands and 2 VNF types, one copy
/// per (node, type), and small integer data. Compression factors are drawn from
/// {1/2, 1, 2} when `compression` is set and are 1 otherwise.
pub fn random_instance(rng: &mut ChaCha8Rng, regime: Regime, compression: bool) -> Instance {
    loop {
        if let Some(inst) = try_instance(rng, regime, compression) {
            return inst;
        }
    }
}

fn try_instance(rng: &mut ChaCha8Rng, regime: Regime, compression: bool) -> Option<Instance> {
    let n = rng.gen_range(3..=6);
    let nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            name: format!("n{i}"),
            tier: Tier::Edge,
            capacity: rng.gen_bool(0.8).then(|| vec![rng.gen_range(2..=4) as f64]),
            twin_of: None,
        })
        .collect();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 1..n {
        edges.insert((rng.gen_range(0..i), i));
    }
    for _ in 0..rng.gen_range(0..=2) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let mut arcs = Vec::new();
    for &(a, b) in &edges {
        let capacity = rng.gen_range(2..=6) as f64;
        let latency = rng.gen_range(1..=2) as f64;
        arcs.push(Link {
            from: NodeId(a),
            to: NodeId(b),
            capacity,
            latency,
        });
        arcs.push(Link {
            from: NodeId(b),
            to: NodeId(a),
            capacity,
            latency,
        });
    }
    let topo = Topology::new(vec!["cpu".into()], nodes, arcs).ok()?;

    let vnf_count = rng.gen_range(1..=2);
    let vnfs: Vec<VnfType> = (0..vnf_count)
        .map(|f| VnfType {
            name: format!("f{f}"),
            compression: if compression {
                [0.5, 1.0, 2.0][rng.gen_range(0..3)]
            } else {
                1.0
            },
            resources: vec![rng.gen_range(1..=2) as f64],
            latency: match regime {
                Regime::Standard => LatencyProfile::Standard {
                    pieces: vec![
                        LatencyPiece {
                            slope: 0.0,
                            intercept: 1.0,
                        },
                        LatencyPiece {
                            slope: 1.0,
                            intercept: -(rng.gen_range(1..=3) as f64),
                        },
                    ],
                },
                Regime::Fastpath => LatencyProfile::Fastpath {
                    latency: 1.0,
                    max_bandwidth: rng.gen_range(3..=6) as f64,
                },
            },
            copies: CopyLimit::Uniform(1),
        })
        .collect();

    let demands: Vec<Demand> = (0..rng.gen_range(1..=3))
        .map(|k| {
            let origin = rng.gen_range(0..n);
            let mut destination = rng.gen_range(0..n - 1);
            if destination >= origin {
                destination += 1;
            }
            let mut chain: Vec<VnfId> = (0..vnf_count)
                .map(VnfId)
                .filter(|_| rng.gen_bool(0.7))
                .collect();
            chain.shuffle(rng);
            let order = if chain.len() == 2 && rng.gen_bool(0.3) {
                ChainOrder::Partial(Vec::new())
            } else {
                ChainOrder::Total
            };
            Demand {
                name: format!("d{k}"),
                origin: NodeId(origin),
                destination: NodeId(destination),
                bandwidth: rng.gen_range(1..=3) as f64,
                chain,
                order,
                latency_bound: rng.gen_range(4..=12) as f64,
            }
        })
        .collect();
    let inst = Instance::new(topo, vnfs, demands, Options { cost_resource: 0 }).ok()?;
    let inst = if compression {
        extend_graph(&inst)
    } else {
        inst
    };
    (joint_size(&inst)? <= ORACLE_LIMIT).then_some(inst)
}

/// Every simple path from `from` to `to`.
pub fn simple_paths(inst: &Instance, from: NodeId, to: NodeId) -> Vec<Vec<NodeId>> {
    fn walk(inst: &Instance, to: NodeId, path: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        let last = *path.last().expect("nonempty path");
        if last == to {
            out.push(path.clone());
            return;
        }
        let topo = &inst.topology;
        for &a in topo.outgoing(last) {
            let next = topo.arc(a).to;
            if !path.contains(&next) {
                path.push(next);
                walk(inst, to, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(inst, to, &mut vec![from], &mut out);
    out
}

/// Every routing of demand `k`: a simple path plus, for each requested VNF, a
/// copy on a node past the origin that respects the chain order.
pub fn routings(inst: &Instance, k: usize) -> Vec<(Vec<NodeId>, BTreeMap<VnfId, CopyRef>)> {
    let d = &inst.demands[k];
    let precedences = d.precedences();
    let mut out = Vec::new();
    for path in simple_paths(inst, d.origin, d.destination) {
        place(
            inst,
            &d.chain,
            &path,
            &precedences,
            &mut Vec::new(),
            &mut out,
        );
    }
    out
}

fn place(
    inst: &Instance,
    chain: &[VnfId],
    path: &[NodeId],
    precedences: &[(VnfId, VnfId)],
    positions: &mut Vec<usize>,
    out: &mut Vec<(Vec<NodeId>, BTreeMap<VnfId, CopyRef>)>,
) {
    if positions.len() == chain.len() {
        let pos: BTreeMap<VnfId, usize> = chain
            .iter()
            .copied()
            .zip(positions.iter().copied())
            .collect();
        if precedences.iter().all(|(a, b)| pos[a] <= pos[b]) {
            let asg = pos
                .iter()
                .map(|(&f, &p)| {
                    (
                        f,
                        CopyRef {
                            node: path[p],
                            vnf: f,
                            copy: 0,
                        },
                    )
                })
                .collect();
            out.push((path.to_vec(), asg));
        }
        return;
    }
    let f = chain[positions.len()];
    for p in 1..path.len() {
        if inst.max_copies(path[p], f) > 0 {
            positions.push(p);
            place(inst, chain, path, precedences, positions, out);
            positions.pop();
        }
    }
}

fn joint_size(inst: &Instance) -> Option<usize> {
    let mut total: usize = 1;
    for k in 0..inst.demands.len() {
        total = total.checked_mul(routings(inst, k).len())?;
        if total > ORACLE_LIMIT {
            return None;
        }
    }
    Some(total)
}

/// Best objective over every validator-feasible joint routing, or `None` when
/// no routing is feasible. Copies are opened exactly where they are used.
pub fn oracle(inst: &Instance, spec: &VariantSpec) -> Option<f64> {
    best_by(inst, spec, |report, _| match spec.objective {
        Objective::Te => report.max_utilization,
        _ => report.nfv_cost,
    })
}

/// Fewest open copies over every validator-feasible joint routing.
pub fn min_copies(inst: &Instance, spec: &VariantSpec) -> Option<u32> {
    best_by(inst, spec, |_, sol| sol.open.len() as f64).map(|c| c as u32)
}

/// Minimum of `score` over every validator-feasible joint routing.
pub fn best_by(
    inst: &Instance,
    spec: &VariantSpec,
    score: impl Fn(&ValidationReport, &Solution) -> f64,
) -> Option<f64> {
    let options: Vec<_> = (0..inst.demands.len()).map(|k| routings(inst, k)).collect();
    if options.iter().any(|o| o.is_empty()) {
        return None;
    }
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; options.len()];
    loop {
        let mut sol = Solution {
            paths: Vec::new(),
            open: BTreeSet::new(),
            assignment: Vec::new(),
        };
        for (k, &i) in pick.iter().enumerate() {
            let (path, asg) = &options[k][i];
            sol.open.extend(asg.values().copied());
            sol.paths.push(path.clone());
            sol.assignment.push(asg.clone());
        }
        let report = validate(inst, spec, &sol);
        if report.feasible {
            let value = score(&report, &sol);
            if best.map_or(true, |b| value < b) {
                best = Some(value);
            }
        }
        let mut k = 0;
        loop {
            if k == pick.len() {
                return best;
            }
            pick[k] += 1;
            if pick[k] < options[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
    }
}
