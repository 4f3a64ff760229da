//! Access-node duplication and the bandwidth/big-M parameters derived from it.

use std::collections::BTreeMap;

use super::{ChainOrder, CopyLimit, Demand, Instance, Link, Node, NodeId, Topology, VnfType};
use crate::error::{Error, Result};

/// Splits every access node `i` into a routing node `i` and an NFVI twin `i'`.
///
/// Arcs leaving `i` are re-anchored on `i'`, the arc `(i, i')` is added with the
/// summed capacity of all arcs incident to `i` and zero latency, and the NFVI
/// resources and copy limits of `i` move to `i'`. Already extended instances are
/// returned unchanged.
pub fn extend_graph(instance: &Instance) -> Instance {
    let topo = &instance.topology;
    if topo.is_extended() {
        return instance.clone();
    }
    let access = instance.access_nodes();
    let mut nodes: Vec<Node> = topo.nodes().to_vec();
    let mut twin_of_access: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for &i in &access {
        let orig = &topo.nodes()[i.0];
        let mut name = format!("{}'", orig.name);
        while nodes.iter().any(|n| n.name == name) {
            name.push('\'');
        }
        let twin = NodeId(nodes.len());
        nodes.push(Node {
            name,
            tier: orig.tier,
            capacity: orig.capacity.clone(),
            twin_of: Some(i),
        });
        nodes[i.0].capacity = None;
        twin_of_access.insert(i, twin);
    }

    let mut arcs: Vec<Link> = topo
        .arcs()
        .iter()
        .map(|a| match twin_of_access.get(&a.from) {
            Some(&twin) => Link { from: twin, ..*a },
            None => *a,
        })
        .collect();
    for (&i, &twin) in &twin_of_access {
        let incident: f64 = topo
            .outgoing(i)
            .iter()
            .chain(topo.incoming(i))
            .map(|&a| topo.arc(a).capacity)
            .sum();
        arcs.push(Link {
            from: i,
            to: twin,
            capacity: if incident > 0.0 { incident } else { 1.0 },
            latency: 0.0,
        });
    }

    let topology = Topology::new(topo.resources().to_vec(), nodes, arcs)
        .expect("extension preserves topology invariants");
    let vnfs = instance
        .vnfs
        .iter()
        .map(|v| match &v.copies {
            CopyLimit::PerNode(map) => {
                let moved = map
                    .iter()
                    .map(|(&n, &c)| (twin_of_access.get(&n).copied().unwrap_or(n), c))
                    .collect();
                VnfType {
                    copies: CopyLimit::PerNode(moved),
                    ..v.clone()
                }
            }
            _ => v.clone(),
        })
        .collect();
    Instance {
        topology,
        vnfs,
        demands: instance.demands.clone(),
        options: instance.options.clone(),
    }
}

/// `(b_min, b_max)`: the range a demand's bit-rate can take along its chain.
///
/// `b_max = b * max(1, prod of factors >= 1)`, `b_min = b * min(1, prod of factors <= 1)`.
pub fn demand_bandwidth_bounds(demand: &Demand, catalog: &[VnfType]) -> Result<(f64, f64)> {
    let mut up = 1.0;
    let mut down = 1.0;
    for f in &demand.chain {
        let v = catalog
            .get(f.0)
            .ok_or_else(|| Error::invalid(format!("demand {}", demand.name), "unknown VNF type"))?;
        let mu = v.compression;
        if !(mu > 0.0) {
            return Err(Error::invalid(
                format!("vnf {}", v.name),
                "compression factor must be positive",
            ));
        }
        if mu >= 1.0 {
            up *= mu;
        }
        if mu <= 1.0 {
            down *= mu;
        }
    }
    Ok((
        demand.bandwidth * down.min(1.0),
        demand.bandwidth * up.max(1.0),
    ))
}

/// Largest bit-rate the demand can reach anywhere on its path.
///
/// With a total chain order only prefixes of the chain can have been applied,
/// so the bound is the maximum running product; otherwise it is `b_max`.
pub fn worst_case_bandwidth(demand: &Demand, catalog: &[VnfType]) -> Result<f64> {
    let (_, b_max) = demand_bandwidth_bounds(demand, catalog)?;
    match demand.order {
        ChainOrder::Total => {
            let mut running = 1.0_f64;
            let mut worst = 1.0_f64;
            for f in &demand.chain {
                running *= catalog[f.0].compression;
                worst = worst.max(running);
            }
            Ok(demand.bandwidth * worst)
        }
        ChainOrder::Partial(_) => Ok(b_max),
    }
}

/// Largest traffic volume that can enter `node`: the sum of its incoming capacities.
pub fn big_m(node: NodeId, topology: &Topology) -> f64 {
    topology
        .incoming(node)
        .iter()
        .map(|&a| topology.arc(a).capacity)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{LatencyProfile, Options, Tier, VnfId};

    fn vnf(mu: f64) -> VnfType {
        VnfType {
            name: format!("mu{mu}"),
            compression: mu,
            resources: vec![1.0],
            latency: LatencyProfile::Fastpath {
                latency: 1.0,
                max_bandwidth: 10.0,
            },
            copies: CopyLimit::Uniform(1),
        }
    }

    fn demand(b: f64, chain: Vec<VnfId>) -> Demand {
        Demand {
            name: "d".into(),
            origin: NodeId(0),
            destination: NodeId(2),
            bandwidth: b,
            chain,
            order: ChainOrder::Total,
            latency_bound: 100.0,
        }
    }

    fn path_abc() -> Instance {
        let nodes = ["A", "B", "C"]
            .iter()
            .map(|n| Node {
                name: n.to_string(),
                tier: Tier::Edge,
                capacity: Some(vec![4.0]),
                twin_of: None,
            })
            .collect();
        let link = |a, b| Link {
            from: NodeId(a),
            to: NodeId(b),
            capacity: 10.0,
            latency: 1.0,
        };
        let arcs = vec![link(0, 1), link(1, 0), link(1, 2), link(2, 1)];
        let topo = Topology::new(vec!["cpu".into()], nodes, arcs).unwrap();
        Instance::new(
            topo,
            vec![vnf(1.0)],
            vec![demand(1.0, vec![VnfId(0)])],
            Options { cost_resource: 0 },
        )
        .unwrap()
    }

    #[test]
    fn bounds_mixed_factors() {
        let cat = vec![vnf(0.8), vnf(1.0), vnf(1.25)];
        let (lo, hi) =
            demand_bandwidth_bounds(&demand(0.1, vec![VnfId(0), VnfId(1), VnfId(2)]), &cat)
                .unwrap();
        assert!((hi - 0.125).abs() < 1e-15);
        assert!((lo - 0.08).abs() < 1e-15);
    }

    #[test]
    fn bounds_identity_and_clamp() {
        let cat = vec![vnf(1.0), vnf(0.5), vnf(0.5)];
        let d = demand(3.0, vec![VnfId(0)]);
        assert_eq!(demand_bandwidth_bounds(&d, &cat).unwrap(), (3.0, 3.0));
        let d = demand(4.0, vec![VnfId(1), VnfId(2)]);
        assert_eq!(demand_bandwidth_bounds(&d, &cat).unwrap(), (1.0, 4.0));
    }

    #[test]
    fn bounds_reject_non_positive_factor() {
        let cat = vec![vnf(0.0)];
        assert!(demand_bandwidth_bounds(&demand(1.0, vec![VnfId(0)]), &cat).is_err());
    }

    #[test]
    fn worst_case_uses_prefix_products() {
        let cat = vec![vnf(0.8), vnf(1.0), vnf(1.25)];
        let d = demand(1.0, vec![VnfId(0), VnfId(1), VnfId(2)]);
        assert!((worst_case_bandwidth(&d, &cat).unwrap() - 1.0).abs() < 1e-15);
        let mut p = d.clone();
        p.order = ChainOrder::Partial(vec![]);
        assert!((worst_case_bandwidth(&p, &cat).unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn duplicates_access_nodes_of_a_path() {
        let inst = path_abc();
        let ext = extend_graph(&inst);
        let t = &ext.topology;
        assert_eq!(t.nodes().len(), 5);
        let a = NodeId(0);
        let a2 = t.twin(a).unwrap();
        assert_eq!(t.node(a2).name, "A'");
        let out: Vec<_> = t.outgoing(a).iter().map(|&x| t.arc(x).to).collect();
        assert_eq!(out, vec![a2]);
        assert!(!t.node(a).is_nfvi());
        assert!(t.node(a2).is_nfvi());
        // the twin arc never binds: all incident capacity of A
        let twin_arc = t.find_arc(a, a2).unwrap();
        assert_eq!(t.arc(twin_arc).capacity, 20.0);
        assert_eq!(t.arc(twin_arc).latency, 0.0);
        // B is not an access node
        assert!(t.twin(NodeId(1)).is_none());
        assert!(t.node(NodeId(1)).is_nfvi());
        // the input is untouched
        assert_eq!(inst.topology.nodes().len(), 3);
    }

    #[test]
    fn extension_is_idempotent() {
        let ext = extend_graph(&path_abc());
        assert_eq!(extend_graph(&ext), ext);
    }

    #[test]
    fn big_m_sums_incoming() {
        let inst = path_abc();
        assert_eq!(big_m(NodeId(1), &inst.topology), 20.0);
        let ext = extend_graph(&inst);
        let a2 = ext.topology.twin(NodeId(0)).unwrap();
        assert_eq!(big_m(a2, &ext.topology), 20.0);
        let isolated = Topology::new(
            vec!["cpu".into()],
            vec![Node {
                name: "x".into(),
                tier: Tier::Core,
                capacity: None,
                twin_of: None,
            }],
            vec![],
        )
        .unwrap();
        assert_eq!(big_m(NodeId(0), &isolated), 0.0);
    }
}
