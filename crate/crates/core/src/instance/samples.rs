//! Small hand-made instances used in examples and tests.

use super::{
    ChainOrder, CopyLimit, Demand, Instance, LatencyPiece, LatencyProfile, Link, Node, NodeId,
    Options, Regime, Tier, Topology, VnfId, VnfType,
};

fn node(name: &str, cpu: Option<f64>) -> Node {
    Node {
        name: name.into(),
        tier: Tier::Edge,
        capacity: cpu.map(|c| vec![c]),
        twin_of: None,
    }
}

fn link(from: usize, to: usize, capacity: f64) -> Link {
    Link {
        from: NodeId(from),
        to: NodeId(to),
        capacity,
        latency: 1.0,
    }
}

/// A single VNF type with one copy per node and CPU request 1.
pub fn single_vnf(regime: Regime) -> VnfType {
    VnfType {
        name: "f".into(),
        compression: 1.0,
        resources: vec![1.0],
        latency: match regime {
            Regime::Standard => LatencyProfile::Standard {
                pieces: vec![
                    LatencyPiece {
                        slope: 0.0,
                        intercept: 1.0,
                    },
                    LatencyPiece {
                        slope: 0.1,
                        intercept: 0.0,
                    },
                ],
            },
            Regime::Fastpath => LatencyProfile::Fastpath {
                latency: 1.0,
                max_bandwidth: 20.0,
            },
        },
        copies: CopyLimit::Uniform(1),
    }
}

/// Path `A - B - C` with arcs both ways (capacity 100, latency 1), three NFVI
/// nodes with 4 CPU, and one demand `A -> C` of bandwidth 10 requesting one VNF.
pub fn line(regime: Regime) -> Instance {
    let topo = Topology::new(
        vec!["cpu".into()],
        vec![
            node("A", Some(4.0)),
            node("B", Some(4.0)),
            node("C", Some(4.0)),
        ],
        vec![
            link(0, 1, 100.0),
            link(1, 0, 100.0),
            link(1, 2, 100.0),
            link(2, 1, 100.0),
        ],
    )
    .expect("valid topology");
    let demand = Demand {
        name: "d0".into(),
        origin: NodeId(0),
        destination: NodeId(2),
        bandwidth: 10.0,
        chain: vec![VnfId(0)],
        order: ChainOrder::Total,
        latency_bound: 100.0,
    };
    Instance::new(
        topo,
        vec![single_vnf(regime)],
        vec![demand],
        Options { cost_resource: 0 },
    )
    .expect("valid instance")
}

/// Diamond `A -> B1 -> C`, `A -> B2 -> C` (capacity 100) with two demands of
/// 60 from `A` to `C`, no NFVI and no VNFs.
pub fn diamond() -> Instance {
    let topo = Topology::new(
        vec!["cpu".into()],
        vec![
            node("A", None),
            node("B1", None),
            node("B2", None),
            node("C", None),
        ],
        vec![
            link(0, 1, 100.0),
            link(1, 3, 100.0),
            link(0, 2, 100.0),
            link(2, 3, 100.0),
        ],
    )
    .expect("valid topology");
    let demands = (0..2)
        .map(|k| Demand {
            name: format!("d{k}"),
            origin: NodeId(0),
            destination: NodeId(3),
            bandwidth: 60.0,
            chain: Vec::new(),
            order: ChainOrder::Total,
            latency_bound: 100.0,
        })
        .collect();
    Instance::new(topo, Vec::new(), demands, Options { cost_resource: 0 }).expect("valid instance")
}
