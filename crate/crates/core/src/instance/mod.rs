//! Problem input: topology, NFVI resources, VNF catalog and demands.
//!
//! Everything here is immutable once validated. Entities are addressed by
//! dense index newtypes; names only matter at the file boundary.

mod extend;
mod generator;
mod io;
pub mod samples;

pub use extend::{big_m, demand_bandwidth_bounds, extend_graph, worst_case_bandwidth};
pub use generator::{generate_three_tier, CaseStudy, ThreeTierConfig, VnfTemplate};
pub use io::{load_instance, save_instance, SCHEMA_VERSION};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! index_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub usize);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

index_newtype!(
    /// Index into [`Topology::nodes`].
    NodeId
);
index_newtype!(
    /// Index into [`Topology::arcs`].
    ArcId
);
index_newtype!(
    /// Index into [`Instance::vnfs`].
    VnfId
);
index_newtype!(
    /// Index into [`Instance::demands`].
    DemandId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Edge,
    Aggregation,
    Core,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Edge, Tier::Aggregation, Tier::Core];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Edge => "edge",
            Tier::Aggregation => "aggregation",
            Tier::Core => "core",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub tier: Tier,
    /// NFVI capacity per resource; `None` when the node hosts no NFVI cluster.
    pub capacity: Option<Vec<f64>>,
    /// Set on nodes created by [`extend_graph`]: the access node this twin serves.
    pub twin_of: Option<NodeId>,
}

impl Node {
    pub fn is_nfvi(&self) -> bool {
        self.capacity.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
    /// Bandwidth capacity, strictly positive.
    pub capacity: f64,
    /// Propagation latency in ms.
    pub latency: f64,
}

/// Directed network with NFVI resources attached to a subset of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    resources: Vec<String>,
    nodes: Vec<Node>,
    arcs: Vec<Link>,
    outgoing: Vec<Vec<ArcId>>,
    incoming: Vec<Vec<ArcId>>,
}

impl Topology {
    pub fn new(resources: Vec<String>, nodes: Vec<Node>, arcs: Vec<Link>) -> Result<Self> {
        for (i, node) in nodes.iter().enumerate() {
            if let Some(cap) = &node.capacity {
                if cap.len() != resources.len() {
                    return Err(Error::invalid(
                        format!("nodes[{i}] ({})", node.name),
                        format!(
                            "capacity has {} entries, expected {}",
                            cap.len(),
                            resources.len()
                        ),
                    ));
                }
                if let Some(r) = cap.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
                    return Err(Error::invalid(
                        format!("nodes[{i}] ({}).capacity.{}", node.name, resources[r]),
                        "node capacity must be finite and non-negative",
                    ));
                }
            }
            if let Some(orig) = node.twin_of {
                if orig.0 >= nodes.len() {
                    return Err(Error::invalid(
                        format!("nodes[{i}]"),
                        "twin refers to unknown node",
                    ));
                }
            }
        }
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incoming = vec![Vec::new(); nodes.len()];
        for (a, arc) in arcs.iter().enumerate() {
            let label = || {
                let name = |n: NodeId| nodes.get(n.0).map(|x| x.name.as_str()).unwrap_or("?");
                format!("arcs[{a}] ({}->{})", name(arc.from), name(arc.to))
            };
            if arc.from.0 >= nodes.len() || arc.to.0 >= nodes.len() {
                return Err(Error::invalid(label(), "endpoint is not a node"));
            }
            if arc.from == arc.to {
                return Err(Error::invalid(label(), "self loop"));
            }
            if !(arc.capacity.is_finite() && arc.capacity > 0.0) {
                return Err(Error::invalid(label(), "capacity must be positive"));
            }
            if !(arc.latency.is_finite() && arc.latency >= 0.0) {
                return Err(Error::invalid(label(), "latency must be non-negative"));
            }
            outgoing[arc.from.0].push(ArcId(a));
            incoming[arc.to.0].push(ArcId(a));
        }
        Ok(Topology {
            resources,
            nodes,
            arcs,
            outgoing,
            incoming,
        })
    }

    pub fn resources(&self) -> &[String] {
        &self.resources
    }

    pub fn resource_index(&self, name: &str) -> Option<usize> {
        self.resources.iter().position(|r| r == name)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    pub fn arcs(&self) -> &[Link] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> &Link {
        &self.arcs[id.0]
    }

    pub fn arc_ids(&self) -> impl Iterator<Item = ArcId> + '_ {
        (0..self.arcs.len()).map(ArcId)
    }

    pub fn find_arc(&self, from: NodeId, to: NodeId) -> Option<ArcId> {
        self.outgoing
            .get(from.0)?
            .iter()
            .copied()
            .find(|a| self.arcs[a.0].to == to)
    }

    pub fn outgoing(&self, node: NodeId) -> &[ArcId] {
        &self.outgoing[node.0]
    }

    pub fn incoming(&self, node: NodeId) -> &[ArcId] {
        &self.incoming[node.0]
    }

    /// Nodes hosting an NFVI cluster.
    pub fn nfvi_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(|n| self.nodes[n.0].is_nfvi())
    }

    pub fn nfvi_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_nfvi()).count()
    }

    pub fn capacity(&self, node: NodeId, resource: usize) -> f64 {
        self.nodes[node.0]
            .capacity
            .as_ref()
            .map_or(0.0, |c| c[resource])
    }

    /// Twin created for `node` by graph extension, if any.
    pub fn twin(&self, node: NodeId) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| n.twin_of == Some(node))
            .map(NodeId)
    }

    pub fn is_extended(&self) -> bool {
        self.nodes.iter().any(|n| n.twin_of.is_some())
    }
}

/// One affine component `slope * load + intercept` of a latency curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyPiece {
    pub slope: f64,
    pub intercept: f64,
}

impl LatencyPiece {
    pub fn eval(&self, load: f64) -> f64 {
        self.slope * load + self.intercept
    }
}

/// Forwarding latency behaviour of a VNF type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LatencyProfile {
    /// Latency is the pointwise maximum of the pieces, evaluated at the copy's aggregate load.
    Standard { pieces: Vec<LatencyPiece> },
    /// Constant latency up to a hard per-copy bandwidth cap.
    Fastpath { latency: f64, max_bandwidth: f64 },
}

impl LatencyProfile {
    pub fn regime(&self) -> Regime {
        match self {
            LatencyProfile::Standard { .. } => Regime::Standard,
            LatencyProfile::Fastpath { .. } => Regime::Fastpath,
        }
    }

    /// Latency seen by every demand of a copy carrying `load`.
    pub fn latency_at(&self, load: f64) -> f64 {
        match self {
            LatencyProfile::Standard { pieces } => pieces
                .iter()
                .map(|p| p.eval(load))
                .fold(f64::NEG_INFINITY, f64::max),
            LatencyProfile::Fastpath { latency, .. } => *latency,
        }
    }

    pub(crate) fn validate(&self, path: &str) -> Result<()> {
        match self {
            LatencyProfile::Standard { pieces } => {
                if pieces.is_empty() {
                    return Err(Error::invalid(
                        path,
                        "standard latency curve needs at least one piece",
                    ));
                }
                for (j, p) in pieces.iter().enumerate() {
                    if !(p.slope.is_finite() && p.intercept.is_finite()) || p.slope < 0.0 {
                        return Err(Error::invalid(
                            format!("{path}.pieces[{j}]"),
                            "slopes must be finite and non-negative",
                        ));
                    }
                }
                if pieces.windows(2).any(|w| w[1].slope < w[0].slope) {
                    return Err(Error::invalid(
                        path,
                        "standard latency curve must be convex: slopes nondecreasing",
                    ));
                }
            }
            LatencyProfile::Fastpath {
                latency,
                max_bandwidth,
            } => {
                if !(latency.is_finite() && *latency >= 0.0) {
                    return Err(Error::invalid(
                        path,
                        "fastpath latency must be non-negative",
                    ));
                }
                if !(max_bandwidth.is_finite() && *max_bandwidth > 0.0) {
                    return Err(Error::invalid(
                        path,
                        "fastpath bandwidth cap must be positive",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Standard,
    Fastpath,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Standard => "standard",
            Regime::Fastpath => "fastpath",
        }
    }
}

/// Upper bound on the number of copies of one VNF type per NFVI node.
#[derive(Debug, Clone, PartialEq)]
pub enum CopyLimit {
    /// `floor(capacity / request)` on the cost resource.
    Auto,
    Uniform(u32),
    /// Nodes missing from the map get no copies.
    PerNode(BTreeMap<NodeId, u32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VnfType {
    pub name: String,
    /// Output/input bit-rate ratio: < 1 compresses, > 1 decompresses.
    pub compression: f64,
    /// Request per resource, aligned with [`Topology::resources`].
    pub resources: Vec<f64>,
    pub latency: LatencyProfile,
    pub copies: CopyLimit,
}

/// Precedence constraints among the VNFs a demand requests.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainOrder {
    /// The requested list is traversed in the listed order.
    Total,
    /// Arcs `(before, after)` of a precedence DAG; empty means unordered.
    Partial(Vec<(VnfId, VnfId)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    pub name: String,
    pub origin: NodeId,
    pub destination: NodeId,
    /// Nominal bandwidth, strictly positive.
    pub bandwidth: f64,
    /// Requested VNF types. Under [`ChainOrder::Total`] this is also the chain order.
    pub chain: Vec<VnfId>,
    pub order: ChainOrder,
    /// End-to-end latency bound in ms.
    pub latency_bound: f64,
}

impl Demand {
    pub fn requests(&self, vnf: VnfId) -> bool {
        self.chain.contains(&vnf)
    }

    /// All ordered pairs `(f1, f2)` where `f1` must be traversed no later than `f2`.
    pub fn precedences(&self) -> Vec<(VnfId, VnfId)> {
        match &self.order {
            ChainOrder::Total => {
                let mut pairs = Vec::new();
                for (a, &f1) in self.chain.iter().enumerate() {
                    for &f2 in &self.chain[a + 1..] {
                        pairs.push((f1, f2));
                    }
                }
                pairs
            }
            ChainOrder::Partial(arcs) => arcs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    /// Resource whose usage is the NFV cost (CPU in practice).
    pub cost_resource: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub topology: Topology,
    pub vnfs: Vec<VnfType>,
    pub demands: Vec<Demand>,
    pub options: Options,
}

impl Instance {
    /// Checks every cross-reference and value range.
    pub fn new(
        topology: Topology,
        vnfs: Vec<VnfType>,
        demands: Vec<Demand>,
        options: Options,
    ) -> Result<Self> {
        let inst = Instance {
            topology,
            vnfs,
            demands,
            options,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let topo = &self.topology;
        let nres = topo.resources.len();
        if self.options.cost_resource >= nres {
            return Err(Error::invalid("options.cost_resource", "unknown resource"));
        }
        for (f, v) in self.vnfs.iter().enumerate() {
            let path = format!("vnfs[{f}] ({})", v.name);
            if !(v.compression.is_finite() && v.compression > 0.0) {
                return Err(Error::invalid(
                    format!("{path}.compression"),
                    "factor must be positive",
                ));
            }
            if v.resources.len() != nres {
                return Err(Error::invalid(
                    format!("{path}.resources"),
                    format!("expected {nres} entries"),
                ));
            }
            if v.resources.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(Error::invalid(
                    format!("{path}.resources"),
                    "requests must be non-negative",
                ));
            }
            v.latency.validate(&format!("{path}.latency"))?;
            if let CopyLimit::PerNode(map) = &v.copies {
                if let Some(n) = map.keys().find(|n| n.0 >= topo.nodes.len()) {
                    return Err(Error::invalid(
                        format!("{path}.copies"),
                        format!("unknown node {n}"),
                    ));
                }
            }
        }
        for (k, d) in self.demands.iter().enumerate() {
            let path = format!("demands[{k}] ({})", d.name);
            if d.origin.0 >= topo.nodes.len() || d.destination.0 >= topo.nodes.len() {
                return Err(Error::invalid(path, "endpoint is not a node"));
            }
            if d.origin == d.destination {
                return Err(Error::invalid(path, "origin equals destination"));
            }
            if !(d.bandwidth.is_finite() && d.bandwidth > 0.0) {
                return Err(Error::invalid(
                    format!("{path}.bandwidth"),
                    "must be positive",
                ));
            }
            if !(d.latency_bound.is_finite() && d.latency_bound >= 0.0) {
                return Err(Error::invalid(
                    format!("{path}.latency_bound"),
                    "must be non-negative",
                ));
            }
            for (p, f) in d.chain.iter().enumerate() {
                if f.0 >= self.vnfs.len() {
                    return Err(Error::invalid(
                        format!("{path}.chain[{p}]"),
                        "unknown VNF type",
                    ));
                }
                if d.chain[..p].contains(f) {
                    return Err(Error::invalid(
                        format!("{path}.chain[{p}]"),
                        "VNF requested twice",
                    ));
                }
            }
            if let ChainOrder::Partial(arcs) = &d.order {
                for &(a, b) in arcs {
                    if !d.requests(a) || !d.requests(b) {
                        return Err(Error::invalid(
                            format!("{path}.order"),
                            "precedence refers to a VNF the demand does not request",
                        ));
                    }
                }
                if has_cycle(&d.chain, arcs) {
                    return Err(Error::invalid(
                        format!("{path}.order"),
                        "precedence relation is cyclic",
                    ));
                }
            }
            for &f in &d.chain {
                let hosts = topo.nfvi_nodes().any(|i| self.max_copies(i, f) > 0);
                if !hosts {
                    return Err(Error::invalid(
                        format!("{path}"),
                        format!("no node can host VNF {}", self.vnfs[f.0].name),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn vnf(&self, id: VnfId) -> &VnfType {
        &self.vnfs[id.0]
    }

    pub fn vnf_ids(&self) -> impl Iterator<Item = VnfId> {
        (0..self.vnfs.len()).map(VnfId)
    }

    pub fn demand(&self, id: DemandId) -> &Demand {
        &self.demands[id.0]
    }

    pub fn demand_ids(&self) -> impl Iterator<Item = DemandId> {
        (0..self.demands.len()).map(DemandId)
    }

    pub fn vnf_by_name(&self, name: &str) -> Option<VnfId> {
        self.vnfs.iter().position(|v| v.name == name).map(VnfId)
    }

    /// `c_i^f`: how many copies of `vnf` node `node` may host.
    pub fn max_copies(&self, node: NodeId, vnf: VnfId) -> u32 {
        let n = self.topology.node(node);
        let Some(cap) = &n.capacity else { return 0 };
        let v = &self.vnfs[vnf.0];
        match &v.copies {
            CopyLimit::Auto => {
                let r = self.options.cost_resource;
                let req = v.resources[r];
                if req <= 0.0 {
                    1
                } else {
                    ((cap[r] / req) + 1e-9).floor().max(0.0) as u32
                }
            }
            CopyLimit::Uniform(c) => *c,
            CopyLimit::PerNode(map) => map.get(&node).copied().unwrap_or(0),
        }
    }

    /// CPU (cost resource) request of one copy of `vnf`.
    pub fn cost_of(&self, vnf: VnfId) -> f64 {
        self.vnfs[vnf.0].resources[self.options.cost_resource]
    }

    /// Origin and destination nodes of all demands, sorted.
    pub fn access_nodes(&self) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self
            .demands
            .iter()
            .flat_map(|d| [d.origin, d.destination])
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Latency regime shared by every catalog entry, if they agree.
    pub fn regime(&self) -> Option<Regime> {
        let mut it = self.vnfs.iter().map(|v| v.latency.regime());
        let first = it.next()?;
        it.all(|r| r == first).then_some(first)
    }
}

fn has_cycle(nodes: &[VnfId], arcs: &[(VnfId, VnfId)]) -> bool {
    // Kahn's algorithm over the requested set.
    let mut indeg: BTreeMap<VnfId, usize> = nodes.iter().map(|&f| (f, 0)).collect();
    for &(_, b) in arcs {
        *indeg.entry(b).or_default() += 1;
    }
    let mut ready: Vec<VnfId> = indeg
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&f, _)| f)
        .collect();
    let mut seen = 0;
    while let Some(f) = ready.pop() {
        seen += 1;
        for &(a, b) in arcs {
            if a == f {
                let d = indeg.get_mut(&b).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(b);
                }
            }
        }
    }
    seen < indeg.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Topology {
        let nodes = ["a", "b"]
            .iter()
            .map(|n| Node {
                name: n.to_string(),
                tier: Tier::Edge,
                capacity: Some(vec![2.0]),
                twin_of: None,
            })
            .collect();
        let arcs = vec![Link {
            from: NodeId(0),
            to: NodeId(1),
            capacity: 1.0,
            latency: 1.0,
        }];
        Topology::new(vec!["cpu".into()], nodes, arcs).unwrap()
    }

    #[test]
    fn rejects_non_positive_capacity() {
        let t = tiny();
        let mut arcs = t.arcs().to_vec();
        arcs[0].capacity = 0.0;
        let err = Topology::new(t.resources().to_vec(), t.nodes().to_vec(), arcs).unwrap_err();
        assert!(err.to_string().contains("a->b"), "{err}");
    }

    #[test]
    fn detects_precedence_cycle() {
        let c = [VnfId(0), VnfId(1), VnfId(2)];
        assert!(has_cycle(&c, &[(VnfId(0), VnfId(1)), (VnfId(1), VnfId(0))]));
        assert!(!has_cycle(
            &c,
            &[(VnfId(0), VnfId(1)), (VnfId(1), VnfId(2))]
        ));
        assert!(!has_cycle(&c, &[]));
    }

    #[test]
    fn standard_curve_must_be_convex() {
        let bad = LatencyProfile::Standard {
            pieces: vec![
                LatencyPiece {
                    slope: 5.0,
                    intercept: 0.0,
                },
                LatencyPiece {
                    slope: 1.0,
                    intercept: 2.0,
                },
            ],
        };
        assert!(bad.validate("x").is_err());
        let good = LatencyProfile::Standard {
            pieces: vec![
                LatencyPiece {
                    slope: 0.0,
                    intercept: 1.0,
                },
                LatencyPiece {
                    slope: 5.0,
                    intercept: 0.0,
                },
            ],
        };
        good.validate("x").unwrap();
        assert_eq!(good.latency_at(2.0), 10.0);
        assert_eq!(good.latency_at(0.1), 1.0);
    }

    #[test]
    fn total_order_precedences_cover_all_pairs() {
        let d = Demand {
            name: "d".into(),
            origin: NodeId(0),
            destination: NodeId(1),
            bandwidth: 1.0,
            chain: vec![VnfId(2), VnfId(0), VnfId(1)],
            order: ChainOrder::Total,
            latency_bound: 10.0,
        };
        assert_eq!(
            d.precedences(),
            vec![
                (VnfId(2), VnfId(0)),
                (VnfId(2), VnfId(1)),
                (VnfId(0), VnfId(1))
            ]
        );
    }
}
