//! Three-tier (edge / aggregation / core) benchmark topology with Internet or VPN demands.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    ChainOrder, CopyLimit, Demand, Instance, LatencyPiece, LatencyProfile, Link, Node, NodeId,
    Options, Regime, Tier, Topology, VnfId, VnfType,
};
use crate::error::{Error, Result};

const EDGES: usize = 8;
const AGGREGATIONS: usize = 4;
const CORES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseStudy {
    /// Every edge node exchanges traffic with every core node, both directions.
    Internet,
    /// Edge nodes exchange traffic among themselves.
    Vpn,
}

impl CaseStudy {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseStudy::Internet => "internet",
            CaseStudy::Vpn => "vpn",
        }
    }

    fn default_count(self) -> usize {
        match self {
            CaseStudy::Internet => 36,
            CaseStudy::Vpn => 30,
        }
    }

    fn default_range(self) -> (f64, f64) {
        match self {
            CaseStudy::Internet => (0.1, 0.14),
            CaseStudy::Vpn => (0.13, 0.17),
        }
    }
}

/// Catalog entry used by the generator; the instance keeps the profile of the chosen regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VnfTemplate {
    pub name: String,
    pub compression: f64,
    pub cpu: f64,
    pub ram: f64,
    pub standard: Vec<LatencyPiece>,
    pub fastpath_latency: f64,
    pub fastpath_max_bandwidth: f64,
}

impl VnfTemplate {
    fn with_factor(name: &str, compression: f64) -> Self {
        VnfTemplate {
            name: name.to_string(),
            compression,
            cpu: 1.0,
            ram: 16.0,
            standard: vec![
                LatencyPiece {
                    slope: 0.0,
                    intercept: 1.0,
                },
                LatencyPiece {
                    slope: 5.0,
                    intercept: 0.0,
                },
                LatencyPiece {
                    slope: 20.0,
                    intercept: -7.5,
                },
            ],
            fastpath_latency: 1.0,
            fastpath_max_bandwidth: 0.5,
        }
    }

    /// Firewall (compressing), DPI (neutral) and tunnelling (decompressing).
    pub fn default_catalog() -> Vec<VnfTemplate> {
        vec![
            Self::with_factor("firewall", 0.8),
            Self::with_factor("dpi", 1.0),
            Self::with_factor("tunnel", 1.25),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThreeTierConfig {
    pub case: CaseStudy,
    pub regime: Regime,
    /// Number of demands; defaults to 36 (Internet) or 30 (VPN).
    pub demand_count: Option<usize>,
    /// Explicit `(origin, destination)` node names; overrides sampling.
    pub demand_pairs: Option<Vec<(String, String)>>,
    /// Seed for choosing demand pairs. Kept apart from the bandwidth seed so
    /// that different seeds only change bandwidths.
    pub pair_seed: u64,
    /// Uniform demand bandwidth interval; defaults per case study.
    pub bandwidth_range: Option<(f64, f64)>,
    pub edge_link_capacity: f64,
    pub aggregation_link_capacity: f64,
    pub core_link_capacity: f64,
    pub edge_link_latency: f64,
    pub aggregation_link_latency: f64,
    pub core_link_latency: f64,
    /// `(cpu, ram)` of the NFVI cluster per tier.
    pub edge_nfvi: (f64, f64),
    pub aggregation_nfvi: (f64, f64),
    pub core_nfvi: (f64, f64),
    pub latency_bound: f64,
    pub catalog: Vec<VnfTemplate>,
    /// Catalog names forming every demand's chain, in order; defaults to the whole catalog.
    pub chain: Option<Vec<String>>,
    /// Uniform cap on copies per node and type; `None` derives it from CPU.
    pub max_copies: Option<u32>,
}

impl Default for ThreeTierConfig {
    fn default() -> Self {
        ThreeTierConfig {
            case: CaseStudy::Internet,
            regime: Regime::Standard,
            demand_count: None,
            demand_pairs: None,
            pair_seed: 0,
            bandwidth_range: None,
            edge_link_capacity: 1.0,
            aggregation_link_capacity: 0.3,
            core_link_capacity: 5.0,
            edge_link_latency: 1.0,
            aggregation_link_latency: 3.0,
            core_link_latency: 5.0,
            edge_nfvi: (3.0, 40.0),
            aggregation_nfvi: (5.0, 80.0),
            core_nfvi: (10.0, 160.0),
            latency_bound: 15.0,
            catalog: VnfTemplate::default_catalog(),
            chain: None,
            max_copies: None,
        }
    }
}

impl ThreeTierConfig {
    fn check(&self) -> Result<()> {
        let (lo, hi) = self.bandwidth_range.unwrap_or(self.case.default_range());
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Config(format!(
                "bandwidth range [{lo}, {hi}] is not a positive interval"
            )));
        }
        let caps = [
            self.edge_link_capacity,
            self.aggregation_link_capacity,
            self.core_link_capacity,
        ];
        if caps.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Config("link capacities must be positive".into()));
        }
        let lats = [
            self.edge_link_latency,
            self.aggregation_link_latency,
            self.core_link_latency,
            self.latency_bound,
        ];
        if lats.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::Config("latencies must be non-negative".into()));
        }
        if self.demand_count == Some(0) && self.demand_pairs.is_none() {
            return Err(Error::Config("demand count must be positive".into()));
        }
        if self.catalog.is_empty() {
            return Err(Error::Config("catalog is empty".into()));
        }
        Ok(())
    }
}

fn name(tier: Tier, i: usize) -> String {
    match tier {
        Tier::Edge => format!("e{}", i + 1),
        Tier::Aggregation => format!("a{}", i + 1),
        Tier::Core => format!("c{}", i + 1),
    }
}

fn topology(config: &ThreeTierConfig) -> Topology {
    let mut nodes = Vec::new();
    let tiers = [
        (Tier::Edge, EDGES, config.edge_nfvi),
        (Tier::Aggregation, AGGREGATIONS, config.aggregation_nfvi),
        (Tier::Core, CORES, config.core_nfvi),
    ];
    for (tier, count, (cpu, ram)) in tiers {
        for i in 0..count {
            nodes.push(Node {
                name: name(tier, i),
                tier,
                capacity: Some(vec![cpu, ram]),
                twin_of: None,
            });
        }
    }
    let edge = |i: usize| NodeId(i);
    let agg = |i: usize| NodeId(EDGES + i);
    let core = |i: usize| NodeId(EDGES + AGGREGATIONS + i);

    let mut arcs = Vec::new();
    let mut both = |a: NodeId, b: NodeId, capacity: f64, latency: f64| {
        arcs.push(Link {
            from: a,
            to: b,
            capacity,
            latency,
        });
        arcs.push(Link {
            from: b,
            to: a,
            capacity,
            latency,
        });
    };
    // Two pods of four edge nodes, each dual-homed on the pod's aggregation pair.
    for e in 0..EDGES {
        let pod = e / 4;
        for a in [2 * pod, 2 * pod + 1] {
            both(
                edge(e),
                agg(a),
                config.edge_link_capacity,
                config.edge_link_latency,
            );
        }
    }
    // Each aggregation node reaches two cores; both pods share the core layer.
    for a in 0..AGGREGATIONS {
        let first = 2 * (a % 2);
        for c in [first, first + 1] {
            both(
                agg(a),
                core(c),
                config.aggregation_link_capacity,
                config.aggregation_link_latency,
            );
        }
    }
    for c1 in 0..CORES {
        for c2 in c1 + 1..CORES {
            both(
                core(c1),
                core(c2),
                config.core_link_capacity,
                config.core_link_latency,
            );
        }
    }
    Topology::new(vec!["cpu".into(), "ram".into()], nodes, arcs)
        .expect("three-tier topology is well formed")
}

fn candidate_pairs(case: CaseStudy) -> Vec<(NodeId, NodeId)> {
    let mut pairs = Vec::new();
    match case {
        CaseStudy::Internet => {
            for e in 0..EDGES {
                for c in 0..CORES {
                    pairs.push((NodeId(e), NodeId(EDGES + AGGREGATIONS + c)));
                }
            }
            for c in 0..CORES {
                for e in 0..EDGES {
                    pairs.push((NodeId(EDGES + AGGREGATIONS + c), NodeId(e)));
                }
            }
        }
        CaseStudy::Vpn => {
            for a in 0..EDGES {
                for b in 0..EDGES {
                    if a != b {
                        pairs.push((NodeId(a), NodeId(b)));
                    }
                }
            }
        }
    }
    pairs
}

/// Builds the three-tier benchmark instance. Pure function of `(seed, config)`.
pub fn generate_three_tier(seed: u64, config: &ThreeTierConfig) -> Result<Instance> {
    config.check()?;
    let topology = topology(config);

    let pairs: Vec<(NodeId, NodeId)> = match &config.demand_pairs {
        Some(explicit) => explicit
            .iter()
            .map(|(o, t)| {
                let find = |n: &str| {
                    topology
                        .node_by_name(n)
                        .ok_or_else(|| Error::Config(format!("unknown node {n} in demand pairs")))
                };
                Ok((find(o)?, find(t)?))
            })
            .collect::<Result<_>>()?,
        None => {
            let candidates = candidate_pairs(config.case);
            let count = config.demand_count.unwrap_or(config.case.default_count());
            if count > candidates.len() {
                return Err(Error::Config(format!(
                    "{count} demands requested but the {} case has only {} pairs",
                    config.case.as_str(),
                    candidates.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(config.pair_seed);
            let mut chosen = sample(&mut rng, candidates.len(), count).into_vec();
            chosen.sort_unstable();
            chosen.into_iter().map(|i| candidates[i]).collect()
        }
    };

    let vnfs: Vec<VnfType> = config
        .catalog
        .iter()
        .map(|t| VnfType {
            name: t.name.clone(),
            compression: t.compression,
            resources: vec![t.cpu, t.ram],
            latency: match config.regime {
                Regime::Standard => LatencyProfile::Standard {
                    pieces: t.standard.clone(),
                },
                Regime::Fastpath => LatencyProfile::Fastpath {
                    latency: t.fastpath_latency,
                    max_bandwidth: t.fastpath_max_bandwidth,
                },
            },
            copies: match config.max_copies {
                Some(c) => CopyLimit::Uniform(c),
                None => CopyLimit::Auto,
            },
        })
        .collect();
    let chain: Vec<VnfId> = match &config.chain {
        Some(names) => names
            .iter()
            .map(|n| {
                config
                    .catalog
                    .iter()
                    .position(|t| &t.name == n)
                    .map(VnfId)
                    .ok_or_else(|| Error::Config(format!("chain names unknown VNF {n}")))
            })
            .collect::<Result<_>>()?,
        None => (0..vnfs.len()).map(VnfId).collect(),
    };

    let (lo, hi) = config
        .bandwidth_range
        .unwrap_or(config.case.default_range());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let demands = pairs
        .iter()
        .enumerate()
        .map(|(k, &(o, t))| Demand {
            name: format!("d{}", k + 1),
            origin: o,
            destination: t,
            bandwidth: if hi > lo { rng.gen_range(lo..=hi) } else { lo },
            chain: chain.clone(),
            order: ChainOrder::Total,
            latency_bound: config.latency_bound,
        })
        .collect();

    Instance::new(topology, vnfs, demands, Options { cost_resource: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::extend_graph;

    fn vpn() -> ThreeTierConfig {
        ThreeTierConfig {
            case: CaseStudy::Vpn,
            ..Default::default()
        }
    }

    #[test]
    fn internet_has_36_demands() {
        let inst = generate_three_tier(1, &ThreeTierConfig::default()).unwrap();
        assert_eq!(inst.demands.len(), 36);
        assert_eq!(inst.topology.nodes().len(), 16);
        for d in &inst.demands {
            assert!((0.1..=0.14).contains(&d.bandwidth));
        }
    }

    #[test]
    fn vpn_has_30_edge_to_edge_demands() {
        let inst = generate_three_tier(1, &vpn()).unwrap();
        assert_eq!(inst.demands.len(), 30);
        for d in &inst.demands {
            assert_eq!(inst.topology.node(d.origin).tier, Tier::Edge);
            assert_eq!(inst.topology.node(d.destination).tier, Tier::Edge);
            assert!((0.13..=0.17).contains(&d.bandwidth));
        }
    }

    #[test]
    fn tier_capacities_and_latencies() {
        let inst = generate_three_tier(3, &ThreeTierConfig::default()).unwrap();
        let t = &inst.topology;
        let e1 = t.node_by_name("e1").unwrap();
        assert_eq!(t.node(e1).capacity.as_deref(), Some(&[3.0, 40.0][..]));
        let a1 = t.node_by_name("a1").unwrap();
        assert_eq!(t.node(a1).capacity.as_deref(), Some(&[5.0, 80.0][..]));
        let c1 = t.node_by_name("c1").unwrap();
        assert_eq!(t.node(c1).capacity.as_deref(), Some(&[10.0, 160.0][..]));
        for arc in t.arcs() {
            let tiers = (t.node(arc.from).tier, t.node(arc.to).tier);
            let expected = match tiers {
                (Tier::Edge, _) | (_, Tier::Edge) => 1.0,
                (Tier::Core, Tier::Core) => 5.0,
                _ => 3.0,
            };
            assert_eq!(arc.latency, expected);
        }
        // dual homing
        for e in t.node_ids().filter(|&n| t.node(n).tier == Tier::Edge) {
            assert_eq!(t.outgoing(e).len(), 2);
        }
        for a in t
            .node_ids()
            .filter(|&n| t.node(n).tier == Tier::Aggregation)
        {
            let up = t
                .outgoing(a)
                .iter()
                .filter(|&&x| t.node(t.arc(x).to).tier == Tier::Core);
            assert_eq!(up.count(), 2);
        }
        // full core mesh: 4 * 3 directed arcs
        let core_arcs = t
            .arcs()
            .iter()
            .filter(|a| t.node(a.from).tier == Tier::Core && t.node(a.to).tier == Tier::Core)
            .count();
        assert_eq!(core_arcs, 12);
        // auto copy limit is CPU bound
        assert_eq!(inst.max_copies(e1, VnfId(0)), 3);
        assert_eq!(inst.max_copies(c1, VnfId(2)), 10);
    }

    #[test]
    fn internet_extension_adds_twelve_twins() {
        let inst = generate_three_tier(0, &ThreeTierConfig::default()).unwrap();
        assert_eq!(inst.access_nodes().len(), 12);
        let ext = extend_graph(&inst);
        assert_eq!(ext.topology.nodes().len(), 28);
    }

    #[test]
    fn seeds_only_change_bandwidths() {
        let a = generate_three_tier(7, &vpn()).unwrap();
        let b = generate_three_tier(7, &vpn()).unwrap();
        assert_eq!(a, b);
        let c = generate_three_tier(8, &vpn()).unwrap();
        assert_eq!(a.topology, c.topology);
        assert_eq!(a.vnfs, c.vnfs);
        assert_eq!(a.demands.len(), c.demands.len());
        let mut differ = 0;
        for (x, y) in a.demands.iter().zip(&c.demands) {
            assert_eq!(
                (x.origin, x.destination, &x.chain),
                (y.origin, y.destination, &y.chain)
            );
            if x.bandwidth != y.bandwidth {
                differ += 1;
            }
        }
        assert!(differ > 0);
    }

    #[test]
    fn rejects_bad_ranges() {
        let cfg = ThreeTierConfig {
            bandwidth_range: Some((0.2, 0.1)),
            ..Default::default()
        };
        assert!(matches!(
            generate_three_tier(0, &cfg),
            Err(Error::Config(_))
        ));
        let cfg = ThreeTierConfig {
            demand_count: Some(100),
            ..Default::default()
        };
        assert!(generate_three_tier(0, &cfg).is_err());
    }

    #[test]
    fn explicit_pairs_override_sampling() {
        let cfg = ThreeTierConfig {
            case: CaseStudy::Vpn,
            demand_pairs: Some(vec![("e1".into(), "e5".into()), ("e2".into(), "e3".into())]),
            ..Default::default()
        };
        let inst = generate_three_tier(0, &cfg).unwrap();
        assert_eq!(inst.demands.len(), 2);
        assert_eq!(inst.topology.node(inst.demands[0].destination).name, "e5");
    }
}
