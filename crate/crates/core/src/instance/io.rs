//! JSON instance files.
//!
//! Entities reference each other by name. Every section is validated with a
//! field path so that a broken file points at the offending entry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    ChainOrder, CopyLimit, Demand, Instance, LatencyProfile, Link, Node, NodeId, Options, Tier,
    Topology, VnfId, VnfType,
};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    schema_version: Option<u32>,
    resources: Vec<String>,
    nodes: Vec<NodeEntry>,
    arcs: Vec<ArcEntry>,
    vnfs: Vec<VnfEntry>,
    demands: Vec<DemandEntry>,
    options: OptionsEntry,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    name: String,
    tier: Tier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nfvi: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    twin_of: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArcEntry {
    from: String,
    to: String,
    capacity: Option<f64>,
    latency: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CopiesEntry {
    Keyword(String),
    Uniform(u32),
    PerNode(BTreeMap<String, u32>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VnfEntry {
    name: String,
    compression: f64,
    resources: BTreeMap<String, f64>,
    latency: LatencyProfile,
    max_copies: CopiesEntry,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OrderEntry {
    Total,
    Partial(Vec<(String, String)>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandEntry {
    name: String,
    origin: String,
    destination: String,
    bandwidth: Option<f64>,
    chain: Vec<String>,
    order: OrderEntry,
    latency_bound: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptionsEntry {
    bandwidth_unit: String,
    cost_resource: String,
}

/// Serializes an instance to the JSON interchange format.
pub fn save_instance(instance: &Instance) -> String {
    let topo = &instance.topology;
    let res = topo.resources();
    let node_name = |n: NodeId| topo.node(n).name.clone();
    let vnf_name = |f: VnfId| instance.vnf(f).name.clone();
    let per_resource = |v: &[f64]| -> BTreeMap<String, f64> {
        res.iter().cloned().zip(v.iter().copied()).collect()
    };
    let file = InstanceFile {
        schema_version: Some(SCHEMA_VERSION),
        resources: res.to_vec(),
        nodes: topo
            .nodes()
            .iter()
            .map(|n| NodeEntry {
                name: n.name.clone(),
                tier: n.tier,
                nfvi: n.capacity.as_deref().map(per_resource),
                twin_of: n.twin_of.map(node_name),
            })
            .collect(),
        arcs: topo
            .arcs()
            .iter()
            .map(|a| ArcEntry {
                from: node_name(a.from),
                to: node_name(a.to),
                capacity: Some(a.capacity),
                latency: Some(a.latency),
            })
            .collect(),
        vnfs: instance
            .vnfs
            .iter()
            .map(|v| VnfEntry {
                name: v.name.clone(),
                compression: v.compression,
                resources: per_resource(&v.resources),
                latency: v.latency.clone(),
                max_copies: match &v.copies {
                    CopyLimit::Auto => CopiesEntry::Keyword("auto".into()),
                    CopyLimit::Uniform(c) => CopiesEntry::Uniform(*c),
                    CopyLimit::PerNode(m) => {
                        CopiesEntry::PerNode(m.iter().map(|(&n, &c)| (node_name(n), c)).collect())
                    }
                },
            })
            .collect(),
        demands: instance
            .demands
            .iter()
            .map(|d| DemandEntry {
                name: d.name.clone(),
                origin: node_name(d.origin),
                destination: node_name(d.destination),
                bandwidth: Some(d.bandwidth),
                chain: d.chain.iter().map(|&f| vnf_name(f)).collect(),
                order: match &d.order {
                    ChainOrder::Total => OrderEntry::Total,
                    ChainOrder::Partial(p) => OrderEntry::Partial(
                        p.iter().map(|&(a, b)| (vnf_name(a), vnf_name(b))).collect(),
                    ),
                },
                latency_bound: d.latency_bound,
            })
            .collect(),
        options: OptionsEntry {
            bandwidth_unit: "unit".into(),
            cost_resource: res[instance.options.cost_resource].clone(),
        },
    };
    serde_json::to_string_pretty(&file).expect("instance serializes")
}

fn resource_vector(
    map: &BTreeMap<String, f64>,
    resources: &[String],
    path: &str,
) -> Result<Vec<f64>> {
    if let Some(unknown) = map.keys().find(|k| !resources.contains(k)) {
        return Err(Error::invalid(path, format!("unknown resource {unknown}")));
    }
    resources
        .iter()
        .map(|r| {
            map.get(r)
                .copied()
                .ok_or_else(|| Error::invalid(path, format!("missing resource {r}")))
        })
        .collect()
}

/// Parses and validates a JSON instance.
pub fn load_instance(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text)?;
    match file.schema_version {
        None => return Err(Error::invalid("schema_version", "field is mandatory")),
        Some(v) if v != SCHEMA_VERSION => {
            return Err(Error::invalid(
                "schema_version",
                format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
            ))
        }
        _ => {}
    }
    let resources = file.resources;
    let mut names: BTreeMap<&str, NodeId> = BTreeMap::new();
    for (i, n) in file.nodes.iter().enumerate() {
        if names.insert(n.name.as_str(), NodeId(i)).is_some() {
            return Err(Error::invalid(
                format!("nodes[{i}]"),
                format!("duplicate node {}", n.name),
            ));
        }
    }
    let lookup = |name: &str, path: &str| {
        names
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(path, format!("unknown node {name}")))
    };

    let mut nodes = Vec::with_capacity(file.nodes.len());
    for (i, n) in file.nodes.iter().enumerate() {
        let path = format!("nodes[{i}] ({})", n.name);
        let capacity = match &n.nfvi {
            Some(map) => Some(resource_vector(map, &resources, &format!("{path}.nfvi"))?),
            None => None,
        };
        let twin_of = match &n.twin_of {
            Some(t) => Some(lookup(t, &format!("{path}.twin_of"))?),
            None => None,
        };
        nodes.push(Node {
            name: n.name.clone(),
            tier: n.tier,
            capacity,
            twin_of,
        });
    }

    let mut arcs = Vec::with_capacity(file.arcs.len());
    for (a, e) in file.arcs.iter().enumerate() {
        let path = format!("arcs[{a}] ({}->{})", e.from, e.to);
        let capacity = e
            .capacity
            .ok_or_else(|| Error::invalid(&path, "missing capacity"))?;
        let latency = e
            .latency
            .ok_or_else(|| Error::invalid(&path, "missing latency"))?;
        arcs.push(Link {
            from: lookup(&e.from, &path)?,
            to: lookup(&e.to, &path)?,
            capacity,
            latency,
        });
    }
    let topology = Topology::new(resources.clone(), nodes, arcs)?;

    let mut vnf_names: BTreeMap<&str, VnfId> = BTreeMap::new();
    for (f, v) in file.vnfs.iter().enumerate() {
        if vnf_names.insert(v.name.as_str(), VnfId(f)).is_some() {
            return Err(Error::invalid(
                format!("vnfs[{f}]"),
                format!("duplicate VNF {}", v.name),
            ));
        }
    }
    let vnf_lookup = |name: &str, path: &str| {
        vnf_names
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(path, format!("unknown VNF {name}")))
    };

    let mut vnfs = Vec::with_capacity(file.vnfs.len());
    for (f, v) in file.vnfs.iter().enumerate() {
        let path = format!("vnfs[{f}] ({})", v.name);
        let copies = match &v.max_copies {
            CopiesEntry::Keyword(k) if k == "auto" => CopyLimit::Auto,
            CopiesEntry::Keyword(k) => {
                return Err(Error::invalid(
                    format!("{path}.max_copies"),
                    format!("unknown keyword {k}"),
                ))
            }
            CopiesEntry::Uniform(c) => CopyLimit::Uniform(*c),
            CopiesEntry::PerNode(m) => CopyLimit::PerNode(
                m.iter()
                    .map(|(n, &c)| Ok((lookup(n, &format!("{path}.max_copies"))?, c)))
                    .collect::<Result<_>>()?,
            ),
        };
        vnfs.push(VnfType {
            name: v.name.clone(),
            compression: v.compression,
            resources: resource_vector(&v.resources, &resources, &format!("{path}.resources"))?,
            latency: v.latency.clone(),
            copies,
        });
    }

    let mut demands = Vec::with_capacity(file.demands.len());
    for (k, d) in file.demands.iter().enumerate() {
        let path = format!("demands[{k}] ({})", d.name);
        let chain = d
            .chain
            .iter()
            .map(|n| vnf_lookup(n, &format!("{path}.chain")))
            .collect::<Result<Vec<_>>>()?;
        let order = match &d.order {
            OrderEntry::Total => ChainOrder::Total,
            OrderEntry::Partial(p) => ChainOrder::Partial(
                p.iter()
                    .map(|(a, b)| {
                        Ok((
                            vnf_lookup(a, &format!("{path}.order"))?,
                            vnf_lookup(b, &format!("{path}.order"))?,
                        ))
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        demands.push(Demand {
            name: d.name.clone(),
            origin: lookup(&d.origin, &format!("{path}.origin"))?,
            destination: lookup(&d.destination, &format!("{path}.destination"))?,
            bandwidth: d
                .bandwidth
                .ok_or_else(|| Error::invalid(&path, "missing bandwidth"))?,
            chain,
            order,
            latency_bound: d.latency_bound,
        });
    }

    let cost_resource = resources
        .iter()
        .position(|r| *r == file.options.cost_resource)
        .ok_or_else(|| Error::invalid("options.cost_resource", "unknown resource"))?;
    Instance::new(topology, vnfs, demands, Options { cost_resource })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{extend_graph, generate_three_tier, CaseStudy, Regime, ThreeTierConfig};

    #[test]
    fn round_trip_generated_instances() {
        for (case, regime) in [
            (CaseStudy::Internet, Regime::Standard),
            (CaseStudy::Vpn, Regime::Fastpath),
        ] {
            let cfg = ThreeTierConfig {
                case,
                regime,
                ..Default::default()
            };
            let inst = generate_three_tier(11, &cfg).unwrap();
            let back = load_instance(&save_instance(&inst)).unwrap();
            assert_eq!(back, inst);
            let ext = extend_graph(&inst);
            assert_eq!(load_instance(&save_instance(&ext)).unwrap(), ext);
        }
    }

    fn sample_text() -> String {
        let inst = generate_three_tier(0, &ThreeTierConfig::default()).unwrap();
        save_instance(&inst)
    }

    #[test]
    fn missing_capacity_names_the_arc() {
        let mut v: serde_json::Value = serde_json::from_str(&sample_text()).unwrap();
        v["arcs"][2].as_object_mut().unwrap().remove("capacity");
        let err = load_instance(&v.to_string()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("arcs[2]") && msg.contains("capacity"), "{msg}");
        assert!(msg.contains("e1->a2"), "{msg}");
    }

    #[test]
    fn unknown_vnf_in_chain_is_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&sample_text()).unwrap();
        v["demands"][0]["chain"][1] = "ids".into();
        let err = load_instance(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("unknown VNF ids"), "{err}");
    }

    #[test]
    fn schema_version_is_mandatory() {
        let mut v: serde_json::Value = serde_json::from_str(&sample_text()).unwrap();
        v.as_object_mut().unwrap().remove("schema_version");
        let err = load_instance(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("schema_version"));
        v["schema_version"] = 99.into();
        assert!(load_instance(&v.to_string()).is_err());
    }
}
