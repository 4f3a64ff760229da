//! Turns an instance and a [`VariantSpec`] into a [`MilpModel`].

use std::collections::BTreeMap;

use super::model::{Family, MilpModel, Sense, VarId, VarKind, VarTag};
use super::variant::{Extensions, Objective, PlacementRule, VariantSpec};
use crate::error::{Error, Result};
use crate::instance::{
    big_m, demand_bandwidth_bounds, DemandId, Instance, LatencyProfile, NodeId, VnfId,
};

/// Builds the MILP for `spec` on `instance`.
///
/// Compression variants need the extended graph (see
/// [`crate::instance::extend_graph`]); latency variants need every catalog entry
/// to follow `spec.regime`.
pub fn build_model(instance: &Instance, spec: &VariantSpec) -> Result<MilpModel> {
    instance.validate()?;
    check_compatibility(instance, spec)?;
    check_rules(instance, &spec.extensions)?;
    let mut b = Builder::new(instance, spec)?;
    b.variables();
    b.routing_rows()?;
    b.placement_rows()?;
    if spec.variant.has_latency() {
        b.latency_rows()?;
    }
    if spec.variant.has_compression() {
        b.compression_rows()?;
    }
    b.extension_rows()?;
    b.objective_rows()?;
    Ok(b.m)
}

fn check_compatibility(instance: &Instance, spec: &VariantSpec) -> Result<()> {
    let variant = spec.variant;
    if variant.has_compression() && !instance.topology.is_extended() {
        return Err(Error::Incompatible(format!(
            "{variant} tracks bit-rates per arc and needs the extended graph; extend the instance first"
        )));
    }
    if variant.has_latency() {
        if let Some(v) = instance
            .vnfs
            .iter()
            .find(|v| v.latency.regime() != spec.regime)
        {
            return Err(Error::Incompatible(format!(
                "{variant} with the {} regime: VNF {} has a {} latency profile",
                spec.regime.as_str(),
                v.name,
                v.latency.regime().as_str()
            )));
        }
    }
    match spec.objective {
        Objective::NfvWithUtilizationCap { u_star, alpha } => {
            if !(u_star.is_finite() && alpha.is_finite() && u_star >= 0.0 && alpha >= 0.0) {
                return Err(Error::Config(
                    "utilization cap must be finite and non-negative".into(),
                ));
            }
        }
        Objective::Te | Objective::Nfv | Objective::CopyCountCap { .. } => {}
    }
    for &(a, b) in &spec.extensions.isolation {
        if a.0 >= instance.demands.len() || b.0 >= instance.demands.len() {
            return Err(Error::Config(format!(
                "isolation pair ({a}, {b}) names an unknown demand"
            )));
        }
        if a == b {
            return Err(Error::Contradiction(format!(
                "demand {} cannot be isolated from itself",
                instance.demand(a).name
            )));
        }
    }
    Ok(())
}

/// Rejects placement rules that no assignment can satisfy.
fn check_rules(instance: &Instance, ext: &Extensions) -> Result<()> {
    let topo = &instance.topology;
    let nf = instance.vnfs.len();
    let nn = topo.nodes().len();
    let check_vnf = |f: VnfId| {
        if f.0 >= nf {
            Err(Error::Config(format!(
                "placement rule names unknown VNF {f}"
            )))
        } else {
            Ok(())
        }
    };
    let check_node = |i: NodeId| {
        if i.0 >= nn || !topo.node(i).is_nfvi() {
            Err(Error::Config(format!(
                "placement rule names {i}, which is not an NFVI node"
            )))
        } else {
            Ok(())
        }
    };
    // Types bound by `Together` behave as one group.
    let mut group: Vec<usize> = (0..nf).collect();
    fn root(g: &mut [usize], mut a: usize) -> usize {
        while g[a] != a {
            g[a] = g[g[a]];
            a = g[a];
        }
        a
    }
    for r in &ext.rules {
        match r {
            PlacementRule::Together { a, b } | PlacementRule::Apart { a, b } => {
                check_vnf(*a)?;
                check_vnf(*b)?;
            }
            PlacementRule::Pin { vnf, node } | PlacementRule::Forbid { vnf, node } => {
                check_vnf(*vnf)?;
                check_node(*node)?;
            }
            PlacementRule::PinAny { vnf, nodes } => {
                check_vnf(*vnf)?;
                for &n in nodes {
                    check_node(n)?;
                }
            }
            PlacementRule::Spread { vnf, .. } => check_vnf(*vnf)?,
        }
        if let PlacementRule::Together { a, b } = r {
            let (ra, rb) = (root(&mut group, a.0), root(&mut group, b.0));
            group[ra] = rb;
        }
    }
    let groups: Vec<usize> = (0..nf).map(|f| root(&mut group, f)).collect();
    let name = |f: usize| instance.vnfs[f].name.as_str();
    let node_name = |i: NodeId| topo.node(i).name.as_str();

    // allowed[g][i]: every member of group g may be present on node i.
    let mut allowed: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    for f in 0..nf {
        let row = allowed.entry(groups[f]).or_insert_with(|| vec![true; nn]);
        for i in topo.node_ids() {
            if instance.max_copies(i, VnfId(f)) == 0 {
                row[i.0] = false;
            }
        }
    }
    let mut pinned: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    let mut required: Vec<bool> = vec![false; nf];
    for d in &instance.demands {
        for f in &d.chain {
            required[groups[f.0]] = true;
        }
    }
    for r in &ext.rules {
        if let PlacementRule::Forbid { vnf, node } = r {
            allowed.get_mut(&groups[vnf.0]).unwrap()[node.0] = false;
        }
    }
    for r in &ext.rules {
        match r {
            PlacementRule::Pin { vnf, node } => {
                let g = groups[vnf.0];
                if !allowed[&g][node.0] {
                    return Err(Error::Contradiction(format!(
                        "{} is pinned to {} but cannot be placed there",
                        name(vnf.0),
                        node_name(*node)
                    )));
                }
                pinned.entry(g).or_insert_with(|| vec![false; nn])[node.0] = true;
                required[g] = true;
            }
            PlacementRule::PinAny { vnf, nodes } => {
                let g = groups[vnf.0];
                if !nodes.iter().any(|n| allowed[&g][n.0]) {
                    return Err(Error::Contradiction(format!(
                        "{} must sit on one of {} nodes, none of which can host it",
                        name(vnf.0),
                        nodes.len()
                    )));
                }
                required[g] = true;
            }
            PlacementRule::Spread { vnf, min_nodes } => {
                let g = groups[vnf.0];
                let avail = allowed[&g].iter().filter(|&&a| a).count();
                if (*min_nodes as usize) > avail {
                    return Err(Error::Contradiction(format!(
                        "{} must be present on {min_nodes} nodes but only {avail} can host it",
                        name(vnf.0)
                    )));
                }
                if *min_nodes > 0 {
                    required[g] = true;
                }
            }
            _ => {}
        }
    }
    for r in &ext.rules {
        if let PlacementRule::PinAny { vnf, nodes } = r {
            let g = groups[vnf.0];
            if let Some(p) = pinned.get(&g) {
                let hits = nodes.iter().filter(|n| p[n.0]).count();
                if hits > 1 {
                    return Err(Error::Contradiction(format!(
                        "{} is pinned to {hits} nodes of a set it may occupy only once",
                        name(vnf.0)
                    )));
                }
            }
        }
    }
    for (f, &g) in groups.iter().enumerate() {
        if required[g] && !allowed[&g].iter().any(|&a| a) {
            return Err(Error::Contradiction(format!(
                "{} is needed but no node may host it",
                name(f)
            )));
        }
    }
    for r in &ext.rules {
        if let PlacementRule::Apart { a, b } = r {
            let (ga, gb) = (groups[a.0], groups[b.0]);
            if ga == gb && required[ga] {
                return Err(Error::Contradiction(format!(
                    "{} and {} must be both together and apart",
                    name(a.0),
                    name(b.0)
                )));
            }
            if let (Some(pa), Some(pb)) = (pinned.get(&ga), pinned.get(&gb)) {
                if let Some(i) = (0..nn).find(|&i| pa[i] && pb[i]) {
                    return Err(Error::Contradiction(format!(
                        "{} and {} are both pinned to {} but must be apart",
                        name(a.0),
                        name(b.0),
                        node_name(NodeId(i))
                    )));
                }
            }
        }
    }
    Ok(())
}

struct Builder<'a> {
    inst: &'a Instance,
    spec: &'a VariantSpec,
    m: MilpModel,
    /// `(b_min, b_max)` per demand.
    bounds: Vec<(f64, f64)>,
    /// NFVI nodes in index order.
    nfvi: Vec<NodeId>,
}

impl<'a> Builder<'a> {
    fn new(inst: &'a Instance, spec: &'a VariantSpec) -> Result<Self> {
        let bounds = inst
            .demands
            .iter()
            .map(|d| demand_bandwidth_bounds(d, &inst.vnfs))
            .collect::<Result<_>>()?;
        Ok(Builder {
            inst,
            spec,
            m: MilpModel::new(),
            bounds,
            nfvi: inst.topology.nfvi_nodes().collect(),
        })
    }

    fn var(&self, tag: VarTag) -> VarId {
        self.m.var(tag).expect("variable created before use")
    }

    fn opt(&self, tag: VarTag) -> Option<VarId> {
        self.m.var(tag)
    }

    /// Adds a row, skipping empty ones that hold trivially.
    fn row(
        &mut self,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
        family: Family,
    ) -> Result<()> {
        if terms.is_empty() {
            let ok = match sense {
                Sense::Le => 0.0 <= rhs,
                Sense::Ge => 0.0 >= rhs,
                Sense::Eq => rhs == 0.0,
            };
            if ok {
                return Ok(());
            }
            return Err(Error::Contradiction(format!(
                "a {family} row has no variables and cannot hold"
            )));
        }
        self.m.add_constraint(terms, sense, rhs, family);
        Ok(())
    }

    fn copies(&self, i: NodeId, f: VnfId) -> u32 {
        self.inst.max_copies(i, f)
    }

    fn big_n(&self) -> f64 {
        self.inst.topology.nodes().len() as f64
    }

    fn variables(&mut self) {
        let inst = self.inst;
        let topo = &inst.topology;
        let variant = self.spec.variant;
        for k in inst.demand_ids() {
            for a in topo.arc_ids() {
                self.m.add_tagged(
                    VarTag::Route { demand: k, arc: a },
                    VarKind::Binary,
                    0.0,
                    1.0,
                );
            }
        }
        for &i in &self.nfvi {
            for f in inst.vnf_ids() {
                for n in 0..self.copies(i, f) {
                    self.m.add_tagged(
                        VarTag::Open {
                            node: i,
                            vnf: f,
                            copy: n,
                        },
                        VarKind::Binary,
                        0.0,
                        1.0,
                    );
                }
            }
        }
        for k in inst.demand_ids() {
            for &f in &inst.demand(k).chain {
                for &i in &self.nfvi {
                    for n in 0..self.copies(i, f) {
                        let tag = VarTag::Use {
                            demand: k,
                            node: i,
                            vnf: f,
                            copy: n,
                        };
                        self.m.add_tagged(tag, VarKind::Binary, 0.0, 1.0);
                    }
                }
            }
        }
        for k in inst.demand_ids() {
            for &f in &inst.demand(k).chain {
                for &i in &self.nfvi {
                    if self.copies(i, f) > 0 {
                        let tag = VarTag::Serve {
                            demand: k,
                            node: i,
                            vnf: f,
                        };
                        self.m.add_tagged(tag, VarKind::Binary, 0.0, 1.0);
                    }
                }
            }
        }
        let big_n = self.big_n();
        for k in inst.demand_ids() {
            for i in topo.node_ids() {
                self.m.add_tagged(
                    VarTag::Position { demand: k, node: i },
                    VarKind::Continuous,
                    0.0,
                    big_n,
                );
            }
        }
        self.m.add_tagged(
            VarTag::MaxUtilization,
            VarKind::Continuous,
            0.0,
            f64::INFINITY,
        );
        if variant.has_latency() {
            for k in inst.demand_ids() {
                let bound = inst.demand(k).latency_bound;
                for &f in &inst.demand(k).chain {
                    for &i in &self.nfvi {
                        if self.copies(i, f) > 0 {
                            let tag = VarTag::VnfLatency {
                                demand: k,
                                node: i,
                                vnf: f,
                            };
                            self.m.add_tagged(tag, VarKind::Continuous, 0.0, bound);
                        }
                    }
                }
            }
        }
        if variant.has_compression() {
            for k in inst.demand_ids() {
                let (_, b_max) = self.bounds[k.0];
                for a in topo.arc_ids() {
                    self.m.add_tagged(
                        VarTag::Flow { demand: k, arc: a },
                        VarKind::Continuous,
                        0.0,
                        b_max,
                    );
                }
            }
            for k in inst.demand_ids() {
                for &f in &inst.demand(k).chain {
                    for &i in &self.nfvi {
                        let big = self.copy_flow_m(k, i);
                        for n in 0..self.copies(i, f) {
                            let tag = VarTag::CopyFlow {
                                demand: k,
                                node: i,
                                vnf: f,
                                copy: n,
                            };
                            self.m.add_tagged(tag, VarKind::Continuous, 0.0, big);
                        }
                    }
                }
            }
        }
        if !self.spec.extensions.rules.is_empty() {
            for &i in &self.nfvi {
                for f in inst.vnf_ids() {
                    self.m.add_tagged(
                        VarTag::Presence { node: i, vnf: f },
                        VarKind::Binary,
                        0.0,
                        1.0,
                    );
                }
            }
        }
    }

    /// Big-M of the copy-flow linearization: the largest flow that can enter `i`
    /// for demand `k`.
    fn copy_flow_m(&self, k: DemandId, i: NodeId) -> f64 {
        big_m(i, &self.inst.topology).max(self.bounds[k.0].1)
    }

    /// Load terms `sum_d b_d z` (or `sum_d psi` with compression) of one copy.
    fn copy_load(&self, i: NodeId, f: VnfId, n: u32) -> Vec<(VarId, f64)> {
        let cd = self.spec.variant.has_compression();
        let mut terms = Vec::new();
        for d in self.inst.demand_ids() {
            if !self.inst.demand(d).requests(f) {
                continue;
            }
            if cd {
                let tag = VarTag::CopyFlow {
                    demand: d,
                    node: i,
                    vnf: f,
                    copy: n,
                };
                terms.push((self.var(tag), 1.0));
            } else {
                let tag = VarTag::Use {
                    demand: d,
                    node: i,
                    vnf: f,
                    copy: n,
                };
                terms.push((self.var(tag), self.inst.demand(d).bandwidth));
            }
        }
        terms
    }

    /// Flow balance, link utilization, positions.
    fn routing_rows(&mut self) -> Result<()> {
        let inst = self.inst;
        let topo = &inst.topology;
        for k in inst.demand_ids() {
            let d = inst.demand(k);
            for i in topo.node_ids() {
                let mut terms = Vec::new();
                for &a in topo.outgoing(i) {
                    terms.push((self.var(VarTag::Route { demand: k, arc: a }), 1.0));
                }
                for &a in topo.incoming(i) {
                    terms.push((self.var(VarTag::Route { demand: k, arc: a }), -1.0));
                }
                let rhs = if i == d.origin {
                    1.0
                } else if i == d.destination {
                    -1.0
                } else {
                    0.0
                };
                self.row(terms, Sense::Eq, rhs, Family::FlowBalance)?;
            }
        }
        let u = self.var(VarTag::MaxUtilization);
        let cd = self.spec.variant.has_compression();
        for a in topo.arc_ids() {
            let mut terms = Vec::new();
            for k in inst.demand_ids() {
                if cd {
                    terms.push((self.var(VarTag::Flow { demand: k, arc: a }), 1.0));
                } else {
                    terms.push((
                        self.var(VarTag::Route { demand: k, arc: a }),
                        inst.demand(k).bandwidth,
                    ));
                }
            }
            terms.push((u, -topo.arc(a).capacity));
            let family = if cd {
                Family::FlowUtilization
            } else {
                Family::LinkUtilization
            };
            self.row(terms, Sense::Le, 0.0, family)?;
        }
        let big_n = self.big_n();
        for k in inst.demand_ids() {
            for a in topo.arc_ids() {
                let arc = topo.arc(a);
                let x = self.var(VarTag::Route { demand: k, arc: a });
                let pj = self.var(VarTag::Position {
                    demand: k,
                    node: arc.to,
                });
                let pi = self.var(VarTag::Position {
                    demand: k,
                    node: arc.from,
                });
                // pi_j >= pi_i + x - N (1 - x)
                self.row(
                    vec![(pj, 1.0), (pi, -1.0), (x, -(1.0 + big_n))],
                    Sense::Ge,
                    -big_n,
                    Family::NoSubtour,
                )?;
            }
        }
        Ok(())
    }

    /// Capacity, assignment, on-path, chain order, symmetry.
    fn placement_rows(&mut self) -> Result<()> {
        let inst = self.inst;
        let topo = &inst.topology;
        let cd = self.spec.variant.has_compression();
        let nfvi = self.nfvi.clone();
        for &i in &nfvi {
            for r in 0..topo.resources().len() {
                let mut terms = Vec::new();
                for f in inst.vnf_ids() {
                    let req = inst.vnf(f).resources[r];
                    for n in 0..self.copies(i, f) {
                        terms.push((
                            self.var(VarTag::Open {
                                node: i,
                                vnf: f,
                                copy: n,
                            }),
                            req,
                        ));
                    }
                }
                if self.spec.extensions.core_router {
                    for k in inst.demand_ids() {
                        for &a in topo.outgoing(i).iter().chain(topo.incoming(i)) {
                            if cd {
                                terms.push((self.var(VarTag::Flow { demand: k, arc: a }), 1.0));
                            } else {
                                terms.push((
                                    self.var(VarTag::Route { demand: k, arc: a }),
                                    inst.demand(k).bandwidth,
                                ));
                            }
                        }
                    }
                }
                self.row(terms, Sense::Le, topo.capacity(i, r), Family::NodeCapacity)?;
            }
        }
        for k in inst.demand_ids() {
            for &f in &inst.demand(k).chain {
                let mut terms = Vec::new();
                for &i in &nfvi {
                    for n in 0..self.copies(i, f) {
                        terms.push((self.use_var(k, i, f, n), 1.0));
                    }
                }
                self.row(terms, Sense::Eq, 1.0, Family::AssignOnce)?;
            }
        }
        for k in inst.demand_ids() {
            for &f in &inst.demand(k).chain {
                for &i in &nfvi {
                    for n in 0..self.copies(i, f) {
                        let y = self.var(VarTag::Open {
                            node: i,
                            vnf: f,
                            copy: n,
                        });
                        self.row(
                            vec![(self.use_var(k, i, f, n), 1.0), (y, -1.0)],
                            Sense::Le,
                            0.0,
                            Family::CopyOpen,
                        )?;
                    }
                }
            }
        }
        for k in inst.demand_ids() {
            for &f in &inst.demand(k).chain {
                for &i in &nfvi {
                    let c = self.copies(i, f);
                    if c == 0 {
                        continue;
                    }
                    let mut terms: Vec<_> =
                        (0..c).map(|n| (self.use_var(k, i, f, n), 1.0)).collect();
                    for &a in topo.incoming(i) {
                        terms.push((self.var(VarTag::Route { demand: k, arc: a }), -1.0));
                    }
                    self.row(terms, Sense::Le, 0.0, Family::OnPath)?;
                }
            }
        }
        for k in inst.demand_ids() {
            for &f in &inst.demand(k).chain {
                for &i in &nfvi {
                    let c = self.copies(i, f);
                    if c == 0 {
                        continue;
                    }
                    let mut terms: Vec<_> =
                        (0..c).map(|n| (self.use_var(k, i, f, n), 1.0)).collect();
                    terms.push((self.serve_var(k, i, f), -1.0));
                    self.row(terms, Sense::Eq, 0.0, Family::ServeLink)?;
                }
            }
        }
        let big = self.big_n() + 1.0;
        for k in inst.demand_ids() {
            for (f1, f2) in inst.demand(k).precedences() {
                if f1 == f2 {
                    continue;
                }
                for &i in &nfvi {
                    let Some(w1) = self.opt(VarTag::Serve {
                        demand: k,
                        node: i,
                        vnf: f1,
                    }) else {
                        continue;
                    };
                    for &j in &nfvi {
                        if i == j {
                            continue;
                        }
                        let Some(w2) = self.opt(VarTag::Serve {
                            demand: k,
                            node: j,
                            vnf: f2,
                        }) else {
                            continue;
                        };
                        let pi = self.var(VarTag::Position { demand: k, node: i });
                        let pj = self.var(VarTag::Position { demand: k, node: j });
                        // pi_j >= pi_i - (N + 1)(2 - w1 - w2)
                        self.row(
                            vec![(pj, 1.0), (pi, -1.0), (w1, -big), (w2, -big)],
                            Sense::Ge,
                            -2.0 * big,
                            Family::ChainOrder,
                        )?;
                    }
                }
            }
        }
        if self.spec.symmetry_breaking {
            for &i in &nfvi {
                for f in inst.vnf_ids() {
                    for n in 1..self.copies(i, f) {
                        let prev = self.var(VarTag::Open {
                            node: i,
                            vnf: f,
                            copy: n - 1,
                        });
                        let cur = self.var(VarTag::Open {
                            node: i,
                            vnf: f,
                            copy: n,
                        });
                        self.row(
                            vec![(prev, 1.0), (cur, -1.0)],
                            Sense::Ge,
                            0.0,
                            Family::SymmetryBreak,
                        )?;
                    }
                }
            }
        }
        Ok(())
    }

    fn use_var(&self, k: DemandId, i: NodeId, f: VnfId, n: u32) -> VarId {
        self.var(VarTag::Use {
            demand: k,
            node: i,
            vnf: f,
            copy: n,
        })
    }

    fn serve_var(&self, k: DemandId, i: NodeId, f: VnfId) -> VarId {
        self.var(VarTag::Serve {
            demand: k,
            node: i,
            vnf: f,
        })
    }

    fn latency_rows(&mut self) -> Result<()> {
        let inst = self.inst;
        let topo = &inst.topology;
        let nfvi = self.nfvi.clone();
        for k in inst.demand_ids() {
            let d = inst.demand(k);
            let mut terms = Vec::new();
            for a in topo.arc_ids() {
                terms.push((
                    self.var(VarTag::Route { demand: k, arc: a }),
                    topo.arc(a).latency,
                ));
            }
            for &f in &d.chain {
                for &i in &nfvi {
                    if let Some(l) = self.opt(VarTag::VnfLatency {
                        demand: k,
                        node: i,
                        vnf: f,
                    }) {
                        terms.push((l, 1.0));
                    }
                }
            }
            self.row(terms, Sense::Le, d.latency_bound, Family::LatencyBudget)?;
        }
        for f in inst.vnf_ids() {
            let requesters: Vec<DemandId> = inst
                .demand_ids()
                .filter(|&k| inst.demand(k).requests(f))
                .collect();
            if requesters.is_empty() {
                continue;
            }
            match inst.vnf(f).latency.clone() {
                LatencyProfile::Standard { pieces } => {
                    // Large enough to switch off the row for demands not using the
                    // copy: any user keeps the curve below its own bound.
                    let max_bound = requesters
                        .iter()
                        .map(|&k| inst.demand(k).latency_bound)
                        .fold(0.0, f64::max);
                    let big = pieces.iter().map(|p| p.intercept).fold(max_bound, f64::max);
                    for &k in &requesters {
                        for &i in &nfvi {
                            for n in 0..self.copies(i, f) {
                                let l = self.var(VarTag::VnfLatency {
                                    demand: k,
                                    node: i,
                                    vnf: f,
                                });
                                let z = self.use_var(k, i, f, n);
                                let load = self.copy_load(i, f, n);
                                for p in &pieces {
                                    // l >= slope * load + intercept - M (1 - z)
                                    let mut terms = vec![(l, 1.0), (z, -big)];
                                    terms.extend(load.iter().map(|&(v, c)| (v, -p.slope * c)));
                                    self.row(
                                        terms,
                                        Sense::Ge,
                                        p.intercept - big,
                                        Family::LoadLatency,
                                    )?;
                                }
                            }
                        }
                    }
                }
                LatencyProfile::Fastpath {
                    latency,
                    max_bandwidth,
                } => {
                    for &k in &requesters {
                        for &i in &nfvi {
                            if self.copies(i, f) == 0 {
                                continue;
                            }
                            let l = self.var(VarTag::VnfLatency {
                                demand: k,
                                node: i,
                                vnf: f,
                            });
                            let w = self.serve_var(k, i, f);
                            self.row(
                                vec![(l, 1.0), (w, -latency)],
                                Sense::Eq,
                                0.0,
                                Family::FixedLatency,
                            )?;
                        }
                    }
                    for &i in &nfvi {
                        for n in 0..self.copies(i, f) {
                            let load = self.copy_load(i, f, n);
                            self.row(load, Sense::Le, max_bandwidth, Family::CopyBandwidth)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn compression_rows(&mut self) -> Result<()> {
        let inst = self.inst;
        let topo = &inst.topology;
        let nfvi = self.nfvi.clone();
        let flow = |b: &Self, k: DemandId, a| b.var(VarTag::Flow { demand: k, arc: a });
        for k in inst.demand_ids() {
            let d = inst.demand(k);
            let out_rate: f64 = d.bandwidth
                * d.chain
                    .iter()
                    .map(|f| inst.vnf(*f).compression)
                    .product::<f64>();
            for i in topo.node_ids() {
                if topo.node(i).is_nfvi() {
                    continue;
                }
                let mut terms: Vec<_> = topo
                    .outgoing(i)
                    .iter()
                    .map(|&a| (flow(self, k, a), 1.0))
                    .collect();
                terms.extend(topo.incoming(i).iter().map(|&a| (flow(self, k, a), -1.0)));
                let rhs = if i == d.origin {
                    d.bandwidth
                } else if i == d.destination {
                    -out_rate
                } else {
                    0.0
                };
                self.row(terms, Sense::Eq, rhs, Family::AccessBalance)?;
            }
        }
        for k in inst.demand_ids() {
            let d = inst.demand(k);
            for &i in &nfvi {
                let mut terms: Vec<_> = topo
                    .outgoing(i)
                    .iter()
                    .map(|&a| (flow(self, k, a), 1.0))
                    .collect();
                terms.extend(topo.incoming(i).iter().map(|&a| (flow(self, k, a), -1.0)));
                for &f in &d.chain {
                    let mu = inst.vnf(f).compression;
                    for n in 0..self.copies(i, f) {
                        let psi = self.var(VarTag::CopyFlow {
                            demand: k,
                            node: i,
                            vnf: f,
                            copy: n,
                        });
                        terms.push((psi, -(mu - 1.0)));
                    }
                }
                if d.origin == i || d.destination == i {
                    return Err(Error::Incompatible(format!(
                        "demand {} starts or ends on NFVI node {}; extend the instance first",
                        d.name,
                        topo.node(i).name
                    )));
                }
                self.row(terms, Sense::Eq, 0.0, Family::CompressionBalance)?;
            }
        }
        for k in inst.demand_ids() {
            let (b_min, b_max) = self.bounds[k.0];
            for a in topo.arc_ids() {
                let x = self.var(VarTag::Route { demand: k, arc: a });
                let phi = flow(self, k, a);
                self.row(
                    vec![(phi, 1.0), (x, -b_max)],
                    Sense::Le,
                    0.0,
                    Family::FlowUpper,
                )?;
            }
            for a in topo.arc_ids() {
                let x = self.var(VarTag::Route { demand: k, arc: a });
                let phi = flow(self, k, a);
                self.row(
                    vec![(phi, 1.0), (x, -b_min)],
                    Sense::Ge,
                    0.0,
                    Family::FlowLower,
                )?;
            }
        }
        let printed = self.spec.printed_copy_flow_bound;
        for family in [
            Family::CopyFlowUpper,
            Family::CopyFlowLower,
            Family::CopyFlowActive,
        ] {
            for k in inst.demand_ids() {
                for &f in &inst.demand(k).chain {
                    for &i in &nfvi {
                        let big = self.copy_flow_m(k, i);
                        for n in 0..self.copies(i, f) {
                            let psi = self.var(VarTag::CopyFlow {
                                demand: k,
                                node: i,
                                vnf: f,
                                copy: n,
                            });
                            let z = self.use_var(k, i, f, n);
                            let inflow = topo.incoming(i).iter().map(|&a| (flow(self, k, a), -1.0));
                            match family {
                                Family::CopyFlowUpper => {
                                    // psi <= inflow + M (1 - z)
                                    let mut t = vec![(psi, 1.0), (z, big)];
                                    t.extend(inflow);
                                    self.row(t, Sense::Le, big, family)?;
                                }
                                Family::CopyFlowLower if printed => {
                                    // psi >= inflow + M (1 - z)
                                    let mut t = vec![(psi, 1.0), (z, big)];
                                    t.extend(inflow);
                                    self.row(t, Sense::Ge, big, family)?;
                                }
                                Family::CopyFlowLower => {
                                    // psi >= inflow - M (1 - z)
                                    let mut t = vec![(psi, 1.0), (z, -big)];
                                    t.extend(inflow);
                                    self.row(t, Sense::Ge, -big, family)?;
                                }
                                _ => {
                                    self.row(vec![(psi, 1.0), (z, -big)], Sense::Le, 0.0, family)?;
                                }
                            }
                        }
                    }
                }
            }
        }
        for k in inst.demand_ids() {
            let d = inst.demand(k);
            for &i in &nfvi {
                let mut terms = Vec::new();
                for &f in &d.chain {
                    if inst.vnf(f).compression == 1.0 {
                        continue;
                    }
                    for n in 0..self.copies(i, f) {
                        terms.push((self.use_var(k, i, f, n), 1.0));
                    }
                }
                self.row(terms, Sense::Le, 1.0, Family::OneCompression)?;
            }
        }
        Ok(())
    }

    fn presence(&self, i: NodeId, f: VnfId) -> VarId {
        self.var(VarTag::Presence { node: i, vnf: f })
    }

    fn extension_rows(&mut self) -> Result<()> {
        let inst = self.inst;
        let ext = &self.spec.extensions;
        let nfvi = self.nfvi.clone();
        if !ext.rules.is_empty() {
            for &i in &nfvi {
                for f in inst.vnf_ids() {
                    let c = self.copies(i, f);
                    let v = self.presence(i, f);
                    let ys: Vec<_> = (0..c)
                        .map(|n| {
                            self.var(VarTag::Open {
                                node: i,
                                vnf: f,
                                copy: n,
                            })
                        })
                        .collect();
                    if c > 0 {
                        let mut t: Vec<_> = ys.iter().map(|&y| (y, 1.0)).collect();
                        t.push((v, -(c as f64)));
                        self.row(t, Sense::Le, 0.0, Family::PresenceLink)?;
                    }
                    let mut t: Vec<_> = ys.iter().map(|&y| (y, -1.0)).collect();
                    t.push((v, 1.0));
                    self.row(t, Sense::Le, 0.0, Family::PresenceLink)?;
                }
            }
        }
        for rule in &ext.rules {
            match rule {
                PlacementRule::Together { a, b } => {
                    for &i in &nfvi {
                        let t = vec![(self.presence(i, *a), 1.0), (self.presence(i, *b), -1.0)];
                        self.row(t, Sense::Eq, 0.0, Family::Affinity)?;
                    }
                }
                PlacementRule::Apart { a, b } => {
                    for &i in &nfvi {
                        let t = vec![(self.presence(i, *a), 1.0), (self.presence(i, *b), 1.0)];
                        self.row(t, Sense::Le, 1.0, Family::AntiAffinity)?;
                    }
                }
                PlacementRule::Pin { vnf, node } => {
                    self.row(
                        vec![(self.presence(*node, *vnf), 1.0)],
                        Sense::Eq,
                        1.0,
                        Family::Pin,
                    )?;
                }
                PlacementRule::PinAny { vnf, nodes } => {
                    let t = nodes
                        .iter()
                        .map(|&i| (self.presence(i, *vnf), 1.0))
                        .collect();
                    self.row(t, Sense::Eq, 1.0, Family::Pin)?;
                }
                PlacementRule::Forbid { vnf, node } => {
                    self.row(
                        vec![(self.presence(*node, *vnf), 1.0)],
                        Sense::Eq,
                        0.0,
                        Family::Forbid,
                    )?;
                }
                PlacementRule::Spread { vnf, min_nodes } => {
                    let t = nfvi
                        .iter()
                        .map(|&i| (self.presence(i, *vnf), 1.0))
                        .collect();
                    self.row(t, Sense::Ge, *min_nodes as f64, Family::Spread)?;
                }
            }
        }
        for &(k1, k2) in &ext.isolation {
            for &f in &inst.demand(k1).chain {
                if !inst.demand(k2).requests(f) {
                    continue;
                }
                for &i in &nfvi {
                    for n in 0..self.copies(i, f) {
                        let t = vec![
                            (self.use_var(k1, i, f, n), 1.0),
                            (self.use_var(k2, i, f, n), 1.0),
                        ];
                        self.row(t, Sense::Le, 1.0, Family::Isolation)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn nfv_cost_terms(&self) -> Vec<(VarId, f64)> {
        let mut terms = Vec::new();
        for &i in &self.nfvi {
            for f in self.inst.vnf_ids() {
                let cost = self.inst.cost_of(f);
                for n in 0..self.copies(i, f) {
                    terms.push((
                        self.var(VarTag::Open {
                            node: i,
                            vnf: f,
                            copy: n,
                        }),
                        cost,
                    ));
                }
            }
        }
        terms
    }

    fn objective_rows(&mut self) -> Result<()> {
        let u = self.var(VarTag::MaxUtilization);
        match self.spec.objective {
            Objective::Te => self.m.set_objective(vec![(u, 1.0)]),
            Objective::Nfv => {
                let t = self.nfv_cost_terms();
                self.m.set_objective(t);
            }
            Objective::NfvWithUtilizationCap { u_star, alpha } => {
                self.row(
                    vec![(u, 1.0)],
                    Sense::Le,
                    u_star + alpha,
                    Family::UtilizationCap,
                )?;
                let t = self.nfv_cost_terms();
                self.m.set_objective(t);
            }
            Objective::CopyCountCap { cap } => {
                let ys: Vec<_> = self
                    .nfv_cost_terms()
                    .into_iter()
                    .map(|(v, _)| (v, 1.0))
                    .collect();
                self.row(ys, Sense::Le, cap as f64, Family::CopyCountCap)?;
                let t = self.nfv_cost_terms();
                self.m.set_objective(t);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::samples;
    use crate::instance::Regime;
    use crate::milp::{VarKind, Variant};
    use crate::solver::{check_feasible, solve, SolveStatus, SolverConfig};

    #[test]
    fn line_basic_counts() {
        let inst = samples::line(Regime::Fastpath);
        let m = build_model(&inst, &VariantSpec::basic(Objective::Te)).unwrap();
        assert_eq!(m.count_kind(VarKind::Binary), 13);
        assert_eq!(m.count_kind(VarKind::Continuous), 4);
        let sym = m.count_symbols();
        assert_eq!(
            (sym["x"], sym["y"], sym["z"], sym["w"], sym["pi"], sym["U"]),
            (4, 3, 3, 3, 3, 1)
        );
    }

    #[test]
    fn fastpath_latency_families() {
        let inst = samples::line(Regime::Fastpath);
        let basic = build_model(&inst, &VariantSpec::basic(Objective::Te)).unwrap();
        let lat = build_model(
            &inst,
            &VariantSpec::new(Variant::BasicLat, Regime::Fastpath, Objective::Te),
        )
        .unwrap();
        assert_eq!(lat.num_vars() - basic.num_vars(), 3);
        let fams = lat.count_families();
        for f in [
            Family::LatencyBudget,
            Family::FixedLatency,
            Family::CopyBandwidth,
        ] {
            assert!(fams.contains_key(&f), "{f:?}");
            assert!(!basic.count_families().contains_key(&f));
        }
        assert!(!fams.contains_key(&Family::LoadLatency));
    }

    #[test]
    fn line_and_diamond_optima() {
        let cfg = SolverConfig::default();
        let m = build_model(
            &samples::line(Regime::Fastpath),
            &VariantSpec::basic(Objective::Te),
        )
        .unwrap();
        let r = solve(&m, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective.unwrap() - 0.1).abs() < 1e-9);
        let m = build_model(&samples::diamond(), &VariantSpec::basic(Objective::Te)).unwrap();
        let r = solve(&m, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective.unwrap() - 0.6).abs() < 1e-9);
    }

    #[test]
    fn zero_assignment_breaks_flow_balance_at_endpoints() {
        let inst = samples::line(Regime::Fastpath);
        let m = build_model(&inst, &VariantSpec::basic(Objective::Te)).unwrap();
        let v = check_feasible(&m, &vec![0.0; m.num_vars()]).unwrap();
        let flow: Vec<_> = v.iter().filter(|v| v.tag == "flow").collect();
        assert_eq!(flow.len(), 2);
    }
}
