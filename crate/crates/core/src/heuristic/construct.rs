//! Greedy construction and local search over paths and copy assignments.
//!
//! Every candidate is checked with the encoding-free validator on the
//! sub-instance of the demands routed so far, so the result is feasible by
//! construction whenever one is returned.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::instance::{DemandId, Instance, NodeId, VnfId};
use crate::milp::{Objective, PlacementRule, VariantSpec};
use crate::validate::{evaluate, validate, CopyRef, Solution};

/// Candidate paths kept per demand.
const PATHS_PER_DEMAND: usize = 10;
/// Extra hops allowed over a shortest path.
const HOP_SLACK: usize = 2;
/// Simple paths enumerated per demand before ranking.
const PATH_ENUMERATION_CAP: usize = 5000;
/// Placements tried per path.
const PLACEMENTS_PER_PATH: usize = 120;
/// Validator calls allowed for one insertion.
const CHECKS_PER_INSERT: usize = 4000;
/// Rounds of local search.
const ROUNDS: usize = 8;
/// Greedy runs from shuffled demand orders, besides the bandwidth order.
const RESTARTS: usize = 12;

type Route = (Vec<NodeId>, BTreeMap<VnfId, CopyRef>);

/// Builds a feasible solution for `spec` and improves it by local search.
/// Returns `None` when the greedy fails to route every demand.
pub fn construct(instance: &Instance, spec: &VariantSpec) -> Option<Solution> {
    construct_from(instance, spec, None, DEFAULT_SEED)
}

/// Seed of the demand-order shuffles used by [`construct`].
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Like [`construct`], but also runs the local search from `start` when it
/// is feasible, and shuffles demand orders with `seed`. The result is never
/// worse than `start`.
pub fn construct_from(
    instance: &Instance,
    spec: &VariantSpec,
    start: Option<&Solution>,
    seed: u64,
) -> Option<Solution> {
    let search = Search::new(instance, spec);
    let mut order: Vec<usize> = (0..instance.demands.len()).collect();
    order.sort_by(|&a, &b| {
        instance.demands[b]
            .bandwidth
            .total_cmp(&instance.demands[a].bandwidth)
            .then(a.cmp(&b))
    });
    let mut starts: Vec<(Vec<Option<Route>>, Vec<usize>)> = Vec::new();
    if let Some(sol) = start {
        let routes: Vec<Option<Route>> = (0..instance.demands.len())
            .map(|k| Some((sol.paths.get(k)?.clone(), sol.assignment.get(k)?.clone())))
            .collect();
        starts.push((routes, order.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for run in 0..=RESTARTS {
        let mut o = order.clone();
        if run > 0 {
            o.shuffle(&mut rng);
        }
        if let Some(routes) = search.greedy(&o) {
            starts.push((routes, o));
        }
    }
    let mut best: Option<(Vec<Option<Route>>, Vec<f64>)> = None;
    for (mut routes, o) in starts {
        let Some(mut key) = search.score(&routes) else {
            continue;
        };
        for _ in 0..ROUNDS {
            let before = key.clone();
            search.improve(&mut routes, &mut key, &o);
            if !less(&key, &before) {
                break;
            }
        }
        if best.as_ref().map_or(true, |(_, b)| less(&key, b)) {
            best = Some((routes, key));
        }
    }
    best.map(|(routes, _)| assemble(&routes).1)
}

struct Search<'a> {
    inst: &'a Instance,
    spec: &'a VariantSpec,
    paths: Vec<Vec<Vec<NodeId>>>,
    /// Number of demands with some candidate path entering each node.
    popularity: Vec<f64>,
    te: bool,
}

fn less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > 1e-9 * x.abs().max(y.abs()).max(1.0) {
            return x < y;
        }
    }
    false
}

fn cmp_keys(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    Ordering::Equal
}

/// Solution over all routed demands, with unrouted ones left out, plus the
/// routed demand indices in ascending order.
fn assemble(routes: &[Option<Route>]) -> (Vec<usize>, Solution) {
    let mut sol = Solution::default();
    let mut idx = Vec::new();
    for (k, r) in routes.iter().enumerate() {
        if let Some((p, a)) = r {
            idx.push(k);
            sol.paths.push(p.clone());
            sol.open.extend(a.values().copied());
            sol.assignment.push(a.clone());
        }
    }
    (idx, sol)
}

impl<'a> Search<'a> {
    fn new(inst: &'a Instance, spec: &'a VariantSpec) -> Self {
        let paths: Vec<Vec<Vec<NodeId>>> = inst
            .demands
            .iter()
            .map(|d| candidate_paths(inst, d.origin, d.destination))
            .collect();
        let mut popularity = vec![0.0; inst.topology.nodes().len()];
        for candidates in &paths {
            let nodes: BTreeSet<NodeId> = candidates
                .iter()
                .flat_map(|p| p[1..].iter().copied())
                .collect();
            for n in nodes {
                popularity[n.0] += 1.0;
            }
        }
        Search {
            inst,
            spec,
            paths,
            popularity,
            te: matches!(spec.objective, Objective::Te),
        }
    }

    /// Sub-instance and specification restricted to the demands in `idx`.
    /// Rules that only a complete solution can satisfy are dropped.
    fn restrict(&self, idx: &[usize]) -> (Instance, VariantSpec) {
        let inst = Instance {
            topology: self.inst.topology.clone(),
            vnfs: self.inst.vnfs.clone(),
            demands: idx.iter().map(|&k| self.inst.demands[k].clone()).collect(),
            options: self.inst.options.clone(),
        };
        let mut spec = self.spec.clone();
        let pos = |k: DemandId| idx.iter().position(|&j| j == k.0).map(DemandId);
        spec.extensions.isolation = self
            .spec
            .extensions
            .isolation
            .iter()
            .filter_map(|&(a, b)| Some((pos(a)?, pos(b)?)))
            .collect();
        spec.extensions.rules.retain(|r| {
            matches!(
                r,
                PlacementRule::Apart { .. } | PlacementRule::Forbid { .. }
            )
        });
        (inst, spec)
    }

    /// Objective key of a complete assignment, `None` when infeasible.
    fn score(&self, routes: &[Option<Route>]) -> Option<Vec<f64>> {
        if routes.iter().any(Option::is_none) {
            return None;
        }
        let (_, sol) = assemble(routes);
        let report = validate(self.inst, self.spec, &sol);
        if !report.feasible {
            return None;
        }
        Some(if self.te {
            vec![report.max_utilization, report.nfv_cost]
        } else {
            vec![report.nfv_cost, report.max_utilization]
        })
    }

    fn greedy(&self, order: &[usize]) -> Option<Vec<Option<Route>>> {
        let mut routes: Vec<Option<Route>> = vec![None; self.inst.demands.len()];
        for &k in order {
            routes[k] = Some(self.insert(&routes, k, &BTreeSet::new())?);
        }
        Some(routes)
    }

    /// Cheapest feasible route for demand `k` given the other routed demands.
    /// No new copy is opened on a `(node, vnf)` pair in `closed`.
    fn insert(
        &self,
        routes: &[Option<Route>],
        k: usize,
        closed: &BTreeSet<(NodeId, VnfId)>,
    ) -> Option<Route> {
        let topo = &self.inst.topology;
        let demand = &self.inst.demands[k];
        let (base_idx, base) = assemble(routes);
        let mut load = vec![0.0; topo.arcs().len()];
        let mut copy_load: BTreeMap<CopyRef, f64> = BTreeMap::new();
        if !base_idx.is_empty() {
            let (sub, sub_spec) = self.restrict(&base_idx);
            let eval = evaluate(&sub, &sub_spec, &base);
            load = eval.arc_load;
            copy_load = eval.copy_load;
        }
        let base_u = topo
            .arc_ids()
            .map(|a| load[a.0] / topo.arc(a).capacity)
            .fold(0.0, f64::max);

        let mut candidates: Vec<(Vec<f64>, usize, BTreeMap<VnfId, CopyRef>)> = Vec::new();
        for (pi, path) in self.paths[k].iter().enumerate() {
            let mut own = 0.0f64;
            let mut latency = 0.0;
            for w in path.windows(2) {
                let a = topo.find_arc(w[0], w[1]).expect("candidate path uses arcs");
                own = own.max((load[a.0] + demand.bandwidth) / topo.arc(a).capacity);
                latency += topo.arc(a).latency;
            }
            let u = base_u.max(own);
            for asg in self.placements(
                path,
                demand.chain.as_slice(),
                &demand.precedences(),
                &base,
                &copy_load,
                closed,
            ) {
                let fresh = || asg.values().filter(|c| !base.open.contains(c));
                let added: f64 = fresh().map(|c| self.inst.cost_of(c.vnf)).sum();
                let central: f64 = fresh().map(|c| self.popularity[c.node.0]).sum();
                let key = if self.te {
                    vec![u, own, added, latency, candidates.len() as f64]
                } else {
                    vec![added, u, -central, latency, candidates.len() as f64]
                };
                candidates.push((key, pi, asg));
            }
        }
        candidates.sort_by(|a, b| cmp_keys(&a.0, &b.0));

        let mut idx = base_idx.clone();
        let at = idx.partition_point(|&j| j < k);
        idx.insert(at, k);
        let (sub, sub_spec) = self.restrict(&idx);
        for (_, pi, asg) in candidates.into_iter().take(CHECKS_PER_INSERT) {
            let mut sol = base.clone();
            sol.paths.insert(at, self.paths[k][pi].clone());
            sol.open.extend(asg.values().copied());
            sol.assignment.insert(at, asg.clone());
            if validate(&sub, &sub_spec, &sol).feasible {
                return Some((self.paths[k][pi].clone(), asg));
            }
        }
        None
    }

    /// Copy assignments of `chain` along `path` honoring the precedences.
    /// Each type reuses the least loaded open copy on its node or opens one.
    fn placements(
        &self,
        path: &[NodeId],
        chain: &[VnfId],
        prec: &[(VnfId, VnfId)],
        base: &Solution,
        copy_load: &BTreeMap<CopyRef, f64>,
        closed: &BTreeSet<(NodeId, VnfId)>,
    ) -> Vec<BTreeMap<VnfId, CopyRef>> {
        let options: Vec<Vec<(usize, Vec<CopyRef>)>> = chain
            .iter()
            .map(|&f| {
                (1..path.len())
                    .filter_map(|p| {
                        let n = path[p];
                        let limit = self.inst.max_copies(n, f);
                        if limit == 0 {
                            return None;
                        }
                        let open: Vec<CopyRef> = base
                            .open
                            .iter()
                            .filter(|c| c.node == n && c.vnf == f)
                            .copied()
                            .collect();
                        let mut choices = Vec::new();
                        if let Some(c) = open.iter().min_by(|a, b| {
                            let la = copy_load.get(a).copied().unwrap_or(0.0);
                            let lb = copy_load.get(b).copied().unwrap_or(0.0);
                            la.total_cmp(&lb).then(a.cmp(b))
                        }) {
                            choices.push(*c);
                        }
                        if !closed.contains(&(n, f)) {
                            if let Some(copy) =
                                (0..limit).find(|&i| !open.iter().any(|c| c.copy == i))
                            {
                                choices.push(CopyRef {
                                    node: n,
                                    vnf: f,
                                    copy,
                                });
                            }
                        }
                        (!choices.is_empty()).then_some((p, choices))
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        let mut pos = vec![0usize; chain.len()];
        let mut pick = vec![
            CopyRef {
                node: NodeId(0),
                vnf: VnfId(0),
                copy: 0
            };
            chain.len()
        ];
        fn rec(
            i: usize,
            chain: &[VnfId],
            prec: &[(VnfId, VnfId)],
            options: &[Vec<(usize, Vec<CopyRef>)>],
            pos: &mut [usize],
            pick: &mut [CopyRef],
            out: &mut Vec<BTreeMap<VnfId, CopyRef>>,
        ) {
            if out.len() >= PLACEMENTS_PER_PATH {
                return;
            }
            if i == chain.len() {
                out.push(chain.iter().copied().zip(pick.iter().copied()).collect());
                return;
            }
            for (p, choices) in &options[i] {
                let ok = prec.iter().all(|&(a, b)| {
                    let ia = chain.iter().position(|&f| f == a);
                    let ib = chain.iter().position(|&f| f == b);
                    match (ia, ib) {
                        (Some(ia), Some(ib)) if ia < i && ib == i => pos[ia] <= *p,
                        (Some(ia), Some(ib)) if ib < i && ia == i => *p <= pos[ib],
                        _ => true,
                    }
                });
                if !ok {
                    continue;
                }
                pos[i] = *p;
                for c in choices {
                    pick[i] = *c;
                    rec(i + 1, chain, prec, options, pos, pick, out);
                }
            }
        }
        rec(0, chain, prec, &options, &mut pos, &mut pick, &mut out);
        out
    }

    /// Demands, in `order`, served by some copy matching `pred`.
    fn users(
        &self,
        routes: &[Option<Route>],
        order: &[usize],
        pred: impl Fn(&CopyRef) -> bool,
    ) -> Vec<usize> {
        order
            .iter()
            .copied()
            .filter(|&k| {
                routes[k]
                    .as_ref()
                    .is_some_and(|(_, a)| a.values().any(&pred))
            })
            .collect()
    }

    /// One round of moves; each accepted move strictly improves `key`.
    fn improve(&self, routes: &mut Vec<Option<Route>>, key: &mut Vec<f64>, order: &[usize]) {
        let try_move = |routes: &mut Vec<Option<Route>>,
                        key: &mut Vec<f64>,
                        moved: Vec<usize>,
                        closed: BTreeSet<(NodeId, VnfId)>| {
            let mut trial = routes.clone();
            for &k in &moved {
                trial[k] = None;
            }
            for &k in &moved {
                match self.insert(&trial, k, &closed) {
                    Some(r) => trial[k] = Some(r),
                    None => return,
                }
            }
            if let Some(s) = self.score(&trial) {
                if less(&s, key) {
                    *routes = trial;
                    *key = s;
                }
            }
        };
        if !self.te {
            // Empty a whole node first, then single (node, type) pairs.
            let (_, sol) = assemble(routes);
            let nodes: BTreeSet<NodeId> = sol.open.iter().map(|c| c.node).collect();
            for n in nodes {
                let pairs: BTreeSet<(NodeId, VnfId)> =
                    self.inst.vnf_ids().map(|f| (n, f)).collect();
                let users = self.users(routes, order, |c| c.node == n);
                if !users.is_empty() {
                    try_move(routes, key, users, pairs);
                }
            }
            let (_, sol) = assemble(routes);
            for (n, f) in sol.presence() {
                let users = self.users(routes, order, |c| c.node == n && c.vnf == f);
                if !users.is_empty() {
                    try_move(routes, key, users, BTreeSet::from([(n, f)]));
                }
            }
        } else {
            let (_, sol) = assemble(routes);
            let eval = evaluate(self.inst, self.spec, &sol);
            let topo = &self.inst.topology;
            let worst = topo.arc_ids().max_by(|&a, &b| {
                (eval.arc_load[a.0] / topo.arc(a).capacity)
                    .total_cmp(&(eval.arc_load[b.0] / topo.arc(b).capacity))
                    .then(b.cmp(&a))
            });
            if let Some(w) = worst {
                let users: Vec<usize> = order
                    .iter()
                    .copied()
                    .filter(|&k| eval.arc_rates[k].contains_key(&w))
                    .collect();
                try_move(routes, key, users, BTreeSet::new());
            }
        }
        for &k in order {
            try_move(routes, key, vec![k], BTreeSet::new());
        }
    }
}

/// Up to [`PATHS_PER_DEMAND`] simple paths from `from` to `to` with at most
/// [`HOP_SLACK`] hops more than a shortest one, by latency then hops.
fn candidate_paths(inst: &Instance, from: NodeId, to: NodeId) -> Vec<Vec<NodeId>> {
    let topo = &inst.topology;
    let n = topo.nodes().len();
    let mut dist = vec![usize::MAX; n];
    dist[to.0] = 0;
    let mut queue = VecDeque::from([to]);
    while let Some(v) = queue.pop_front() {
        for &a in topo.incoming(v) {
            let u = topo.arc(a).from;
            if dist[u.0] == usize::MAX {
                dist[u.0] = dist[v.0] + 1;
                queue.push_back(u);
            }
        }
    }
    if dist[from.0] == usize::MAX {
        return Vec::new();
    }
    let max_hops = dist[from.0] + HOP_SLACK;
    let mut found: Vec<(f64, Vec<NodeId>)> = Vec::new();
    let mut path = vec![from];
    let mut on_path = vec![false; n];
    on_path[from.0] = true;
    fn dfs(
        inst: &Instance,
        to: NodeId,
        max_hops: usize,
        dist: &[usize],
        path: &mut Vec<NodeId>,
        on_path: &mut [bool],
        latency: f64,
        found: &mut Vec<(f64, Vec<NodeId>)>,
    ) {
        if found.len() >= PATH_ENUMERATION_CAP {
            return;
        }
        let at = *path.last().expect("path starts at the origin");
        if at == to {
            found.push((latency, path.clone()));
            return;
        }
        let topo = &inst.topology;
        for &a in topo.outgoing(at) {
            let arc = topo.arc(a);
            let next = arc.to;
            if on_path[next.0] || dist[next.0] == usize::MAX || path.len() + dist[next.0] > max_hops
            {
                continue;
            }
            on_path[next.0] = true;
            path.push(next);
            dfs(
                inst,
                to,
                max_hops,
                dist,
                path,
                on_path,
                latency + arc.latency,
                found,
            );
            path.pop();
            on_path[next.0] = false;
        }
    }
    dfs(
        inst,
        to,
        max_hops,
        &dist,
        &mut path,
        &mut on_path,
        0.0,
        &mut found,
    );
    found.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.len().cmp(&b.1.len()))
            .then(a.1.cmp(&b.1))
    });
    found.truncate(PATHS_PER_DEMAND);
    found.into_iter().map(|(_, p)| p).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{samples, Regime};
    use crate::milp::Variant;

    #[test]
    fn line_gets_one_copy() {
        let inst = samples::line(Regime::Standard);
        let spec = VariantSpec::basic(Objective::Nfv);
        let sol = construct(&inst, &spec).unwrap();
        assert!(validate(&inst, &spec, &sol).feasible);
        assert_eq!(sol.open.len(), 1);
    }

    #[test]
    fn diamond_splits_demands() {
        let inst = samples::diamond();
        let spec = VariantSpec::basic(Objective::Te);
        let sol = construct(&inst, &spec).unwrap();
        let report = validate(&inst, &spec, &sol);
        assert!(report.feasible);
        assert!((report.max_utilization - 0.6).abs() < 1e-12);
    }

    #[test]
    fn fastpath_cap_forces_second_copy() {
        let mut inst = samples::line(Regime::Fastpath);
        let mut d = inst.demands[0].clone();
        d.name = "d1".into();
        d.bandwidth = 15.0;
        inst.demands.push(d);
        inst.vnfs[0].copies = crate::instance::CopyLimit::Uniform(2);
        let spec = VariantSpec::new(Variant::BasicLat, Regime::Fastpath, Objective::Nfv);
        let sol = construct(&inst, &spec).unwrap();
        assert!(validate(&inst, &spec, &sol).feasible);
        assert_eq!(sol.open.len(), 2);
    }
}
