//! Solver-agnostic mixed-integer linear model.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::instance::{ArcId, DemandId, NodeId, VnfId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

/// What a model variable means in terms of the VNF-PR problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarTag {
    /// Arc used by a demand's path.
    Route { demand: DemandId, arc: ArcId },
    /// Copy `copy` of `vnf` is instantiated on `node`.
    Open { node: NodeId, vnf: VnfId, copy: u32 },
    /// Demand is served by a specific copy.
    Use {
        demand: DemandId,
        node: NodeId,
        vnf: VnfId,
        copy: u32,
    },
    /// Demand is served by some copy of `vnf` on `node`.
    Serve {
        demand: DemandId,
        node: NodeId,
        vnf: VnfId,
    },
    /// Position of `node` along the demand's path.
    Position { demand: DemandId, node: NodeId },
    /// Maximum link utilization.
    MaxUtilization,
    /// Latency the demand incurs at `vnf` on `node`.
    VnfLatency {
        demand: DemandId,
        node: NodeId,
        vnf: VnfId,
    },
    /// Bit-rate of the demand on an arc.
    Flow { demand: DemandId, arc: ArcId },
    /// Bit-rate of the demand entering a specific copy.
    CopyFlow {
        demand: DemandId,
        node: NodeId,
        vnf: VnfId,
        copy: u32,
    },
    /// Some copy of `vnf` exists on `node`.
    Presence { node: NodeId, vnf: VnfId },
}

impl VarTag {
    /// Column name used in exported files; [`VarTag::parse`] inverts it.
    pub fn name(&self) -> String {
        match *self {
            VarTag::Route { demand, arc } => format!("x_{demand}_{arc}"),
            VarTag::Open { node, vnf, copy } => format!("y_{node}_{vnf}_{copy}"),
            VarTag::Use {
                demand,
                node,
                vnf,
                copy,
            } => format!("z_{demand}_{node}_{vnf}_{copy}"),
            VarTag::Serve { demand, node, vnf } => format!("w_{demand}_{node}_{vnf}"),
            VarTag::Position { demand, node } => format!("pi_{demand}_{node}"),
            VarTag::MaxUtilization => "U".to_string(),
            VarTag::VnfLatency { demand, node, vnf } => format!("l_{demand}_{node}_{vnf}"),
            VarTag::Flow { demand, arc } => format!("phi_{demand}_{arc}"),
            VarTag::CopyFlow {
                demand,
                node,
                vnf,
                copy,
            } => format!("psi_{demand}_{node}_{vnf}_{copy}"),
            VarTag::Presence { node, vnf } => format!("v_{node}_{vnf}"),
        }
    }

    pub fn parse(name: &str) -> Option<VarTag> {
        if name == "U" {
            return Some(VarTag::MaxUtilization);
        }
        let mut parts = name.split('_');
        let head = parts.next()?;
        let nums: Vec<usize> = parts.map(|p| p.parse().ok()).collect::<Option<_>>()?;
        let tag = match (head, nums.as_slice()) {
            ("x", &[k, a]) => VarTag::Route {
                demand: DemandId(k),
                arc: ArcId(a),
            },
            ("y", &[i, f, n]) => VarTag::Open {
                node: NodeId(i),
                vnf: VnfId(f),
                copy: n as u32,
            },
            ("z", &[k, i, f, n]) => VarTag::Use {
                demand: DemandId(k),
                node: NodeId(i),
                vnf: VnfId(f),
                copy: n as u32,
            },
            ("w", &[k, i, f]) => VarTag::Serve {
                demand: DemandId(k),
                node: NodeId(i),
                vnf: VnfId(f),
            },
            ("pi", &[k, i]) => VarTag::Position {
                demand: DemandId(k),
                node: NodeId(i),
            },
            ("l", &[k, i, f]) => VarTag::VnfLatency {
                demand: DemandId(k),
                node: NodeId(i),
                vnf: VnfId(f),
            },
            ("phi", &[k, a]) => VarTag::Flow {
                demand: DemandId(k),
                arc: ArcId(a),
            },
            ("psi", &[k, i, f, n]) => VarTag::CopyFlow {
                demand: DemandId(k),
                node: NodeId(i),
                vnf: VnfId(f),
                copy: n as u32,
            },
            ("v", &[i, f]) => VarTag::Presence {
                node: NodeId(i),
                vnf: VnfId(f),
            },
            _ => return None,
        };
        Some(tag)
    }

    /// Short symbol of the variable family (`x`, `y`, `pi`, ...).
    pub fn symbol(&self) -> &'static str {
        match self {
            VarTag::Route { .. } => "x",
            VarTag::Open { .. } => "y",
            VarTag::Use { .. } => "z",
            VarTag::Serve { .. } => "w",
            VarTag::Position { .. } => "pi",
            VarTag::MaxUtilization => "U",
            VarTag::VnfLatency { .. } => "l",
            VarTag::Flow { .. } => "phi",
            VarTag::CopyFlow { .. } => "psi",
            VarTag::Presence { .. } => "v",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub tag: Option<VarTag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Origin of a constraint row: which family of the formulation emitted it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    /// Single-path flow conservation on the routing variables.
    FlowBalance,
    /// Link load over nominal bandwidths bounded by `U * capacity`.
    LinkUtilization,
    /// Link load over explicit flows bounded by `U * capacity`.
    FlowUtilization,
    NodeCapacity,
    /// Each requested type is served by exactly one copy.
    AssignOnce,
    /// Only instantiated copies can be used.
    CopyOpen,
    /// A copy serves a demand only on a node its path enters.
    OnPath,
    /// Copy-level and node-level assignment agree.
    ServeLink,
    /// Position ordering along used arcs, excluding detached cycles.
    NoSubtour,
    ChainOrder,
    /// End-to-end latency bound.
    LatencyBudget,
    /// Load-dependent VNF latency, one row per curve piece.
    LoadLatency,
    /// Constant VNF latency.
    FixedLatency,
    /// Per-copy bandwidth cap.
    CopyBandwidth,
    /// Flow conservation at non-NFVI nodes, with demand injection and delivery.
    AccessBalance,
    /// Flow scaling by the compression factor at NFVI nodes.
    CompressionBalance,
    FlowUpper,
    FlowLower,
    CopyFlowUpper,
    CopyFlowLower,
    CopyFlowActive,
    /// At most one bit-rate changing copy per node and demand.
    OneCompression,
    /// Copies of a type on a node are opened in index order.
    SymmetryBreak,
    UtilizationCap,
    CopyCountCap,
    PresenceLink,
    Affinity,
    AntiAffinity,
    Pin,
    Forbid,
    Spread,
    Isolation,
    /// Rows read from an external file without a recognised prefix.
    External,
}

impl Family {
    pub const ALL: [Family; 33] = [
        Family::FlowBalance,
        Family::LinkUtilization,
        Family::FlowUtilization,
        Family::NodeCapacity,
        Family::AssignOnce,
        Family::CopyOpen,
        Family::OnPath,
        Family::ServeLink,
        Family::NoSubtour,
        Family::ChainOrder,
        Family::LatencyBudget,
        Family::LoadLatency,
        Family::FixedLatency,
        Family::CopyBandwidth,
        Family::AccessBalance,
        Family::CompressionBalance,
        Family::FlowUpper,
        Family::FlowLower,
        Family::CopyFlowUpper,
        Family::CopyFlowLower,
        Family::CopyFlowActive,
        Family::OneCompression,
        Family::SymmetryBreak,
        Family::UtilizationCap,
        Family::CopyCountCap,
        Family::PresenceLink,
        Family::Affinity,
        Family::AntiAffinity,
        Family::Pin,
        Family::Forbid,
        Family::Spread,
        Family::Isolation,
        Family::External,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::FlowBalance => "flow",
            Family::LinkUtilization => "util",
            Family::FlowUtilization => "flowutil",
            Family::NodeCapacity => "cap",
            Family::AssignOnce => "assign",
            Family::CopyOpen => "open",
            Family::OnPath => "onpath",
            Family::ServeLink => "serve",
            Family::NoSubtour => "nosubtour",
            Family::ChainOrder => "order",
            Family::LatencyBudget => "latency",
            Family::LoadLatency => "loadlat",
            Family::FixedLatency => "fixlat",
            Family::CopyBandwidth => "copybw",
            Family::AccessBalance => "access",
            Family::CompressionBalance => "compress",
            Family::FlowUpper => "flowmax",
            Family::FlowLower => "flowmin",
            Family::CopyFlowUpper => "psimax",
            Family::CopyFlowLower => "psimin",
            Family::CopyFlowActive => "psion",
            Family::OneCompression => "onecd",
            Family::SymmetryBreak => "sym",
            Family::UtilizationCap => "ucap",
            Family::CopyCountCap => "count",
            Family::PresenceLink => "presence",
            Family::Affinity => "affinity",
            Family::AntiAffinity => "antiaffinity",
            Family::Pin => "pin",
            Family::Forbid => "forbid",
            Family::Spread => "spread",
            Family::Isolation => "isolation",
            Family::External => "ext",
        }
    }

    pub fn from_str(s: &str) -> Option<Family> {
        Family::ALL.iter().copied().find(|f| f.as_str() == s)
    }

    /// Families that stem from the formulation itself rather than from
    /// pipeline caps, symmetry breaking or placement rules.
    pub fn is_core(self) -> bool {
        !matches!(
            self,
            Family::SymmetryBreak
                | Family::UtilizationCap
                | Family::CopyCountCap
                | Family::PresenceLink
                | Family::Affinity
                | Family::AntiAffinity
                | Family::Pin
                | Family::Forbid
                | Family::Spread
                | Family::Isolation
                | Family::External
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Sorted by variable, no duplicates, no zeros.
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub family: Family,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub integrality: f64,
    pub feasibility: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            integrality: 1e-6,
            feasibility: 1e-7,
        }
    }
}

/// A minimisation MILP over bounded variables.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Minimised; sorted by variable.
    pub objective: Vec<(VarId, f64)>,
    pub warm_start: Option<Vec<f64>>,
    pub tolerances: Tolerances,
    index: HashMap<VarTag, VarId>,
}

impl PartialEq for MilpModel {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables
            && self.constraints == other.constraints
            && self.objective == other.objective
            && self.warm_start == other.warm_start
            && self.tolerances == other.tolerances
    }
}

impl Default for MilpModel {
    fn default() -> Self {
        Self::new()
    }
}

impl MilpModel {
    pub fn new() -> Self {
        MilpModel {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            warm_start: None,
            tolerances: Tolerances::default(),
            index: HashMap::new(),
        }
    }

    pub fn add_variable(
        &mut self,
        name: String,
        kind: VarKind,
        lower: f64,
        upper: f64,
        tag: Option<VarTag>,
    ) -> VarId {
        let id = VarId(self.variables.len());
        if let Some(t) = tag {
            self.index.insert(t, id);
        }
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
            tag,
        });
        id
    }

    pub fn add_tagged(&mut self, tag: VarTag, kind: VarKind, lower: f64, upper: f64) -> VarId {
        self.add_variable(tag.name(), kind, lower, upper, Some(tag))
    }

    /// Adds a row after merging duplicate terms and dropping zeros.
    pub fn add_constraint(
        &mut self,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
        family: Family,
    ) {
        let terms = normalize(terms);
        self.constraints.push(Constraint {
            terms,
            sense,
            rhs,
            family,
        });
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, f64)>) {
        self.objective = normalize(terms);
    }

    pub fn var(&self, tag: VarTag) -> Option<VarId> {
        self.index.get(&tag).copied()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }

    /// Number of variables of each symbol (`x`, `y`, ...).
    pub fn count_symbols(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        for v in &self.variables {
            if let Some(t) = v.tag {
                *out.entry(t.symbol()).or_default() += 1;
            }
        }
        out
    }

    pub fn count_families(&self) -> BTreeMap<Family, usize> {
        let mut out = BTreeMap::new();
        for c in &self.constraints {
            *out.entry(c.family).or_default() += 1;
        }
        out
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Rebuilds the tag index after variables were edited in place.
    pub fn reindex(&mut self) {
        self.index = self
            .variables
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.tag.map(|t| (t, VarId(i))))
            .collect();
    }

    pub fn row_name(&self, row: usize) -> String {
        format!("{}_{}", self.constraints[row].family, row)
    }
}

pub(crate) fn normalize(mut terms: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
    for (v, c) in terms {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += c,
            _ => out.push((v, c)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        let tags = [
            VarTag::Route {
                demand: DemandId(3),
                arc: ArcId(17),
            },
            VarTag::Use {
                demand: DemandId(0),
                node: NodeId(4),
                vnf: VnfId(1),
                copy: 2,
            },
            VarTag::MaxUtilization,
            VarTag::CopyFlow {
                demand: DemandId(1),
                node: NodeId(0),
                vnf: VnfId(0),
                copy: 0,
            },
            VarTag::Presence {
                node: NodeId(9),
                vnf: VnfId(2),
            },
        ];
        for t in tags {
            assert_eq!(VarTag::parse(&t.name()), Some(t));
        }
        assert_eq!(VarTag::parse("q_1"), None);
        assert_eq!(VarTag::parse("x_1"), None);
    }

    #[test]
    fn terms_are_merged() {
        let mut m = MilpModel::new();
        let a = m.add_variable("a".into(), VarKind::Continuous, 0.0, 1.0, None);
        let b = m.add_variable("b".into(), VarKind::Continuous, 0.0, 1.0, None);
        m.add_constraint(
            vec![(b, 1.0), (a, 2.0), (b, -1.0), (a, 1.0)],
            Sense::Le,
            1.0,
            Family::External,
        );
        assert_eq!(m.constraints[0].terms, vec![(a, 3.0)]);
    }

    #[test]
    fn family_names_are_unique() {
        for f in Family::ALL {
            assert_eq!(Family::from_str(f.as_str()), Some(f));
        }
    }
}
