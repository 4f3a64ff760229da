//! Which formulation to build: variant, latency regime, objective, extensions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::instance::{DemandId, NodeId, Regime, VnfId};

/// The four formulation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Basic,
    BasicLat,
    BasicCd,
    BasicLatCd,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Basic,
        Variant::BasicLat,
        Variant::BasicCd,
        Variant::BasicLatCd,
    ];

    pub fn has_latency(self) -> bool {
        matches!(self, Variant::BasicLat | Variant::BasicLatCd)
    }

    pub fn has_compression(self) -> bool {
        matches!(self, Variant::BasicCd | Variant::BasicLatCd)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::BasicLat => "basic-lat",
            Variant::BasicCd => "basic-cd",
            Variant::BasicLatCd => "basic-lat-cd",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "standard" => Ok(Regime::Standard),
            "fastpath" => Ok(Regime::Fastpath),
            _ => Err(Error::Config(format!("unknown latency regime `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Objective {
    /// Minimise the maximum link utilization.
    Te,
    /// Minimise the CPU reserved by instantiated copies.
    Nfv,
    /// NFV cost subject to `U <= u_star + alpha`.
    NfvWithUtilizationCap { u_star: f64, alpha: f64 },
    /// NFV cost subject to at most `cap` instantiated copies.
    CopyCountCap { cap: u32 },
}

impl Objective {
    pub fn label(&self) -> String {
        match self {
            Objective::Te => "te".into(),
            Objective::Nfv => "nfv".into(),
            Objective::NfvWithUtilizationCap { u_star, alpha } => {
                format!("nfv[U<={u_star}+{alpha}]")
            }
            Objective::CopyCountCap { cap } => format!("nfv[copies<={cap}]"),
        }
    }
}

/// Placement rules expressed on presence variables (some copy of a type on a node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum PlacementRule {
    /// Two types are present on exactly the same nodes.
    Together { a: VnfId, b: VnfId },
    /// Two types never share a node.
    Apart { a: VnfId, b: VnfId },
    /// A type is present on `node`.
    Pin { vnf: VnfId, node: NodeId },
    /// A type is present on exactly one node of `nodes`.
    PinAny { vnf: VnfId, nodes: Vec<NodeId> },
    /// A type is never present on `node`.
    Forbid { vnf: VnfId, node: NodeId },
    /// A type is present on at least `min_nodes` distinct nodes.
    Spread { vnf: VnfId, min_nodes: u32 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Extensions {
    #[serde(default)]
    pub rules: Vec<PlacementRule>,
    /// Demand pairs that must never share a VNF copy.
    #[serde(default)]
    pub isolation: Vec<(DemandId, DemandId)>,
    /// Charge traffic crossing an NFVI node against its resources.
    #[serde(default)]
    pub core_router: bool,
}

impl Extensions {
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.isolation.is_empty() && !self.core_router
    }
}

/// Everything the model builder needs besides the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub variant: Variant,
    /// Only read by latency variants.
    pub regime: Regime,
    pub objective: Objective,
    #[serde(default)]
    pub extensions: Extensions,
    /// Break symmetry between interchangeable copies on one node.
    #[serde(default = "default_true")]
    pub symmetry_breaking: bool,
    /// Emit the lower copy-flow linearization with the sign as originally
    /// printed instead of the exact one. Only for auditing; it is infeasible
    /// whenever a bit-rate changing copy is used.
    #[serde(default)]
    pub printed_copy_flow_bound: bool,
}

fn default_true() -> bool {
    true
}

impl VariantSpec {
    pub fn new(variant: Variant, regime: Regime, objective: Objective) -> Self {
        VariantSpec {
            variant,
            regime,
            objective,
            extensions: Extensions::default(),
            symmetry_breaking: true,
            printed_copy_flow_bound: false,
        }
    }

    pub fn basic(objective: Objective) -> Self {
        Self::new(Variant::Basic, Regime::Standard, objective)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_parse() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("basic-lat-cd".parse::<Variant>().unwrap().has_compression());
        assert!("lat".parse::<Variant>().is_err());
        assert_eq!("fastpath".parse::<Regime>().unwrap(), Regime::Fastpath);
    }

    #[test]
    fn spec_json_defaults() {
        let s: VariantSpec = serde_json::from_str(
            r#"{"variant":"basic-lat","regime":"fastpath","objective":{"kind":"te"}}"#,
        )
        .unwrap();
        assert!(s.symmetry_breaking);
        assert!(s.extensions.is_empty());
        assert_eq!(s.variant, Variant::BasicLat);
    }
}
