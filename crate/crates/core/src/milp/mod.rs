//! MILP formulations of VNF placement and routing.
//!
//! [`build_model`] emits a [`MilpModel`] for one [`VariantSpec`]; [`encode`] and
//! [`decode`] move between variable vectors and [`crate::validate::Solution`]s;
//! the `export` functions write and read MPS, LP and solution files.

mod builder;
mod codec;
mod export;
mod model;
mod variant;

pub use builder::build_model;
pub use codec::{decode, encode, normalize_copies};
pub use export::{read_mps, read_solution, write_lp, write_mps, write_solution};
pub use model::{
    Constraint, Family, MilpModel, Sense, Tolerances, VarId, VarKind, VarTag, Variable,
};
pub use variant::{Extensions, Objective, PlacementRule, Variant, VariantSpec};
