//! Resolution pipeline around the exact solver: a validator-checked
//! constructive heuristic for warm starts, lexicographic TE/NFV optimization,
//! the model cascade, the α-sweep and bisection on the copy count.

mod construct;
mod pipeline;

pub use construct::{construct, construct_from, DEFAULT_SEED};
pub use pipeline::{
    alpha_sweep, bisect_vnf_count, cascade_solve, copy_upper_bound, inflate_to_worst_case,
    lexicographic_solve, solve_objective, AlphaRow, PipelineConfig, PipelineTrace, Probe,
    ProbeOutcome, StageRecord,
};
