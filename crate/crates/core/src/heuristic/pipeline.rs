//! Lexicographic TE/NFV optimization, the model cascade, the α-sweep and the
//! bisection on the number of instantiated copies.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::construct::{construct_from, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::instance::{worst_case_bandwidth, Instance, Regime};
use crate::milp::{build_model, decode, encode, Extensions, Objective, Variant, VariantSpec};
use crate::solver::{solve, SolveStatus, SolverConfig, WarmStart};
use crate::validate::{validate, Solution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub variant: Variant,
    pub regime: Regime,
    pub extensions: Extensions,
    /// Seconds for each TE stage.
    pub te_time_limit: f64,
    /// Seconds for each NFV stage.
    pub nfv_time_limit: f64,
    /// Branch-and-bound nodes per warm-started stage; `None` searches until
    /// the time limit. Stages without a warm start ignore it.
    pub node_limit: Option<u64>,
    pub gap_tolerance: f64,
    /// Relaxations of the utilization cap, nondecreasing from 0.
    pub alphas: Vec<f64>,
    /// Two consecutive sweep costs closer than this end the sweep; `None`
    /// runs every α.
    pub early_stop: Option<f64>,
    /// First cap probed by bisection; defaults to the upper bound.
    pub bisection_start: Option<u32>,
    /// Largest cap bisection considers; defaults to the total copy limit.
    pub bisection_max: Option<u32>,
    /// Seed of the constructive heuristic.
    pub seed: u64,
    /// Warm-start every stage with the constructive heuristic.
    pub heuristic: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            variant: Variant::BasicLat,
            regime: Regime::Standard,
            extensions: Extensions::default(),
            te_time_limit: 600.0,
            nfv_time_limit: 800.0,
            node_limit: None,
            gap_tolerance: 1e-7,
            alphas: vec![0.0, 0.2, 0.4],
            early_stop: Some(1e-9),
            bisection_start: None,
            bisection_max: None,
            seed: DEFAULT_SEED,
            heuristic: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.te_time_limit > 0.0 && self.nfv_time_limit > 0.0) {
            return Err(Error::Config("phase time limits must be positive".into()));
        }
        if self.alphas.first() != Some(&0.0) {
            return Err(Error::Config("the α schedule must start at 0".into()));
        }
        if self.alphas.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::Config("the α schedule must be nondecreasing".into()));
        }
        if self.early_stop.is_some_and(|e| !(e >= 0.0)) {
            return Err(Error::Config(
                "early-stop threshold must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    fn spec(&self, variant: Variant, objective: Objective) -> VariantSpec {
        VariantSpec {
            extensions: self.extensions.clone(),
            ..VariantSpec::new(variant, self.regime, objective)
        }
    }

    fn solver(&self, time_limit: f64) -> SolverConfig {
        SolverConfig {
            time_limit,
            gap_tolerance: self.gap_tolerance,
            node_limit: self.node_limit,
            ..SolverConfig::default()
        }
    }
}

/// One solve within a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub variant: Variant,
    pub objective: Objective,
    pub status: SolveStatus,
    /// Maximum link utilization of the incumbent, recomputed by the validator.
    pub utilization: Option<f64>,
    pub nfv_cost: Option<f64>,
    pub gap: f64,
    /// Seconds.
    pub elapsed: f64,
    pub nodes: u64,
    pub warm_start: WarmStart,
    /// Validator violations of the incumbent.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub status: SolveStatus,
    pub nfv_cost: Option<f64>,
    pub utilization: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeOutcome {
    Feasible,
    Infeasible,
    /// Stopped by a limit without an incumbent; treated as infeasible.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub cap: u32,
    pub outcome: ProbeOutcome,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    /// Stages in execution order.
    pub stages: Vec<StageRecord>,
    pub alpha_sweep: Vec<AlphaRow>,
    pub bisection: Vec<Probe>,
}

impl PipelineTrace {
    /// The trace with every elapsed time set to zero.
    pub fn without_timing(&self) -> PipelineTrace {
        let mut t = self.clone();
        for s in &mut t.stages {
            s.elapsed = 0.0;
        }
        t
    }

    /// One JSON object per stage, sweep row and probe, one per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let line = |out: &mut String, kind: &str, v: serde_json::Value| {
            let mut obj = serde_json::Map::new();
            obj.insert("record".into(), kind.into());
            if let serde_json::Value::Object(m) = v {
                obj.extend(m);
            }
            out.push_str(&serde_json::Value::Object(obj).to_string());
            out.push('\n');
        };
        for s in &self.stages {
            line(
                &mut out,
                "stage",
                serde_json::to_value(s).expect("serializable"),
            );
        }
        for r in &self.alpha_sweep {
            line(
                &mut out,
                "alpha",
                serde_json::to_value(r).expect("serializable"),
            );
        }
        for p in &self.bisection {
            line(
                &mut out,
                "probe",
                serde_json::to_value(p).expect("serializable"),
            );
        }
        out
    }
}

/// Result of one stage: the validated incumbent, if any, and its record.
struct Stage {
    solution: Option<Solution>,
    objective: Option<f64>,
    record: StageRecord,
}

/// Solves `spec` on `inst`: heuristic warm start from `start`, then
/// branch-and-bound. The incumbent is decoded and validated.
fn run_stage(
    name: &str,
    inst: &Instance,
    spec: &VariantSpec,
    start: Option<&Solution>,
    solver: &SolverConfig,
    config: &PipelineConfig,
) -> Result<Stage> {
    let clock = Instant::now();
    let mut model = build_model(inst, spec)?;
    let seed_solution = if config.heuristic {
        construct_from(inst, spec, start, config.seed)
    } else {
        start.cloned()
    };
    if let Some(s) = &seed_solution {
        model.warm_start = encode(inst, spec, &model, s).ok();
    }
    let mut cfg = solver.clone();
    if model.warm_start.is_none() {
        cfg.node_limit = None;
    }
    let r = solve(&model, &cfg)?;
    let solution = match &r.values {
        Some(v) => Some(decode(inst, &model, v)?),
        None => None,
    };
    let report = solution.as_ref().map(|s| validate(inst, spec, s));
    let record = StageRecord {
        stage: name.to_string(),
        variant: spec.variant,
        objective: spec.objective,
        status: r.status,
        utilization: report.as_ref().map(|r| r.max_utilization),
        nfv_cost: report.as_ref().map(|r| r.nfv_cost),
        gap: r.gap,
        elapsed: clock.elapsed().as_secs_f64(),
        nodes: r.nodes,
        warm_start: r.warm_start.clone(),
        violations: report.as_ref().map_or(0, |r| r.violations.len()),
    };
    Ok(Stage {
        solution,
        objective: r.objective,
        record,
    })
}

/// Phase 1 of the lexicographic pipeline: the minimum utilization `U*`.
fn te_phase(
    inst: &Instance,
    config: &PipelineConfig,
    trace: &mut PipelineTrace,
) -> Result<(Solution, f64)> {
    let spec = config.spec(config.variant, Objective::Te);
    let stage = run_stage(
        "te",
        inst,
        &spec,
        None,
        &config.solver(config.te_time_limit),
        config,
    )?;
    trace.stages.push(stage.record.clone());
    match (stage.solution, stage.objective) {
        (Some(sol), Some(u)) => Ok((sol, u)),
        _ if stage.record.status == SolveStatus::Infeasible => Err(Error::Infeasible(
            "the TE phase has no feasible solution".into(),
        )),
        _ => Err(Error::Pipeline(format!(
            "the TE phase stopped ({}) without an incumbent",
            stage.record.status.as_str()
        ))),
    }
}

fn nfv_phase(
    name: &str,
    inst: &Instance,
    config: &PipelineConfig,
    u_star: f64,
    alpha: f64,
    start: &Solution,
    trace: &mut PipelineTrace,
) -> Result<Stage> {
    let spec = config.spec(
        config.variant,
        Objective::NfvWithUtilizationCap { u_star, alpha },
    );
    let stage = run_stage(
        name,
        inst,
        &spec,
        Some(start),
        &config.solver(config.nfv_time_limit),
        config,
    )?;
    trace.stages.push(stage.record.clone());
    Ok(stage)
}

/// Solves a single objective for the configured variant, warm-started by the
/// heuristic.
pub fn solve_objective(
    instance: &Instance,
    config: &PipelineConfig,
    objective: Objective,
) -> Result<(Solution, PipelineTrace)> {
    config.validate()?;
    let time_limit = match objective {
        Objective::Te => config.te_time_limit,
        _ => config.nfv_time_limit,
    };
    let spec = config.spec(config.variant, objective);
    let stage = run_stage(
        &objective.label(),
        instance,
        &spec,
        None,
        &config.solver(time_limit),
        config,
    )?;
    let status = stage.record.status;
    let trace = PipelineTrace {
        stages: vec![stage.record],
        ..PipelineTrace::default()
    };
    match stage.solution {
        Some(sol) => Ok((sol, trace)),
        None if status == SolveStatus::Infeasible => Err(Error::Infeasible(format!(
            "{} has no feasible solution",
            objective.label()
        ))),
        None => Err(Error::Pipeline(format!(
            "stopped ({}) without an incumbent",
            status.as_str()
        ))),
    }
}

/// Minimizes `U`, then the NFV cost subject to `U <= U*`, warm-starting the
/// second phase from the first phase's incumbent.
pub fn lexicographic_solve(
    instance: &Instance,
    config: &PipelineConfig,
) -> Result<(Solution, PipelineTrace)> {
    config.validate()?;
    let mut trace = PipelineTrace::default();
    let (te, u_star) = te_phase(instance, config, &mut trace)?;
    let stage = nfv_phase("te-nfv", instance, config, u_star, 0.0, &te, &mut trace)?;
    Ok((stage.solution.unwrap_or(te), trace))
}

/// Re-optimizes the NFV cost under `U <= U* + α` for each α of the schedule,
/// chaining warm starts, until two consecutive costs agree.
pub fn alpha_sweep(
    instance: &Instance,
    config: &PipelineConfig,
) -> Result<(Vec<AlphaRow>, PipelineTrace)> {
    config.validate()?;
    let mut trace = PipelineTrace::default();
    let (mut incumbent, u_star) = te_phase(instance, config, &mut trace)?;
    let mut rows: Vec<AlphaRow> = Vec::new();
    for &alpha in &config.alphas {
        let stage = nfv_phase(
            &format!("alpha={alpha}"),
            instance,
            config,
            u_star,
            alpha,
            &incumbent,
            &mut trace,
        )?;
        let row = AlphaRow {
            alpha,
            status: stage.record.status,
            nfv_cost: stage.record.nfv_cost,
            utilization: stage.record.utilization,
        };
        if let Some(sol) = stage.solution {
            incumbent = sol;
        }
        let settled = match (
            rows.last().and_then(|r| r.nfv_cost),
            row.nfv_cost,
            config.early_stop,
        ) {
            (Some(a), Some(b), Some(eps)) => (a - b).abs() <= eps,
            _ => false,
        };
        rows.push(row);
        if settled {
            break;
        }
    }
    trace.alpha_sweep = rows.clone();
    Ok((rows, trace))
}

/// `instance` with every demand's bandwidth raised to the largest rate it can
/// reach along its chain.
pub fn inflate_to_worst_case(instance: &Instance) -> Result<Instance> {
    let mut inflated = instance.clone();
    for d in &mut inflated.demands {
        d.bandwidth = worst_case_bandwidth(d, &instance.vnfs)?;
    }
    for v in &mut inflated.vnfs {
        v.compression = 1.0;
    }
    Ok(inflated)
}

/// Solves `objective` for the configured target variant through models of
/// increasing complexity, each warm-started from the previous incumbent.
///
/// Stages without compression route every demand at its worst-case rate so
/// that their incumbents stay feasible once rates change along the chain.
/// A rejected warm start makes the stage start cold; the trace records it.
pub fn cascade_solve(
    instance: &Instance,
    config: &PipelineConfig,
    objective: Objective,
) -> Result<(Solution, PipelineTrace)> {
    config.validate()?;
    let stages: &[Variant] = match config.variant {
        Variant::BasicLatCd => &[Variant::Basic, Variant::BasicLat, Variant::BasicLatCd],
        Variant::BasicLat => &[Variant::Basic, Variant::BasicLat],
        v => {
            return Err(Error::Config(format!(
                "the cascade targets basic-lat or basic-lat-cd, not {v}"
            )))
        }
    };
    let inflated = inflate_to_worst_case(instance)?;
    let time_limit = match objective {
        Objective::Te => config.te_time_limit,
        _ => config.nfv_time_limit,
    };
    let mut trace = PipelineTrace::default();
    let mut incumbent: Option<Solution> = None;
    for &variant in stages {
        let inst = if variant.has_compression() {
            instance
        } else {
            &inflated
        };
        let spec = config.spec(variant, objective);
        let stage = run_stage(
            variant.as_str(),
            inst,
            &spec,
            incumbent.as_ref(),
            &config.solver(time_limit),
            config,
        )?;
        trace.stages.push(stage.record);
        match stage.solution {
            Some(sol) => incumbent = Some(sol),
            None if variant == config.variant => {}
            None => incumbent = None,
        }
    }
    let last = trace.stages.last().expect("at least two stages");
    match incumbent {
        Some(sol) if last.status.has_solution() => Ok((sol, trace)),
        _ if last.status == SolveStatus::Infeasible => Err(Error::Infeasible(format!(
            "{} has no feasible solution",
            config.variant
        ))),
        _ => Err(Error::Pipeline(format!(
            "the {} stage stopped ({}) without an incumbent",
            config.variant,
            last.status.as_str()
        ))),
    }
}

/// Total number of copies the instance allows: the sum of per-node limits.
pub fn copy_upper_bound(instance: &Instance) -> u32 {
    instance
        .topology
        .node_ids()
        .flat_map(|i| instance.vnf_ids().map(move |f| (i, f)))
        .map(|(i, f)| instance.max_copies(i, f))
        .fold(0u32, u32::saturating_add)
}

fn requested_types(instance: &Instance) -> u32 {
    let types: std::collections::BTreeSet<_> = instance
        .demands
        .iter()
        .flat_map(|d| d.chain.iter())
        .collect();
    types.len() as u32
}

/// Smallest cap on the number of instantiated copies that admits a feasible
/// solution, found by halving from a feasible cap or doubling from an
/// infeasible one, then bisecting the bracket.
pub fn bisect_vnf_count(
    instance: &Instance,
    config: &PipelineConfig,
) -> Result<(u32, Solution, PipelineTrace)> {
    config.validate()?;
    let c_max = config
        .bisection_max
        .unwrap_or_else(|| copy_upper_bound(instance));
    let mut trace = PipelineTrace::default();
    let mut witness: Option<Solution> = None;
    let probe =
        |cap: u32, trace: &mut PipelineTrace, witness: &mut Option<Solution>| -> Result<bool> {
            let spec = config.spec(config.variant, Objective::CopyCountCap { cap });
            let solver = SolverConfig {
                stop_at_first_feasible: true,
                node_limit: None,
                ..config.solver(config.nfv_time_limit)
            };
            let stage = run_stage(
                &format!("cap={cap}"),
                instance,
                &spec,
                witness.as_ref(),
                &solver,
                config,
            )?;
            let outcome = match (&stage.solution, stage.record.status) {
                (Some(_), _) => ProbeOutcome::Feasible,
                (None, SolveStatus::Infeasible) => ProbeOutcome::Infeasible,
                (None, _) => ProbeOutcome::Unknown,
            };
            trace.stages.push(stage.record);
            trace.bisection.push(Probe { cap, outcome });
            if let Some(sol) = stage.solution {
                *witness = Some(sol);
            }
            Ok(outcome == ProbeOutcome::Feasible)
        };

    // Largest cap known infeasible and smallest known feasible.
    let mut lo: Option<u32> = None;
    let mut hi: Option<u32> = None;
    let mut cap = config.bisection_start.unwrap_or(c_max).min(c_max);
    // Every requested type needs a copy.
    let floor = requested_types(instance).min(c_max);
    cap = cap.max(floor);
    loop {
        if probe(cap, &mut trace, &mut witness)? {
            hi = Some(cap);
            if cap == floor || lo.is_some() {
                break;
            }
            cap = (cap / 2).max(floor);
        } else {
            lo = Some(cap);
            if hi.is_some() {
                break;
            }
            if cap >= c_max {
                return Err(Error::Infeasible(format!(
                    "no feasible solution with at most {c_max} copies"
                )));
            }
            cap = cap.saturating_mul(2).max(1).min(c_max);
        }
    }
    let mut hi = hi.expect("bracket has a feasible end");
    let mut best = witness.clone();
    if let Some(mut lo) = lo {
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if probe(mid, &mut trace, &mut witness)? {
                hi = mid;
                best = witness.clone();
            } else {
                lo = mid;
            }
        }
    }
    let best = best.expect("a feasible probe left a witness");
    Ok((hi, best, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::samples;

    fn exact() -> PipelineConfig {
        PipelineConfig {
            variant: Variant::Basic,
            regime: Regime::Fastpath,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn rejects_bad_schedules() {
        for alphas in [vec![], vec![0.1], vec![0.0, 0.4, 0.2]] {
            let cfg = PipelineConfig { alphas, ..exact() };
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn line_lexicographic() {
        let inst = samples::line(Regime::Fastpath);
        let (sol, trace) = lexicographic_solve(&inst, &exact()).unwrap();
        assert_eq!(trace.stages.len(), 2);
        assert!((trace.stages[0].utilization.unwrap() - 0.1).abs() < 1e-9);
        assert_eq!(sol.open.len(), 1);
        assert_eq!(trace.stages[1].nfv_cost, Some(1.0));
    }

    #[test]
    fn line_needs_one_copy() {
        let inst = samples::line(Regime::Fastpath);
        let (cap, sol, trace) = bisect_vnf_count(&inst, &exact()).unwrap();
        assert_eq!(cap, 1);
        assert_eq!(sol.open.len(), 1);
        assert!(trace.bisection.len() as f64 <= (3f64).log2().ceil() + 3.0);
    }

    #[test]
    fn no_demands_need_no_copies() {
        let inst = samples::diamond();
        let (cap, _, _) = bisect_vnf_count(&inst, &exact()).unwrap();
        assert_eq!(cap, 0);
    }
}
