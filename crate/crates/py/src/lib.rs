//! Python bindings. Instances, solutions and reports cross the boundary as
//! JSON text in the same formats the command-line tool reads and writes.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use vnfpr::heuristic::{
    alpha_sweep as sweep, lexicographic_solve, solve_objective, PipelineConfig,
};
use vnfpr::instance::{
    extend_graph, generate_three_tier, load_instance, save_instance, CaseStudy, Instance, Regime,
    ThreeTierConfig,
};
use vnfpr::milp::{Objective, Variant, VariantSpec};
use vnfpr::report::ObjectiveMode;
use vnfpr::validate::{validate as check, Solution};

fn py_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr>(text: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    text.parse().map_err(py_err)
}

fn prepare(instance: &str, variant: Variant, regime: Option<&str>) -> PyResult<(Instance, Regime)> {
    let inst = load_instance(instance).map_err(py_err)?;
    let regime = match regime {
        Some(r) => parse(r)?,
        None => inst.regime().unwrap_or(Regime::Standard),
    };
    let inst = if variant.has_compression() {
        extend_graph(&inst)
    } else {
        inst
    };
    Ok((inst, regime))
}

fn pipeline(
    variant: Variant,
    regime: Regime,
    node_limit: Option<u64>,
    time_limit: Option<f64>,
) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        variant,
        regime,
        node_limit,
        ..PipelineConfig::default()
    };
    if let Some(t) = time_limit {
        cfg.te_time_limit = t;
        cfg.nfv_time_limit = t;
    }
    cfg
}

/// Generates a three-tier instance and returns it as JSON.
#[pyfunction]
#[pyo3(signature = (case="internet", regime="standard", seed=0, pair_seed=0, demands=None, max_copies=None))]
fn generate(
    case: &str,
    regime: &str,
    seed: u64,
    pair_seed: u64,
    demands: Option<usize>,
    max_copies: Option<u32>,
) -> PyResult<String> {
    let case = match case {
        "internet" => CaseStudy::Internet,
        "vpn" => CaseStudy::Vpn,
        other => return Err(py_err(format!("unknown case study `{other}`"))),
    };
    let config = ThreeTierConfig {
        case,
        regime: parse(regime)?,
        pair_seed,
        demand_count: demands,
        max_copies,
        ..ThreeTierConfig::default()
    };
    Ok(save_instance(
        &generate_three_tier(seed, &config).map_err(py_err)?,
    ))
}

/// Solves an instance. Returns the solution JSON and the stage trace (one
/// JSON record per line).
#[pyfunction]
#[pyo3(signature = (instance, variant="basic-lat", regime=None, objective="te-nfv", node_limit=None, time_limit=None))]
fn solve(
    instance: &str,
    variant: &str,
    regime: Option<&str>,
    objective: &str,
    node_limit: Option<u64>,
    time_limit: Option<f64>,
) -> PyResult<(String, String)> {
    let variant: Variant = parse(variant)?;
    let (inst, regime) = prepare(instance, variant, regime)?;
    let cfg = pipeline(variant, regime, node_limit, time_limit);
    let (sol, trace) = match parse::<ObjectiveMode>(objective)? {
        ObjectiveMode::Te => solve_objective(&inst, &cfg, Objective::Te),
        ObjectiveMode::Nfv => solve_objective(&inst, &cfg, Objective::Nfv),
        ObjectiveMode::TeNfv => lexicographic_solve(&inst, &cfg),
    }
    .map_err(py_err)?;
    Ok((
        serde_json::to_string(&sol).map_err(py_err)?,
        trace.to_text(),
    ))
}

/// Re-optimizes the NFV cost under U <= U* + α for each α. Returns
/// `(alpha, status, nfv_cost, utilization)` rows.
#[pyfunction]
#[pyo3(signature = (instance, alphas, variant="basic-lat", regime=None, node_limit=None, time_limit=None))]
fn alpha_sweep(
    instance: &str,
    alphas: Vec<f64>,
    variant: &str,
    regime: Option<&str>,
    node_limit: Option<u64>,
    time_limit: Option<f64>,
) -> PyResult<Vec<(f64, String, Option<f64>, Option<f64>)>> {
    let variant: Variant = parse(variant)?;
    let (inst, regime) = prepare(instance, variant, regime)?;
    let cfg = PipelineConfig {
        alphas,
        ..pipeline(variant, regime, node_limit, time_limit)
    };
    let (rows, _) = sweep(&inst, &cfg).map_err(py_err)?;
    Ok(rows
        .into_iter()
        .map(|r| {
            (
                r.alpha,
                r.status.as_str().to_string(),
                r.nfv_cost,
                r.utilization,
            )
        })
        .collect())
}

/// Checks a solution against an instance and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (instance, solution, variant="basic-lat", regime=None))]
fn validate(
    instance: &str,
    solution: &str,
    variant: &str,
    regime: Option<&str>,
) -> PyResult<String> {
    let variant: Variant = parse(variant)?;
    let (inst, regime) = prepare(instance, variant, regime)?;
    let sol: Solution = serde_json::from_str(solution).map_err(py_err)?;
    let report = check(
        &inst,
        &VariantSpec::new(variant, regime, Objective::Te),
        &sol,
    );
    serde_json::to_string(&report).map_err(py_err)
}

#[pymodule]
fn vnfpr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
