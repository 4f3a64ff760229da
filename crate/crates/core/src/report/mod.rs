//! Campaigns over seeds, case studies, regimes and objective modes, and the
//! plot-ready CSV files they produce.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristic::{lexicographic_solve, solve_objective, PipelineConfig, PipelineTrace};
use crate::instance::{
    extend_graph, generate_three_tier, load_instance, save_instance, CaseStudy, Instance, Regime,
    ThreeTierConfig, Tier,
};
use crate::milp::{Objective, VariantSpec};
use crate::solver::SolveStatus;
use crate::validate::{validate, Solution, ValidationReport};

/// What a run optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveMode {
    /// Maximum link utilization only.
    Te,
    /// Utilization first, then NFV cost at the optimal utilization.
    TeNfv,
    /// NFV cost only.
    Nfv,
}

impl ObjectiveMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveMode::Te => "te",
            ObjectiveMode::TeNfv => "te-nfv",
            ObjectiveMode::Nfv => "nfv",
        }
    }
}

impl FromStr for ObjectiveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [ObjectiveMode::Te, ObjectiveMode::TeNfv, ObjectiveMode::Nfv]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown objective mode `{s}`")))
    }
}

/// Where a campaign's instances come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSource {
    /// The three-tier generator, once per case study, regime and seed. The
    /// seed drives the bandwidths; the configured pair seed fixes the pairs.
    Generator {
        config: ThreeTierConfig,
        cases: Vec<CaseStudy>,
    },
    /// Instance files, each run under its own latency regime. Seeds only
    /// reseed the heuristic.
    Files { paths: Vec<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub source: InstanceSource,
    pub seeds: Vec<u64>,
    /// Ignored for file sources.
    #[serde(default)]
    pub regimes: Vec<Regime>,
    pub modes: Vec<ObjectiveMode>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    pub output: PathBuf,
    /// Runs executed at once.
    #[serde(default = "one")]
    pub parallelism: usize,
}

fn one() -> usize {
    1
}

impl Campaign {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() || self.modes.is_empty() {
            return Err(Error::Config(
                "campaign needs at least one seed and one mode".into(),
            ));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("campaign seeds must be distinct".into()));
        }
        match &self.source {
            InstanceSource::Generator { cases, .. } => {
                if cases.is_empty() || self.regimes.is_empty() {
                    return Err(Error::Config(
                        "generator campaigns need case studies and regimes".into(),
                    ));
                }
            }
            InstanceSource::Files { paths } => {
                if paths.is_empty() {
                    return Err(Error::Config("campaign lists no instance files".into()));
                }
            }
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        self.pipeline.validate()
    }

    /// `(case label, regime, mode)` cells, in report order.
    fn cells(&self) -> Result<Vec<Cell>> {
        let mut cells = Vec::new();
        match &self.source {
            InstanceSource::Generator { cases, .. } => {
                for &case in cases {
                    for &regime in &self.regimes {
                        for &mode in &self.modes {
                            cells.push(Cell {
                                case: case.as_str().to_string(),
                                regime,
                                mode,
                                source: CellSource::Generated(case),
                            });
                        }
                    }
                }
            }
            InstanceSource::Files { paths } => {
                for path in paths {
                    let inst = load_instance(&fs::read_to_string(path)?)?;
                    let regime = inst.regime().unwrap_or(Regime::Standard);
                    let case = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "instance".into());
                    for &mode in &self.modes {
                        cells.push(Cell {
                            case: case.clone(),
                            regime,
                            mode,
                            source: CellSource::File(inst.clone()),
                        });
                    }
                }
            }
        }
        Ok(cells)
    }
}

#[derive(Clone)]
enum CellSource {
    Generated(CaseStudy),
    File(Instance),
}

#[derive(Clone)]
struct Cell {
    case: String,
    regime: Regime,
    mode: ObjectiveMode,
    source: CellSource,
}

/// One validated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub seed: u64,
    pub case: String,
    pub regime: Regime,
    pub latency_bound: f64,
    pub mode: ObjectiveMode,
    /// `optimal`, or `timeout` when a limit stopped the last stage.
    pub status: String,
    pub utilization: f64,
    pub nfv_cost: f64,
    pub gap: f64,
    /// Seconds over all stages.
    pub runtime: f64,
    pub open_copies: usize,
    /// Open copies per NFVI tier.
    pub tiers: BTreeMap<Tier, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub case: String,
    pub regime: Regime,
    pub mode: ObjectiveMode,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    /// Ordered by cell, then seed.
    pub rows: Vec<RunRow>,
    pub failures: Vec<RunFailure>,
    /// Arc utilizations of every run, per `case/regime/mode` group.
    pub utilization_samples: BTreeMap<String, Vec<f64>>,
    /// End-to-end demand latencies of every run, per group.
    pub latency_samples: BTreeMap<String, Vec<f64>>,
}

fn group(case: &str, regime: Regime, mode: ObjectiveMode) -> String {
    format!("{case}-{}-{}", regime.as_str(), mode.as_str())
}

struct RunOutput {
    row: RunRow,
    instance: Instance,
    solution: Solution,
    report: ValidationReport,
    trace: PipelineTrace,
    arc_utilization: Vec<f64>,
}

fn run_one(campaign: &Campaign, cell: &Cell, seed: u64) -> Result<RunOutput> {
    let pipeline = PipelineConfig {
        regime: cell.regime,
        ..campaign.pipeline.clone()
    };
    let instance = match (&cell.source, &campaign.source) {
        (CellSource::Generated(case), InstanceSource::Generator { config, .. }) => {
            let config = ThreeTierConfig {
                case: *case,
                regime: cell.regime,
                ..config.clone()
            };
            generate_three_tier(seed, &config)?
        }
        (CellSource::File(inst), _) => inst.clone(),
        _ => unreachable!("cells follow the campaign source"),
    };
    let instance = if pipeline.variant.has_compression() {
        extend_graph(&instance)
    } else {
        instance
    };
    let pipeline = PipelineConfig {
        seed: pipeline.seed ^ seed,
        ..pipeline
    };
    let (solution, trace) = match cell.mode {
        ObjectiveMode::Te => solve_objective(&instance, &pipeline, Objective::Te)?,
        ObjectiveMode::TeNfv => lexicographic_solve(&instance, &pipeline)?,
        ObjectiveMode::Nfv => solve_objective(&instance, &pipeline, Objective::Nfv)?,
    };
    let last = trace
        .stages
        .last()
        .expect("a pipeline runs at least one stage");
    let spec = VariantSpec {
        extensions: pipeline.extensions.clone(),
        ..VariantSpec::new(pipeline.variant, cell.regime, last.objective)
    };
    let report = validate(&instance, &spec, &solution);
    if !report.feasible {
        let first = &report.violations[0];
        return Err(Error::Pipeline(format!(
            "validator rejected the solution: {} {} ({} violations)",
            first.constraint,
            first.subject,
            report.violations.len()
        )));
    }
    let eval = crate::validate::evaluate(&instance, &spec, &solution);
    let arc_utilization = instance
        .topology
        .arcs()
        .iter()
        .zip(&eval.arc_load)
        .map(|(a, load)| load / a.capacity)
        .collect();
    let mut tiers: BTreeMap<Tier, usize> = Tier::ALL.map(|t| (t, 0)).into();
    for c in &solution.open {
        *tiers
            .entry(instance.topology.node(c.node).tier)
            .or_default() += 1;
    }
    let row = RunRow {
        seed,
        case: cell.case.clone(),
        regime: cell.regime,
        latency_bound: instance
            .demands
            .iter()
            .map(|d| d.latency_bound)
            .fold(f64::NAN, f64::max),
        mode: cell.mode,
        status: if last.status == SolveStatus::Optimal {
            "optimal".into()
        } else {
            "timeout".into()
        },
        utilization: report.max_utilization,
        nfv_cost: report.nfv_cost,
        gap: last.gap,
        runtime: trace.stages.iter().map(|s| s.elapsed).sum(),
        open_copies: solution.open.len(),
        tiers,
    };
    Ok(RunOutput {
        row,
        instance,
        solution,
        report,
        trace,
        arc_utilization,
    })
}

fn write_run(dir: &Path, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("instance.json"), save_instance(&out.instance))?;
    fs::write(
        dir.join("solution.json"),
        serde_json::to_string_pretty(&out.solution)?,
    )?;
    fs::write(
        dir.join("validation.json"),
        serde_json::to_string_pretty(&out.report)?,
    )?;
    fs::write(dir.join("trace.jsonl"), out.trace.to_text())?;
    Ok(())
}

/// Runs every (cell, seed) pair, validates every solution, writes one
/// directory per run under `output/runs` and the aggregate CSV files under
/// `output`. Failed runs are listed, not reported as rows.
pub fn run_campaign(campaign: &Campaign) -> Result<CampaignReport> {
    campaign.validate()?;
    let cells = campaign.cells()?;
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| campaign.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Mutex<Vec<Option<Result<RunOutput>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = Mutex::new(0usize);
    std::thread::scope(|scope| {
        for _ in 0..campaign.parallelism.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("job counter");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(&(c, seed)) = jobs.get(i) else { break };
                let out = run_one(campaign, &cells[c], seed);
                results.lock().expect("result slots")[i] = Some(out);
            });
        }
    });

    let runs_dir = campaign.output.join("runs");
    fs::create_dir_all(&runs_dir)?;
    let mut report = CampaignReport::default();
    for ((c, seed), result) in jobs.iter().zip(results.into_inner().expect("result slots")) {
        let cell = &cells[*c];
        let key = group(&cell.case, cell.regime, cell.mode);
        match result.expect("every job ran") {
            Ok(out) => {
                write_run(&runs_dir.join(format!("{key}-seed{seed}")), &out)?;
                report
                    .utilization_samples
                    .entry(key.clone())
                    .or_default()
                    .extend(&out.arc_utilization);
                report
                    .latency_samples
                    .entry(key)
                    .or_default()
                    .extend(&out.report.latencies);
                report.rows.push(out.row);
            }
            Err(e) => report.failures.push(RunFailure {
                seed: *seed,
                case: cell.case.clone(),
                regime: cell.regime,
                mode: cell.mode,
                reason: e.to_string(),
            }),
        }
    }
    write_report(&campaign.output, &report)?;
    Ok(report)
}

/// Writes the aggregate CSV files of `report` into `dir`. Runtimes go to
/// `timing.csv` alone so that every other file is reproducible byte for byte.
pub fn write_report(dir: &Path, report: &CampaignReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("runs.csv"), runs_csv(report))?;
    fs::write(dir.join("timing.csv"), timing_csv(report))?;
    fs::write(dir.join("failures.csv"), failures_csv(report))?;
    fs::write(dir.join("tiers.csv"), emit_tier_distribution(report))?;
    for (key, values) in &report.utilization_samples {
        fs::write(
            dir.join(format!("utilization-cdf-{key}.csv")),
            emit_cdf(values),
        )?;
    }
    for (key, values) in &report.latency_samples {
        fs::write(dir.join(format!("latency-cdf-{key}.csv")), emit_cdf(values))?;
    }
    Ok(())
}

fn to_csv<R: Serialize>(records: impl IntoIterator<Item = R>, header: &[&str]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in records {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

fn runs_csv(report: &CampaignReport) -> String {
    let header = [
        "seed",
        "case",
        "regime",
        "latency_bound",
        "mode",
        "status",
        "utilization",
        "nfv_cost",
        "gap",
        "open_copies",
        "edge",
        "aggregation",
        "core",
    ];
    let tier = |r: &RunRow, t: Tier| r.tiers.get(&t).copied().unwrap_or(0);
    let records = report.rows.iter().map(|r| {
        (
            r.seed,
            &r.case,
            r.regime.as_str(),
            r.latency_bound,
            r.mode.as_str(),
            &r.status,
            r.utilization,
            r.nfv_cost,
            r.gap,
            r.open_copies,
            tier(r, Tier::Edge),
            tier(r, Tier::Aggregation),
            tier(r, Tier::Core),
        )
    });
    to_csv(records, &header)
}

fn timing_csv(report: &CampaignReport) -> String {
    let records = report.rows.iter().map(|r| {
        (
            r.seed,
            &r.case,
            r.regime.as_str(),
            r.mode.as_str(),
            r.runtime,
        )
    });
    to_csv(records, &["seed", "case", "regime", "mode", "runtime"])
}

fn failures_csv(report: &CampaignReport) -> String {
    let records = report.failures.iter().map(|f| {
        (
            f.seed,
            &f.case,
            f.regime.as_str(),
            f.mode.as_str(),
            &f.reason,
        )
    });
    to_csv(records, &["seed", "case", "regime", "mode", "reason"])
}

/// Empirical CDF of `values`: one `(value, fraction)` row per sample,
/// sorted ascending, the last fraction being 1.
pub fn emit_cdf(values: &[f64]) -> String {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let records = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, (i + 1) as f64 / n));
    to_csv(records, &["value", "fraction"])
}

/// Mean open-copy count per NFVI tier across seeds, with the half-width of
/// its 95% normal-approximation confidence interval, per group.
pub fn emit_tier_distribution(report: &CampaignReport) -> String {
    let mut groups: BTreeMap<(String, Regime, ObjectiveMode), Vec<&RunRow>> = BTreeMap::new();
    for r in &report.rows {
        groups
            .entry((r.case.clone(), r.regime, r.mode))
            .or_default()
            .push(r);
    }
    let mut records = Vec::new();
    for ((case, regime, mode), rows) in &groups {
        for tier in Tier::ALL {
            let counts: Vec<f64> = rows
                .iter()
                .map(|r| *r.tiers.get(&tier).unwrap_or(&0) as f64)
                .collect();
            let (mean, half) = mean_and_half_width(&counts);
            records.push((
                case.clone(),
                regime.as_str(),
                mode.as_str(),
                tier.as_str(),
                mean,
                half,
            ));
        }
    }
    to_csv(
        records,
        &["case", "regime", "mode", "tier", "mean", "half_width"],
    )
}

fn mean_and_half_width(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_cdf() {
        assert_eq!(emit_cdf(&[0.4, 0.2]), "value,fraction\n0.2,0.5\n0.4,1.0\n");
    }

    #[test]
    fn empty_cdf_has_header_only() {
        assert_eq!(emit_cdf(&[]), "value,fraction\n");
    }

    #[test]
    fn single_seed_has_zero_half_width() {
        assert_eq!(mean_and_half_width(&[3.0]), (3.0, 0.0));
        let (m, h) = mean_and_half_width(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((h - 1.96).abs() < 1e-12);
    }

    #[test]
    fn modes_parse() {
        for m in [ObjectiveMode::Te, ObjectiveMode::TeNfv, ObjectiveMode::Nfv] {
            assert_eq!(m.as_str().parse::<ObjectiveMode>().unwrap(), m);
        }
        assert!("both".parse::<ObjectiveMode>().is_err());
    }
}
