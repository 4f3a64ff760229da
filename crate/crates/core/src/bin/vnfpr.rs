//! Command-line front end: instance generation, single solves, campaigns and
//! solution validation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vnfpr::heuristic::{
    alpha_sweep, bisect_vnf_count, lexicographic_solve, solve_objective, PipelineConfig,
    PipelineTrace,
};
use vnfpr::instance::{
    extend_graph, generate_three_tier, load_instance, save_instance, CaseStudy, Instance, Regime,
    ThreeTierConfig,
};
use vnfpr::milp::{build_model, write_lp, write_mps, Objective, Variant, VariantSpec};
use vnfpr::report::{run_campaign, Campaign};
use vnfpr::validate::{validate, Solution};
use vnfpr::{Error, Result};

#[derive(Parser)]
#[command(name = "vnfpr", version, about = "VNF placement and routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    Internet,
    Vpn,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    Te,
    Nfv,
    TeNfv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a three-tier instance.
    Generate {
        #[arg(long, value_enum, default_value = "internet")]
        case: Case,
        #[arg(long, default_value = "standard")]
        regime: Regime,
        /// Seed of the demand bandwidths.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seed of the demand pairs.
        #[arg(long, default_value_t = 0)]
        pair_seed: u64,
        #[arg(long)]
        demands: Option<usize>,
        /// Uniform cap on copies per node and VNF type.
        #[arg(long)]
        max_copies: Option<u32>,
        /// Generator configuration (JSON); flags override its case, regime and counts.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Solve one instance.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "basic-lat")]
        variant: Variant,
        /// Defaults to the regime of the instance's catalog.
        #[arg(long)]
        regime: Option<Regime>,
        #[arg(long, value_enum, default_value = "te-nfv")]
        objective: Mode,
        /// Re-optimize the NFV cost under U <= U* + α for each listed α.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        alpha_sweep: Option<Vec<f64>>,
        /// Find the smallest feasible number of VNF copies.
        #[arg(long)]
        bisect: bool,
        /// Seconds per stage.
        #[arg(long)]
        time_limit: Option<f64>,
        /// Branch-and-bound nodes per warm-started stage.
        #[arg(long)]
        node_limit: Option<u64>,
        /// Write the first stage's model; `.mps` selects MPS, anything else LP.
        #[arg(long)]
        export_lp: Option<PathBuf>,
        /// Pipeline configuration (JSON); flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Solution file (JSON).
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Stage trace, one JSON record per line.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a campaign described by a JSON file.
    Campaign {
        file: PathBuf,
        /// Overrides the campaign's output directory.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check a solution against an instance.
    Validate {
        instance: PathBuf,
        solution: PathBuf,
        #[arg(long, default_value = "basic-lat")]
        variant: Variant,
        #[arg(long)]
        regime: Option<Regime>,
        /// Also enforce U <= this cap.
        #[arg(long)]
        max_utilization: Option<f64>,
        /// Also enforce at most this many open copies.
        #[arg(long)]
        max_copies: Option<u32>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_for(path: &Path, variant: Variant, regime: Option<Regime>) -> Result<(Instance, Regime)> {
    let inst = load_instance(&fs::read_to_string(path)?)?;
    let regime = regime.or(inst.regime()).unwrap_or(Regime::Standard);
    let inst = if variant.has_compression() {
        extend_graph(&inst)
    } else {
        inst
    };
    Ok((inst, regime))
}

fn summarize(inst: &Instance, spec: &VariantSpec, sol: &Solution) {
    let report = validate(inst, spec, sol);
    println!("feasible      {}", report.feasible);
    println!("utilization   {}", report.max_utilization);
    println!("nfv cost      {}", report.nfv_cost);
    println!("open copies   {}", report.open_copies);
}

fn print_stages(trace: &PipelineTrace) {
    for s in &trace.stages {
        println!(
            "stage {:<24} {:<10} U {:<22} cost {:<8} gap {:.3e} nodes {} {:.2}s",
            s.stage,
            s.status.as_str(),
            s.utilization.map_or("-".into(), |u| u.to_string()),
            s.nfv_cost.map_or("-".into(), |c| c.to_string()),
            s.gap,
            s.nodes,
            s.elapsed
        );
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate {
            case,
            regime,
            seed,
            pair_seed,
            demands,
            max_copies,
            config,
            output,
        } => {
            let base: ThreeTierConfig = match &config {
                Some(p) => read_json(p)?,
                None => ThreeTierConfig::default(),
            };
            let config = ThreeTierConfig {
                case: match case {
                    Case::Internet => CaseStudy::Internet,
                    Case::Vpn => CaseStudy::Vpn,
                },
                regime,
                pair_seed,
                demand_count: demands.or(base.demand_count),
                max_copies: max_copies.or(base.max_copies),
                ..base
            };
            let inst = generate_three_tier(seed, &config)?;
            write_or_print(output.as_deref(), &save_instance(&inst))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve {
            instance,
            variant,
            regime,
            objective,
            alpha_sweep: alphas,
            bisect,
            time_limit,
            node_limit,
            export_lp,
            config,
            output,
            trace,
        } => {
            let (inst, regime) = load_for(&instance, variant, regime)?;
            let mut cfg: PipelineConfig = match &config {
                Some(p) => read_json(p)?,
                None => PipelineConfig::default(),
            };
            cfg.variant = variant;
            cfg.regime = regime;
            if let Some(t) = time_limit {
                cfg.te_time_limit = t;
                cfg.nfv_time_limit = t;
            }
            if node_limit.is_some() {
                cfg.node_limit = node_limit;
            }
            if let Some(a) = &alphas {
                cfg.alphas = a.clone();
            }
            cfg.validate()?;
            if let Some(path) = &export_lp {
                let first = if objective == Mode::Nfv {
                    Objective::Nfv
                } else {
                    Objective::Te
                };
                let spec = VariantSpec {
                    extensions: cfg.extensions.clone(),
                    ..VariantSpec::new(variant, regime, first)
                };
                let model = build_model(&inst, &spec)?;
                let text = if path.extension().is_some_and(|e| e == "mps") {
                    write_mps(&model)
                } else {
                    write_lp(&model)
                };
                fs::write(path, text)?;
            }
            let (sol, tr, spec) = if bisect {
                let (cap, sol, tr) = bisect_vnf_count(&inst, &cfg)?;
                println!("minimal copy count {cap}");
                for p in &tr.bisection {
                    println!("probe cap {:<6} {:?}", p.cap, p.outcome);
                }
                (sol, tr, Objective::CopyCountCap { cap })
            } else if alphas.is_some() {
                let (rows, tr) = alpha_sweep(&inst, &cfg)?;
                for r in &rows {
                    println!(
                        "alpha {:<6} {:<10} cost {:<8} U {}",
                        r.alpha,
                        r.status.as_str(),
                        r.nfv_cost.map_or("-".into(), |c| c.to_string()),
                        r.utilization.map_or("-".into(), |u| u.to_string())
                    );
                }
                print_stages(&tr);
                if let Some(p) = &trace {
                    fs::write(p, tr.to_text())?;
                }
                return Ok(ExitCode::SUCCESS);
            } else {
                let (sol, tr) = match objective {
                    Mode::Te => solve_objective(&inst, &cfg, Objective::Te)?,
                    Mode::Nfv => solve_objective(&inst, &cfg, Objective::Nfv)?,
                    Mode::TeNfv => lexicographic_solve(&inst, &cfg)?,
                };
                let last = tr.stages.last().expect("at least one stage").objective;
                (sol, tr, last)
            };
            print_stages(&tr);
            let spec = VariantSpec {
                extensions: cfg.extensions.clone(),
                ..VariantSpec::new(variant, regime, spec)
            };
            summarize(&inst, &spec, &sol);
            if let Some(p) = &output {
                fs::write(p, serde_json::to_string_pretty(&sol)?)?;
            }
            if let Some(p) = &trace {
                fs::write(p, tr.to_text())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Campaign { file, output } => {
            let mut campaign: Campaign = read_json(&file)?;
            if let Some(o) = output {
                campaign.output = o;
            }
            let report = run_campaign(&campaign)?;
            println!(
                "{} runs, {} failed; results in {}",
                report.rows.len(),
                report.failures.len(),
                campaign.output.display()
            );
            for f in &report.failures {
                println!(
                    "failed {} {} {} seed {}: {}",
                    f.case,
                    f.regime.as_str(),
                    f.mode.as_str(),
                    f.seed,
                    f.reason
                );
            }
            Ok(if report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Validate {
            instance,
            solution,
            variant,
            regime,
            max_utilization,
            max_copies,
        } => {
            let (inst, regime) = load_for(&instance, variant, regime)?;
            let sol: Solution = read_json(&solution)?;
            let objective = match (max_utilization, max_copies) {
                (Some(u), None) => Objective::NfvWithUtilizationCap {
                    u_star: u,
                    alpha: 0.0,
                },
                (None, Some(cap)) => Objective::CopyCountCap { cap },
                (None, None) => Objective::Te,
                (Some(_), Some(_)) => {
                    return Err(Error::Config(
                        "give at most one of --max-utilization and --max-copies".into(),
                    ))
                }
            };
            let report = validate(&inst, &VariantSpec::new(variant, regime, objective), &sol);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.feasible {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
