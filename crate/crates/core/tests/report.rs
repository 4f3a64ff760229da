//! Campaign execution and the CSV artifacts.

use std::fs;

use vnfpr::heuristic::PipelineConfig;
use vnfpr::instance::{CaseStudy, Regime, ThreeTierConfig};
use vnfpr::milp::Variant;
use vnfpr::report::{run_campaign, Campaign, InstanceSource, ObjectiveMode};

fn campaign(dir: &std::path::Path) -> Campaign {
    Campaign {
        source: InstanceSource::Generator {
            config: ThreeTierConfig {
                demand_count: Some(3),
                max_copies: Some(1),
                pair_seed: 4,
                ..ThreeTierConfig::default()
            },
            cases: vec![CaseStudy::Internet, CaseStudy::Vpn],
        },
        seeds: vec![1, 2],
        regimes: vec![Regime::Fastpath],
        modes: vec![ObjectiveMode::Te, ObjectiveMode::TeNfv],
        pipeline: PipelineConfig {
            variant: Variant::BasicLat,
            node_limit: Some(10),
            ..PipelineConfig::default()
        },
        output: dir.to_path_buf(),
        parallelism: 2,
    }
}

#[test]
fn small_campaign_is_complete_valid_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let report = run_campaign(&campaign(a.path())).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    assert_eq!(report.rows.len(), 8);
    for row in &report.rows {
        let tiers: usize = row.tiers.values().sum();
        assert_eq!(tiers, row.open_copies);
        assert_eq!(row.nfv_cost, row.open_copies as f64);
        let dir = a.path().join("runs").join(format!(
            "{}-{}-{}-seed{}",
            row.case,
            row.regime.as_str(),
            row.mode.as_str(),
            row.seed
        ));
        for f in [
            "instance.json",
            "solution.json",
            "validation.json",
            "trace.jsonl",
        ] {
            assert!(dir.join(f).is_file(), "{}", dir.join(f).display());
        }
    }
    for te in report.rows.iter().filter(|r| r.mode == ObjectiveMode::Te) {
        let lex = report
            .rows
            .iter()
            .find(|r| r.mode == ObjectiveMode::TeNfv && r.case == te.case && r.seed == te.seed)
            .unwrap();
        assert!(lex.nfv_cost <= te.nfv_cost);
    }

    run_campaign(&campaign(b.path())).unwrap();
    let mut compared = 0;
    for entry in fs::read_dir(a.path()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if !name.ends_with(".csv") || name == "timing.csv" {
            continue;
        }
        assert_eq!(
            fs::read(&path).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name}"
        );
        compared += 1;
    }
    assert!(compared >= 5);
}

#[test]
fn campaign_rejects_repeated_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = campaign(dir.path());
    c.seeds = vec![3, 3];
    assert!(run_campaign(&c).is_err());
}

#[test]
fn campaign_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let c = campaign(dir.path());
    let text = serde_json::to_string(&c).unwrap();
    let back: Campaign = serde_json::from_str(&text).unwrap();
    assert_eq!(back, c);
}
