//! Matheuristic pipeline against exhaustive enumeration.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vnfpr::heuristic::{
    alpha_sweep, bisect_vnf_count, cascade_solve, copy_upper_bound, lexicographic_solve,
    PipelineConfig,
};
use vnfpr::instance::{extend_graph, samples, Regime};
use vnfpr::milp::{build_model, Objective, Variant, VariantSpec};
use vnfpr::solver::{solve, SolveStatus, SolverConfig};
use vnfpr::validate::validate;

fn config(variant: Variant, regime: Regime) -> PipelineConfig {
    PipelineConfig {
        variant,
        regime,
        gap_tolerance: 1e-9,
        ..PipelineConfig::default()
    }
}

#[test]
fn lexicographic_phase_two_is_cheapest_at_optimal_utilization() {
    let mut checked = 0;
    for seed in 0..24u64 {
        let regime = if seed % 2 == 0 {
            Regime::Standard
        } else {
            Regime::Fastpath
        };
        let variant = [Variant::Basic, Variant::BasicLat][(seed / 2 % 2) as usize];
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 500);
        let inst = common::random_instance(&mut rng, regime, false);
        let cfg = config(variant, regime);
        let Ok((sol, trace)) = lexicographic_solve(&inst, &cfg) else {
            assert!(
                common::oracle(&inst, &VariantSpec::new(variant, regime, Objective::Te)).is_none()
            );
            continue;
        };
        let u_star =
            common::oracle(&inst, &VariantSpec::new(variant, regime, Objective::Te)).unwrap();
        assert!(
            (trace.stages[0].utilization.unwrap() - u_star).abs() < 1e-6,
            "seed {seed}"
        );
        let capped = VariantSpec::new(
            variant,
            regime,
            Objective::NfvWithUtilizationCap { u_star, alpha: 0.0 },
        );
        let cheapest = common::oracle(&inst, &capped).unwrap();
        let report = validate(&inst, &capped, &sol);
        assert!(report.feasible, "seed {seed}: {:?}", report.violations);
        assert!(
            (report.nfv_cost - cheapest).abs() < 1e-9,
            "seed {seed}: {} vs {cheapest}",
            report.nfv_cost
        );
        assert!(report.nfv_cost <= trace.stages[0].nfv_cost.unwrap() + 1e-9);
        checked += 1;
    }
    assert!(checked >= 12, "only {checked} feasible instances");
}

#[test]
fn alpha_sweep_is_monotone_and_starts_at_phase_two() {
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 900);
        let inst = common::random_instance(&mut rng, Regime::Standard, false);
        let cfg = PipelineConfig {
            alphas: vec![0.0, 0.25, 0.5, 1.0],
            ..config(Variant::BasicLat, Regime::Standard)
        };
        let Ok((rows, trace)) = alpha_sweep(&inst, &cfg) else {
            continue;
        };
        let (_, lex) = lexicographic_solve(&inst, &cfg).unwrap();
        assert_eq!(rows[0].nfv_cost, lex.stages[1].nfv_cost);
        for w in rows.windows(2) {
            assert!(w[1].nfv_cost.unwrap() <= w[0].nfv_cost.unwrap() + 1e-9);
        }
        let stopped = rows.len() < cfg.alphas.len();
        if stopped {
            let n = rows.len();
            assert_eq!(rows[n - 1].nfv_cost, rows[n - 2].nfv_cost);
        }
        assert_eq!(trace.alpha_sweep, rows);
    }
}

#[test]
fn bisection_matches_exhaustive_copy_count() {
    for seed in 0..16u64 {
        let regime = if seed % 2 == 0 {
            Regime::Standard
        } else {
            Regime::Fastpath
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1300);
        let inst = common::random_instance(&mut rng, regime, false);
        let cfg = config(Variant::BasicLat, regime);
        let spec = VariantSpec::new(Variant::BasicLat, regime, Objective::Nfv);
        let expected = common::min_copies(&inst, &spec);
        match bisect_vnf_count(&inst, &cfg) {
            Ok((cap, witness, trace)) => {
                assert_eq!(Some(cap), expected, "seed {seed}");
                assert!(witness.open.len() as u32 <= cap);
                let c_max = copy_upper_bound(&inst).max(1) as f64;
                assert!(
                    trace.bisection.len() as f64 <= c_max.log2().ceil() + 3.0,
                    "seed {seed}"
                );
            }
            Err(_) => assert_eq!(expected, None, "seed {seed}"),
        }
    }
}

#[test]
fn cascade_without_compression_matches_direct_solve() {
    for seed in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1700);
        let inst = extend_graph(&common::random_instance(&mut rng, Regime::Fastpath, false));
        let cfg = config(Variant::BasicLatCd, Regime::Fastpath);
        let spec = VariantSpec::new(Variant::BasicLat, Regime::Fastpath, Objective::Te);
        let direct = solve(
            &build_model(&inst, &spec).unwrap(),
            &SolverConfig::default(),
        )
        .unwrap();
        match cascade_solve(&inst, &cfg, Objective::Te) {
            Ok((_, trace)) => {
                assert_eq!(direct.status, SolveStatus::Optimal);
                let names: Vec<_> = trace.stages.iter().map(|s| s.stage.as_str()).collect();
                assert_eq!(names, ["basic", "basic-lat", "basic-lat-cd"]);
                let last = trace.stages.last().unwrap();
                assert_eq!(last.status, SolveStatus::Optimal);
                assert!(
                    (last.utilization.unwrap() - direct.objective.unwrap()).abs() < 1e-6,
                    "seed {seed}"
                );
            }
            Err(_) => assert_eq!(direct.status, SolveStatus::Infeasible, "seed {seed}"),
        }
    }
}

#[test]
fn cascade_stages_with_compression_stay_sound() {
    for seed in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 2100);
        let inst = common::random_instance(&mut rng, Regime::Standard, true);
        let cfg = config(Variant::BasicLatCd, Regime::Standard);
        let Ok((sol, trace)) = cascade_solve(&inst, &cfg, Objective::Nfv) else {
            continue;
        };
        let spec = VariantSpec::new(Variant::BasicLatCd, Regime::Standard, Objective::Nfv);
        assert!(validate(&inst, &spec, &sol).feasible);
        let expected = common::oracle(&inst, &spec).unwrap();
        assert!(
            (trace.stages[2].nfv_cost.unwrap() - expected).abs() < 1e-9,
            "seed {seed}"
        );
    }
}

#[test]
fn isolated_demands_need_two_copies() {
    let mut inst = samples::line(Regime::Fastpath);
    let mut second = inst.demands[0].clone();
    second.name = "d1".into();
    inst.demands.push(second);
    for v in &mut inst.vnfs {
        v.copies = vnfpr::instance::CopyLimit::PerNode([(vnfpr::instance::NodeId(2), 2)].into());
    }
    let mut cfg = config(Variant::Basic, Regime::Fastpath);
    cfg.extensions.isolation = vec![(vnfpr::instance::DemandId(0), vnfpr::instance::DemandId(1))];
    let (cap, witness, _) = bisect_vnf_count(&inst, &cfg).unwrap();
    assert_eq!(cap, 2);
    assert_eq!(witness.open.len(), 2);
}
