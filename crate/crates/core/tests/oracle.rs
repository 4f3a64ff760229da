//! Exact solver against exhaustive enumeration on random desk-scale instances.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vnfpr::instance::Regime;
use vnfpr::milp::{build_model, decode, Objective, Variant, VariantSpec};
use vnfpr::solver::{solve, SolveStatus, SolverConfig};
use vnfpr::validate::validate;

const TOLERANCE: f64 = 1e-6;

fn check_cell(variant: Variant, regime: Regime, seeds: u64) {
    let cfg = SolverConfig {
        gap_tolerance: 1e-9,
        ..SolverConfig::default()
    };
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed * 1000 + 17);
        let inst = common::random_instance(&mut rng, regime, variant.has_compression());
        for objective in [Objective::Te, Objective::Nfv] {
            let spec = VariantSpec::new(variant, regime, objective);
            let expected = common::oracle(&inst, &spec);
            let model = build_model(&inst, &spec).unwrap();
            let r = solve(&model, &cfg).unwrap();
            let label = format!("{variant} {regime:?} {objective:?} seed {seed}");
            match expected {
                None => assert_eq!(r.status, SolveStatus::Infeasible, "{label}"),
                Some(best) => {
                    assert_eq!(r.status, SolveStatus::Optimal, "{label}");
                    let got = r.objective.unwrap();
                    assert!(
                        (got - best).abs() <= TOLERANCE,
                        "{label}: solver {got} oracle {best}"
                    );
                    let sol = decode(&inst, &model, r.values.as_ref().unwrap()).unwrap();
                    let report = validate(&inst, &spec, &sol);
                    assert!(report.feasible, "{label}: {:?}", report.violations);
                }
            }
        }
    }
}

#[test]
fn basic_matches_enumeration() {
    check_cell(Variant::Basic, Regime::Standard, 6);
    check_cell(Variant::Basic, Regime::Fastpath, 6);
}

#[test]
fn latency_variant_matches_enumeration() {
    check_cell(Variant::BasicLat, Regime::Standard, 6);
    check_cell(Variant::BasicLat, Regime::Fastpath, 6);
}

#[test]
fn compression_variant_matches_enumeration() {
    check_cell(Variant::BasicCd, Regime::Standard, 6);
    check_cell(Variant::BasicCd, Regime::Fastpath, 6);
}

#[test]
fn combined_variant_matches_enumeration() {
    check_cell(Variant::BasicLatCd, Regime::Standard, 6);
    check_cell(Variant::BasicLatCd, Regime::Fastpath, 6);
}
