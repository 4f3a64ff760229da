//! Property tests over random desk-scale instances.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vnfpr::heuristic::construct;
use vnfpr::instance::{
    demand_bandwidth_bounds, load_instance, save_instance, worst_case_bandwidth, ChainOrder, Regime,
};
use vnfpr::milp::{
    build_model, decode, encode, normalize_copies, read_mps, write_mps, Objective, Variant,
    VariantSpec,
};
use vnfpr::solver::check_feasible;
use vnfpr::validate::validate;

const VARIANTS: [Variant; 4] = [
    Variant::Basic,
    Variant::BasicLat,
    Variant::BasicCd,
    Variant::BasicLatCd,
];

fn instance(seed: u64, variant: Variant, regime: Regime) -> vnfpr::instance::Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::random_instance(&mut rng, regime, variant.has_compression())
}

fn regime_of(fast: bool) -> Regime {
    if fast {
        Regime::Fastpath
    } else {
        Regime::Standard
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn instance_json_round_trips(seed in any::<u64>(), v in 0usize..4, fast in any::<bool>()) {
        let inst = instance(seed, VARIANTS[v], regime_of(fast));
        prop_assert_eq!(load_instance(&save_instance(&inst)).unwrap(), inst);
    }

    #[test]
    fn bandwidth_bounds_bracket_every_prefix(seed in any::<u64>(), fast in any::<bool>()) {
        let inst = instance(seed, Variant::BasicCd, regime_of(fast));
        for d in &inst.demands {
            let (lo, hi) = demand_bandwidth_bounds(d, &inst.vnfs).unwrap();
            prop_assert!(lo <= d.bandwidth && d.bandwidth <= hi);
            let worst = worst_case_bandwidth(d, &inst.vnfs).unwrap();
            prop_assert!(worst <= hi + 1e-12);
            if d.order == ChainOrder::Total {
                let mut rate = d.bandwidth;
                for f in &d.chain {
                    rate *= inst.vnf(*f).compression;
                    prop_assert!(lo - 1e-12 <= rate && rate <= worst + 1e-12);
                }
            }
        }
    }

    #[test]
    fn heuristic_solutions_are_feasible_and_encode_exactly(
        seed in any::<u64>(),
        v in 0usize..4,
        fast in any::<bool>(),
        te in any::<bool>(),
    ) {
        let regime = regime_of(fast);
        let inst = instance(seed, VARIANTS[v], regime);
        let objective = if te { Objective::Te } else { Objective::Nfv };
        let spec = VariantSpec::new(VARIANTS[v], regime, objective);
        if let Some(sol) = construct(&inst, &spec) {
            let report = validate(&inst, &spec, &sol);
            prop_assert!(report.feasible, "{:?}", report.violations);
            let model = build_model(&inst, &spec).unwrap();
            let values = encode(&inst, &spec, &model, &sol).unwrap();
            prop_assert!(check_feasible(&model, &values).unwrap().is_empty());
            prop_assert_eq!(decode(&inst, &model, &values).unwrap(), normalize_copies(&sol));
            let expected = if te { report.max_utilization } else { report.nfv_cost };
            prop_assert!((model.objective_value(&values) - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn models_round_trip_through_mps(seed in any::<u64>(), v in 0usize..4, fast in any::<bool>()) {
        let regime = regime_of(fast);
        let inst = instance(seed, VARIANTS[v], regime);
        let model = build_model(&inst, &VariantSpec::new(VARIANTS[v], regime, Objective::Te)).unwrap();
        prop_assert_eq!(read_mps(&write_mps(&model)).unwrap(), model);
    }
}
