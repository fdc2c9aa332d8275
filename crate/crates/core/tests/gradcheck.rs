mod common;

use common::{composite_case, op_cases, tiny_config, GRAD_SEEDS, GRAD_TOL};
use genrefuse::train::Ablation;

#[test]
fn every_op_matches_finite_differences() {
    for (name, case) in op_cases() {
        for seed in 0..GRAD_SEEDS {
            let report = case(seed);
            assert!(report.checked > 0, "{name}: nothing checked");
            assert!(
                report.passes(GRAD_TOL),
                "{name} seed {seed}: max relative error {:.3e} at {:?}",
                report.max_rel_error,
                report.worst
            );
        }
    }
}

#[test]
fn full_model_matches_finite_differences() {
    let config = tiny_config();
    for seed in 0..GRAD_SEEDS {
        let report = composite_case(seed, &config);
        assert!(
            report.passes(GRAD_TOL),
            "seed {seed}: max relative error {:.3e} at {:?}",
            report.max_rel_error,
            report.worst
        );
    }
}

#[test]
fn ablated_models_match_finite_differences() {
    for list in ["al-loss,scma,gcem", "gcem", "scma"] {
        let mut config = tiny_config();
        config.ablation = Ablation::default().disable(list).unwrap();
        for seed in 0..5 {
            let report = composite_case(seed, &config);
            assert!(report.passes(GRAD_TOL), "{list} seed {seed}: {:.3e} at {:?}", report.max_rel_error, report.worst);
        }
    }
}
