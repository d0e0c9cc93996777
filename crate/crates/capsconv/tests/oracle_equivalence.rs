//! Engine-vs-oracle equivalence over the randomized suites.

use capsconv::suite::{
    degenerate_suite, determinism_suite, forward_equivalence_suite, index_totality_suite,
    SuiteOptions,
};

#[test]
fn forward_equivalence_100_instances_f64() {
    let opts = SuiteOptions::default();
    assert_eq!(opts.forward_instances, 100);
    let failures = forward_equivalence_suite::<f64>(&opts);
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn forward_equivalence_f32() {
    let opts = SuiteOptions { engine_rel_tol: 1e-4, ..SuiteOptions::default() };
    let failures = forward_equivalence_suite::<f32>(&opts);
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn degenerate_scalar_convolution_50_instances() {
    let opts = SuiteOptions::default();
    assert_eq!(opts.degenerate_instances, 50);
    let failures = degenerate_suite(&opts);
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn deterministic_across_worker_counts() {
    let failures = determinism_suite(&SuiteOptions::default());
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn index_table_is_total() {
    let failures = index_totality_suite(&SuiteOptions::default());
    assert!(failures.is_empty(), "{failures:?}");
}
