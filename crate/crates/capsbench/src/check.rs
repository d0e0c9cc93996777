//! The `check` command: runs every verification suite and prints one
//! PASS/FAIL line per suite plus any failure diagnostics.

use capsconv::suite::{
    adjointness_suite, backward_suite, degenerate_suite, determinism_suite,
    forward_equivalence_suite, index_totality_suite, SuiteOptions,
};
use capsconv::ScalarKind;

use crate::config::BenchConfig;

pub fn suite_options(cfg: &BenchConfig) -> SuiteOptions {
    let mut opts = SuiteOptions {
        seed: cfg.seed,
        workers: cfg.workers,
        forward_instances: cfg.check_instances,
        ..SuiteOptions::default()
    };
    if let Some(t) = cfg.tolerance {
        opts.engine_rel_tol = t;
        opts.grad_rel_tol = t;
        opts.adjoint_rel_tol = t;
    }
    opts
}

/// Returns true when every suite passes.
pub fn run_check(cfg: &BenchConfig) -> bool {
    let opts = suite_options(cfg);
    let forward = match cfg.scalar {
        ScalarKind::F32 => forward_equivalence_suite::<f32>(&opts),
        ScalarKind::F64 => forward_equivalence_suite::<f64>(&opts),
    };
    let suites = [
        ("forward equivalence", forward),
        ("backward gradients", backward_suite(&opts)),
        ("adjointness", adjointness_suite(&opts)),
        ("determinism", determinism_suite(&opts)),
        ("degenerate scalar conv", degenerate_suite(&opts)),
        ("index-table totality", index_totality_suite(&opts)),
    ];
    let mut ok = true;
    for (name, failures) in suites {
        if failures.is_empty() {
            println!("PASS {name}");
        } else {
            ok = false;
            println!("FAIL {name} ({} failures)", failures.len());
            for f in failures {
                println!("  {f}");
            }
        }
    }
    ok
}
