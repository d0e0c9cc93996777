//! Acceptance gate: one test per primary criterion, each printing a PASS
//! line when it holds. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines.

use std::process::Command;

use capsbench::config::parse_config;
use capsbench::report::parse_csv;
use capsbench::{bench, DEFAULT_CONFIG};
use capsconv::network::{InputSpec, LayerSpec, Network, NetworkConfig};
use capsconv::reference::finite_diff_grad;
use capsconv::suite::{
    adjointness_suite, backward_suite, degenerate_suite, determinism_suite,
    forward_equivalence_suite, SuiteOptions,
};
use capsconv::{
    conv_forward, AccumMode, CapsuleTensor, ConvConfig, ConvKernel, EngineKind, ExecContext,
    PoseDims, ScalarKind,
};

fn pass(name: &str) {
    println!("PASS [PRIMARY] {name}");
}

#[test]
fn figure2_golden() {
    // All-ones 5x5 map of 3x3x3 poses under an all-ones 4x4 kernel: every
    // output scalar is 16 positions * inner dim 3 = 48.
    let pose = PoseDims::new(3, 3, 3).unwrap();
    let input = CapsuleTensor::new(1, 1, 5, 5, pose, vec![1.0f64; 25 * 27]).unwrap();
    let kernel = ConvKernel::new(1, 1, 4, 4, pose, vec![1.0; 16 * 27]).unwrap();
    let cfg = ConvConfig::new(1, 0).unwrap();
    for engine in EngineKind::all() {
        for ctx in [ExecContext::reference(), ExecContext::new(AccumMode::Optimized, 4)] {
            let out = conv_forward(engine, &input, &kernel, cfg, &ctx).unwrap();
            assert_eq!(out.shape(), (1, 1, 2, 2, pose), "{engine}");
            assert!(out.data().iter().all(|&v| v == 48.0), "{engine}");
        }
    }
    pass("figure-2 golden value (48.0 at every output slot)");
}

#[test]
fn forward_oracle_equivalence() {
    let opts = SuiteOptions::default();
    assert_eq!(opts.forward_instances, 100);
    assert_eq!(opts.engine_rel_tol, 1e-9);
    let failures = forward_equivalence_suite::<f64>(&opts);
    assert!(failures.is_empty(), "{failures:?}");
    pass("forward equivalence on 100 random instances (exact / <= 1e-9)");
}

#[test]
fn backward_correctness() {
    let opts = SuiteOptions::default();
    assert!(opts.backward_instances >= 20);
    assert_eq!(opts.grad_rel_tol, 1e-6);
    let failures = backward_suite(&opts);
    assert!(failures.is_empty(), "{failures:?}");
    pass("backward vs oracle and finite differences (>= 20 instances, <= 1e-6)");
}

fn tiny_depth3(engine: EngineKind) -> NetworkConfig {
    let pose = PoseDims { slices: 1, rows: 2, cols: 2 };
    let cfg = ConvConfig { stride: 1, padding: 0 };
    let channels = [1usize, 2, 2, 1];
    NetworkConfig {
        input: InputSpec { batch: 1, channels: 1, height: 4, width: 4, pose },
        layers: (0..3)
            .map(|i| LayerSpec {
                k_h: 2,
                k_w: 2,
                in_channels: channels[i],
                out_channels: channels[i + 1],
                kernel_pose: pose,
                cfg,
                engine,
            })
            .collect(),
        seed: 77,
    }
}

#[test]
fn backward_depth3_network_finite_differences() {
    let tol = 1e-5;
    let h = 1e-5;
    let config = tiny_depth3(EngineKind::Accel);
    let net: Network<f64> = Network::init(config.clone()).unwrap();
    let pose = config.input.pose;
    let x_data: Vec<f64> = (0..16 * pose.len()).map(|i| ((i * 13 % 31) as f64) / 31.0 - 0.5).collect();
    let x = CapsuleTensor::new(1, 1, 4, 4, pose, x_data.clone()).unwrap();
    let ctx = ExecContext::new(AccumMode::Optimized, 2);

    // L = sum(O^2)/2 so dO = O.
    let (out, tape) = net.forward(&x, &ctx).unwrap();
    let (di, dks) = net.backward(&tape, &out, &ctx).unwrap();

    // Same gradients from the naive engine end to end.
    let naive_net: Network<f64> =
        Network::with_kernels(tiny_depth3(EngineKind::Naive), net.kernels().to_vec()).unwrap();
    let (nout, ntape) = naive_net.forward(&x, &ExecContext::reference()).unwrap();
    assert_eq!(nout.data(), out.data());
    let (ndi, ndks) = naive_net.backward(&ntape, &nout, &ExecContext::reference()).unwrap();
    assert_eq!(ndi.data(), di.data());
    for (a, b) in dks.iter().zip(&ndks) {
        assert_eq!(a.data(), b.data());
    }

    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    let loss_with = |kernels: Vec<ConvKernel<f64>>, input: &CapsuleTensor<f64>| {
        let net: Network<f64> =
            Network::with_kernels(tiny_depth3(EngineKind::Naive), kernels).unwrap();
        let (o, _) = net.forward(input, &ExecContext::reference()).unwrap();
        o.data().iter().map(|v| v * v).sum::<f64>() / 2.0
    };

    // Every kernel parameter of every layer.
    for layer in 0..3 {
        let base = net.kernels()[layer].clone();
        let fd = finite_diff_grad(
            |kd: &[f64]| {
                let mut kernels = net.kernels().to_vec();
                kernels[layer] = ConvKernel::new(
                    base.out_channels(),
                    base.in_channels(),
                    base.k_h(),
                    base.k_w(),
                    base.pose(),
                    kd.to_vec(),
                )
                .unwrap();
                loss_with(kernels, &x)
            },
            base.data(),
            h,
        );
        for (idx, (a, b)) in dks[layer].data().iter().zip(&fd).enumerate() {
            assert!(rel(*a, *b) <= tol, "layer {layer} param {idx}: {a} vs {b}");
        }
    }

    // Every input parameter.
    let fd_i = finite_diff_grad(
        |xd: &[f64]| {
            let input = CapsuleTensor::new(1, 1, 4, 4, pose, xd.to_vec()).unwrap();
            loss_with(net.kernels().to_vec(), &input)
        },
        &x_data,
        h,
    );
    for (idx, (a, b)) in di.data().iter().zip(&fd_i).enumerate() {
        assert!(rel(*a, *b) <= tol, "input param {idx}: {a} vs {b}");
    }
    pass("depth-3 network gradients vs finite differences (<= 1e-5)");
}

#[test]
fn adjointness() {
    let opts = SuiteOptions::default();
    assert!(opts.adjoint_instances >= 20);
    assert_eq!(opts.adjoint_rel_tol, 1e-12);
    let failures = adjointness_suite(&opts);
    assert!(failures.is_empty(), "{failures:?}");
    pass("im2col/col2im and extend/reduce adjointness (<= 1e-12)");
}

#[test]
fn degenerate_scalar_convolution() {
    let opts = SuiteOptions::default();
    assert_eq!(opts.degenerate_instances, 50);
    let failures = degenerate_suite(&opts);
    assert!(failures.is_empty(), "{failures:?}");
    pass("degenerate 1x1x1 poses match plain scalar convolution exactly (50 instances)");
}

#[test]
fn determinism_across_workers() {
    let failures = determinism_suite(&SuiteOptions::default());
    assert!(failures.is_empty(), "{failures:?}");
    pass("bit-identical outputs across worker counts {1, 2, 8} and repeated runs");
}

#[test]
fn performance_default_config() {
    let started = std::time::Instant::now();
    let mut cfg = parse_config(DEFAULT_CONFIG).unwrap();
    cfg.scalar = ScalarKind::F32;
    cfg.workers = 4;
    cfg.reps = 5;
    let report = bench::run_bench::<f32>(
        &cfg,
        &[EngineKind::Naive, EngineKind::Accel, EngineKind::Indexed],
    )
    .unwrap();
    let get = |name: &str| {
        report
            .rows
            .iter()
            .find(|r| r.engine == name)
            .unwrap_or_else(|| panic!("missing row for {name}"))
    };
    let (accel, indexed) = (get("accel"), get("indexed"));
    assert!(
        accel.speedup >= 2.0,
        "accel speedup {:.2} < 2.0 over naive",
        accel.speedup
    );
    assert!(
        indexed.speedup >= 2.0,
        "indexed speedup {:.2} < 2.0 over naive",
        indexed.speedup
    );
    let ratio = accel.total_ms / indexed.total_ms;
    assert!(
        (0.5..=2.0).contains(&ratio),
        "accel/indexed ratio {ratio:.2} outside [0.5, 2.0]"
    );
    assert!(started.elapsed().as_secs() < 600, "benchmark exceeded 10 minutes");
    pass(&format!(
        "default-config benchmark: accel {:.2}x, indexed {:.2}x over naive",
        accel.speedup, indexed.speedup
    ));
}

#[test]
fn cli_contract() {
    let bin = env!("CARGO_BIN_EXE_capsbench");
    let tmp = std::env::temp_dir().join("capsbench-acceptance");
    std::fs::create_dir_all(&tmp).unwrap();

    // check on the shipped default config exits 0.
    let status = Command::new(bin).arg("check").status().unwrap();
    assert!(status.success(), "check exited {status}");

    // bench --csv emits a parseable, byte-stable file.
    let small = "\
reps = 3
[input]
batch = 1
channels = 1
height = 6
width = 6
pose = 1x2x2
[layer.1]
k = 2
stride = 1
in_ch = 1
out_ch = 2
pose = 1x2x2
";
    let cfg_path = tmp.join("small.cfg");
    std::fs::write(&cfg_path, small).unwrap();
    let csv_path = tmp.join("bench.csv");
    let output = Command::new(bin)
        .args(["bench", "--config"])
        .arg(&cfg_path)
        .args(["--engine", "all", "--csv"])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(output.status.success(), "bench exited {}", output.status);
    let csv_text = std::fs::read_to_string(&csv_path).unwrap();
    let report = parse_csv(&csv_text).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert_eq!(capsbench::report::csv_string(&report), csv_text);

    // A known-bad tolerance fails the check with exit code 1.
    let bad_tol = format!("tolerance = 0\ncheck_instances = 5\n{small}");
    let bad_path = tmp.join("bad_tol.cfg");
    std::fs::write(&bad_path, &bad_tol).unwrap();
    let output = Command::new(bin)
        .args(["check", "--config"])
        .arg(&bad_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stdout).contains("FAIL"));

    // An invalid config is a diagnosis, not a crash: exit code 2.
    let bad_cfg = small.replace("stride = 1", "stride = 0");
    let bad_cfg_path = tmp.join("bad_cfg.cfg");
    std::fs::write(&bad_cfg_path, &bad_cfg).unwrap();
    let output = Command::new(bin)
        .args(["check", "--config"])
        .arg(&bad_cfg_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("stride"));

    pass("CLI contract: check exit codes and stable CSV round trip");
}
