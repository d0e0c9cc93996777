//! Randomized verification suites shared by the CLI `check` command and the
//! acceptance tests: oracle equivalence, gradient checks, adjointness,
//! determinism, and degenerate scalar-convolution equivalence.
//!
//! Every suite is seeded; failure diagnostics name the instance index and
//! seed so a failing case can be replayed exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::accel::{accel_backward, accel_forward};
use crate::engine::{conv_forward, EngineKind};
use crate::exec::{AccumMode, ExecContext};
use crate::indexed::{build_index_table, indexed_forward};
use crate::lowering::{capsule_col2im, capsule_im2col, input_extend, input_reduce, FlattenedInput};
use crate::reference::{finite_diff_grad, naive_backward, naive_forward};
use crate::tensor::{CapsuleTensor, ConvConfig, ConvKernel, PoseDims, Scalar};

#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    pub forward_instances: usize,
    pub backward_instances: usize,
    pub adjoint_instances: usize,
    pub degenerate_instances: usize,
    /// Relative tolerance for optimized-mode engine comparisons.
    pub engine_rel_tol: f64,
    /// Relative tolerance for analytic-vs-finite-difference gradients.
    pub grad_rel_tol: f64,
    /// Relative tolerance for inner-product adjointness identities.
    pub adjoint_rel_tol: f64,
    pub workers: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 42,
            forward_instances: 100,
            backward_instances: 20,
            adjoint_instances: 20,
            degenerate_instances: 50,
            engine_rel_tol: 1e-9,
            grad_rel_tol: 1e-6,
            adjoint_rel_tol: 1e-12,
            workers: 4,
        }
    }
}

/// One random convolution instance drawn from the suite's shape ranges.
pub struct Instance<T: Scalar> {
    pub input: CapsuleTensor<T>,
    pub kernel: ConvKernel<T>,
    pub cfg: ConvConfig,
}

fn uniform_data<T: Scalar>(rng: &mut ChaCha8Rng, len: usize) -> Vec<T> {
    (0..len)
        .map(|_| T::from_f64(rng.random_range(-1.0..1.0)).unwrap())
        .collect()
}

/// Shapes: B in {1,2}, C,C' in {1..3}, H,W in {3..8}, k in {1..3},
/// stride in {1,2}, padding in {0,1}, S in {1,3}, M,K,N in {1..4}.
pub fn random_instance<T: Scalar>(rng: &mut ChaCha8Rng) -> Instance<T> {
    let b = rng.random_range(1..=2usize);
    let c = rng.random_range(1..=3usize);
    let cp = rng.random_range(1..=3usize);
    let h = rng.random_range(3..=8usize);
    let w = rng.random_range(3..=8usize);
    let k_h = rng.random_range(1..=3usize);
    let k_w = rng.random_range(1..=3usize);
    let stride = rng.random_range(1..=2usize);
    let padding = rng.random_range(0..=1usize);
    let s = if rng.random_bool(0.5) { 1 } else { 3 };
    let m = rng.random_range(1..=4usize);
    let kd = rng.random_range(1..=4usize);
    let n = rng.random_range(1..=4usize);
    let in_pose = PoseDims { slices: s, rows: m, cols: kd };
    let k_pose = PoseDims { slices: s, rows: kd, cols: n };
    let input = CapsuleTensor::new(b, c, h, w, in_pose, uniform_data(rng, b * c * h * w * in_pose.len())).unwrap();
    let kernel =
        ConvKernel::new(cp, c, k_h, k_w, k_pose, uniform_data(rng, cp * c * k_h * k_w * k_pose.len())).unwrap();
    Instance { input, kernel, cfg: ConvConfig { stride, padding } }
}

/// Smaller shapes for finite-difference checks (parameter counts stay low).
pub fn random_small_instance<T: Scalar>(rng: &mut ChaCha8Rng) -> Instance<T> {
    let b = rng.random_range(1..=2usize);
    let c = rng.random_range(1..=2usize);
    let cp = rng.random_range(1..=2usize);
    let h = rng.random_range(3..=4usize);
    let w = rng.random_range(3..=4usize);
    let k_h = rng.random_range(1..=2usize);
    let k_w = rng.random_range(1..=2usize);
    let stride = rng.random_range(1..=2usize);
    let padding = rng.random_range(0..=1usize);
    let s = rng.random_range(1..=2usize);
    let m = rng.random_range(1..=2usize);
    let kd = rng.random_range(1..=2usize);
    let n = rng.random_range(1..=2usize);
    let in_pose = PoseDims { slices: s, rows: m, cols: kd };
    let k_pose = PoseDims { slices: s, rows: kd, cols: n };
    let input = CapsuleTensor::new(b, c, h, w, in_pose, uniform_data(rng, b * c * h * w * in_pose.len())).unwrap();
    let kernel =
        ConvKernel::new(cp, c, k_h, k_w, k_pose, uniform_data(rng, cp * c * k_h * k_w * k_pose.len())).unwrap();
    Instance { input, kernel, cfg: ConvConfig { stride, padding } }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn max_rel_err<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| rel_err(x.to_f64().unwrap(), y.to_f64().unwrap()))
        .fold(0.0, f64::max)
}

/// accel_forward and indexed_forward against naive_forward: exact in
/// reference mode, within `engine_rel_tol` in optimized mode.
pub fn forward_equivalence_suite<T: Scalar>(opts: &SuiteOptions) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut failures = Vec::new();
    let ref_ctx = ExecContext::new(AccumMode::Reference, opts.workers);
    let opt_ctx = ExecContext::new(AccumMode::Optimized, opts.workers);
    for idx in 0..opts.forward_instances {
        let inst: Instance<T> = random_instance(&mut rng);
        let tag = format!("forward instance {idx} (seed {})", opts.seed);
        let naive = match naive_forward(&inst.input, &inst.kernel, inst.cfg) {
            Ok(o) => o,
            Err(e) => {
                failures.push(format!("{tag}: naive engine failed: {e}"));
                continue;
            }
        };
        let accel_ref = accel_forward(&inst.input, &inst.kernel, inst.cfg, &ref_ctx).unwrap();
        if accel_ref.data() != naive.data() {
            failures.push(format!("{tag}: accel (reference mode) != naive"));
        }
        let table = build_index_table(&inst.input, &inst.kernel, inst.cfg).unwrap();
        let indexed = indexed_forward(&inst.input, &inst.kernel, &table, &ref_ctx).unwrap();
        if indexed.data() != naive.data() {
            failures.push(format!("{tag}: indexed != naive"));
        }
        let accel_opt = accel_forward(&inst.input, &inst.kernel, inst.cfg, &opt_ctx).unwrap();
        let err = max_rel_err(accel_opt.data(), naive.data());
        if err > opts.engine_rel_tol {
            failures.push(format!(
                "{tag}: accel (optimized) rel err {err:.3e} > {:.3e}",
                opts.engine_rel_tol
            ));
        }
    }
    failures
}

/// accel_backward against naive_backward, and both against central finite
/// differences of L = sum(O^2)/2.
pub fn backward_suite(opts: &SuiteOptions) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let mut failures = Vec::new();
    let ref_ctx = ExecContext::new(AccumMode::Reference, opts.workers);
    let opt_ctx = ExecContext::new(AccumMode::Optimized, opts.workers);
    let h = 1e-5;
    for idx in 0..opts.backward_instances {
        let inst: Instance<f64> = random_small_instance(&mut rng);
        let tag = format!("backward instance {idx} (seed {})", opts.seed.wrapping_add(1));
        let out = naive_forward(&inst.input, &inst.kernel, inst.cfg).unwrap();
        let (ndi, ndk) = naive_backward(&inst.input, &inst.kernel, &out, inst.cfg).unwrap();
        let (adi, adk) = accel_backward(&inst.input, &inst.kernel, &out, inst.cfg, &ref_ctx).unwrap();
        if adi.data() != ndi.data() || adk.data() != ndk.data() {
            failures.push(format!("{tag}: accel backward (reference mode) != naive backward"));
        }
        let (odi, odk) = accel_backward(&inst.input, &inst.kernel, &out, inst.cfg, &opt_ctx).unwrap();
        let err = max_rel_err(odi.data(), ndi.data()).max(max_rel_err(odk.data(), ndk.data()));
        if err > opts.engine_rel_tol {
            failures.push(format!(
                "{tag}: accel backward (optimized) rel err {err:.3e} > {:.3e}",
                opts.engine_rel_tol
            ));
        }

        let (input, kernel, cfg) = (&inst.input, &inst.kernel, inst.cfg);
        let (ic, kh, kw, cp) = (kernel.in_channels(), kernel.k_h(), kernel.k_w(), kernel.out_channels());
        let kp = kernel.pose();
        let fd_k = finite_diff_grad(
            |kd: &[f64]| {
                let kern = ConvKernel::new(cp, ic, kh, kw, kp, kd.to_vec()).unwrap();
                let o = naive_forward(input, &kern, cfg).unwrap();
                o.data().iter().map(|v| v * v).sum::<f64>() / 2.0
            },
            kernel.data(),
            h,
        );
        let err_k = max_rel_err(ndk.data(), &fd_k);
        if err_k > opts.grad_rel_tol {
            failures.push(format!(
                "{tag}: dK vs finite differences rel err {err_k:.3e} > {:.3e}",
                opts.grad_rel_tol
            ));
        }
        let (ib, ich, ih, iw, ip) = input.shape();
        let fd_i = finite_diff_grad(
            |xd: &[f64]| {
                let x = CapsuleTensor::new(ib, ich, ih, iw, ip, xd.to_vec()).unwrap();
                let o = naive_forward(&x, kernel, cfg).unwrap();
                o.data().iter().map(|v| v * v).sum::<f64>() / 2.0
            },
            input.data(),
            h,
        );
        let err_i = max_rel_err(ndi.data(), &fd_i);
        if err_i > opts.grad_rel_tol {
            failures.push(format!(
                "{tag}: dI vs finite differences rel err {err_i:.3e} > {:.3e}",
                opts.grad_rel_tol
            ));
        }
    }
    failures
}

fn dot64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inner-product adjointness of im2col/col2im and input_extend/input_reduce.
pub fn adjointness_suite(opts: &SuiteOptions) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(2));
    let mut failures = Vec::new();
    let ctx = ExecContext::new(AccumMode::Reference, opts.workers);
    for idx in 0..opts.adjoint_instances {
        let inst: Instance<f64> = random_instance(&mut rng);
        let tag = format!("adjoint instance {idx} (seed {})", opts.seed.wrapping_add(2));
        let (k_h, k_w) = (inst.kernel.k_h(), inst.kernel.k_w());
        let fwd = capsule_im2col(&inst.input, k_h, k_w, inst.cfg).unwrap();
        let y_data = uniform_data::<f64>(&mut rng, fwd.data.len());
        let y = FlattenedInput { data: y_data.clone(), ..fwd.clone() };
        let back = capsule_col2im(&y, inst.input.height(), inst.input.width(), inst.cfg, &ctx).unwrap();
        let lhs = dot64(&fwd.data, &y_data);
        let rhs = dot64(inst.input.data(), back.data());
        if rel_err(lhs, rhs) > opts.adjoint_rel_tol {
            failures.push(format!(
                "{tag}: <im2col(x), y> = {lhs} vs <x, col2im(y)> = {rhs}"
            ));
        }

        let replicas = inst.kernel.out_channels();
        let ext = input_extend(&fwd, replicas);
        let z_data = uniform_data::<f64>(&mut rng, ext.data.len());
        let reduced = input_reduce(&z_data, replicas, &fwd, &ctx).unwrap();
        let lhs = dot64(&ext.data, &z_data);
        let rhs = dot64(&fwd.data, &reduced.data);
        if rel_err(lhs, rhs) > opts.adjoint_rel_tol {
            failures.push(format!(
                "{tag}: <extend(x), z> = {lhs} vs <x, reduce(z)> = {rhs}"
            ));
        }
    }
    failures
}

/// Every engine, repeated runs, worker counts {1, 2, 8}: outputs must be
/// bit-identical.
pub fn determinism_suite(opts: &SuiteOptions) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(3));
    let mut failures = Vec::new();
    let instances = opts.forward_instances.min(10).max(1);
    for idx in 0..instances {
        let inst: Instance<f64> = random_instance(&mut rng);
        let tag = format!("determinism instance {idx} (seed {})", opts.seed.wrapping_add(3));
        for engine in EngineKind::all() {
            for mode in [AccumMode::Reference, AccumMode::Optimized] {
                let mut baseline: Option<Vec<u64>> = None;
                for workers in [1usize, 2, 8] {
                    let ctx = ExecContext::new(mode, workers);
                    for run in 0..2 {
                        let out = conv_forward(engine, &inst.input, &inst.kernel, inst.cfg, &ctx)
                            .unwrap();
                        let bits: Vec<u64> = out.data().iter().map(|v| v.to_bits()).collect();
                        match &baseline {
                            None => baseline = Some(bits),
                            Some(b) => {
                                if *b != bits {
                                    failures.push(format!(
                                        "{tag}: {engine} ({mode:?}) not bit-stable at {workers} workers, run {run}"
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    failures
}

/// Independent scalar 2D convolution (plain convolution semantics): the
/// degenerate-case oracle for S = M = K = N = 1.
fn scalar_convolution(
    input: &CapsuleTensor<f64>,
    kernel: &ConvKernel<f64>,
    cfg: ConvConfig,
) -> Vec<f64> {
    let (b_n, c_n, h, w, _) = input.shape();
    let (cp, kh, kw) = (kernel.out_channels(), kernel.k_h(), kernel.k_w());
    let (oh, ow) = crate::tensor::output_dims(h, w, kh, kw, cfg).unwrap();
    let mut out = vec![0.0; b_n * cp * oh * ow];
    for b in 0..b_n {
        for p in 0..cp {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = 0.0;
                    for c in 0..c_n {
                        for m in 0..kh {
                            for n in 0..kw {
                                let y = (i * cfg.stride + m) as isize - cfg.padding as isize;
                                let x = (j * cfg.stride + n) as isize - cfg.padding as isize;
                                let v = if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w
                                {
                                    input.data()[((b * c_n + c) * h + y as usize) * w + x as usize]
                                } else {
                                    0.0
                                };
                                acc += v * kernel.data()[((p * c_n + c) * kh + m) * kw + n];
                            }
                        }
                    }
                    out[((b * cp + p) * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    out
}

/// With S = M = K = N = 1 every engine must agree exactly with the plain
/// scalar convolution.
pub fn degenerate_suite(opts: &SuiteOptions) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(4));
    let mut failures = Vec::new();
    let ctx = ExecContext::new(AccumMode::Reference, opts.workers);
    let pose = PoseDims { slices: 1, rows: 1, cols: 1 };
    for idx in 0..opts.degenerate_instances {
        let b = rng.random_range(1..=2usize);
        let c = rng.random_range(1..=3usize);
        let cp = rng.random_range(1..=3usize);
        let h = rng.random_range(3..=8usize);
        let w = rng.random_range(3..=8usize);
        let k_h = rng.random_range(1..=3usize);
        let k_w = rng.random_range(1..=3usize);
        let cfg = ConvConfig {
            stride: rng.random_range(1..=2usize),
            padding: rng.random_range(0..=1usize),
        };
        let input = CapsuleTensor::new(b, c, h, w, pose, uniform_data(&mut rng, b * c * h * w)).unwrap();
        let kernel = ConvKernel::new(cp, c, k_h, k_w, pose, uniform_data(&mut rng, cp * c * k_h * k_w)).unwrap();
        let oracle = scalar_convolution(&input, &kernel, cfg);
        let tag = format!("degenerate instance {idx} (seed {})", opts.seed.wrapping_add(4));
        for engine in EngineKind::all() {
            let out = conv_forward(engine, &input, &kernel, cfg, &ctx).unwrap();
            if out.data() != &oracle[..] {
                failures.push(format!("{tag}: {engine} != scalar convolution"));
            }
        }
    }
    failures
}

/// The multiset of scalar-product tasks implied by the index table must
/// equal the multiset implied by the naive loop nest (padding tasks, which
/// contribute exact zeros, excluded on both sides).
pub fn index_totality_suite(opts: &SuiteOptions) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(5));
    let mut failures = Vec::new();
    let instances = opts.forward_instances.min(25).max(1);
    for idx in 0..instances {
        let inst: Instance<f64> = random_instance(&mut rng);
        let table = build_index_table(&inst.input, &inst.kernel, inst.cfg).unwrap();
        let mut got: Vec<(usize, usize, usize)> = table
            .triples()
            .iter()
            .map(|t| (t.input_offset, t.kernel_offset, t.output_offset))
            .collect();
        // Independent enumeration in a different loop order.
        let g = crate::tensor::ConvGeometry::resolve(&inst.input, &inst.kernel, inst.cfg).unwrap();
        let mut want = Vec::new();
        for c in 0..g.in_channels {
            for m in 0..g.k_h {
                for n in 0..g.k_w {
                    for b in 0..g.batch {
                        for p in 0..g.out_channels {
                            for i in 0..g.out_h {
                                for j in 0..g.out_w {
                                    if let (Some(y), Some(x)) = (g.in_y(i, m), g.in_x(j, n)) {
                                        want.push((
                                            inst.input.pose_offset(b, c, y, x),
                                            inst.kernel.pose_offset(p, c, m, n),
                                            (((b * g.out_channels + p) * g.out_h + i) * g.out_w
                                                + j)
                                                * g.out_pose().len(),
                                        ));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        got.sort_unstable();
        want.sort_unstable();
        if got != want {
            failures.push(format!(
                "totality instance {idx} (seed {}): task multisets differ ({} vs {})",
                opts.seed.wrapping_add(5),
                got.len(),
                want.len()
            ));
        }
    }
    failures
}

/// Runs every suite; returns all failure diagnostics.
pub fn run_all_checks<T: Scalar>(opts: &SuiteOptions) -> Vec<String> {
    let mut failures = forward_equivalence_suite::<T>(opts);
    failures.extend(backward_suite(opts));
    failures.extend(adjointness_suite(opts));
    failures.extend(determinism_suite(opts));
    failures.extend(degenerate_suite(opts));
    failures.extend(index_totality_suite(opts));
    failures
}
