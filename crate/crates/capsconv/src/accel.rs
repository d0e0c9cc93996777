//! Accelerated capsule convolution via staged lowering to strided batched
//! small-matrix multiplication.
//!
//! Forward: im2col -> input_extend -> kernel_extend -> batched multiply ->
//! output_reduce. Backward: output_extend feeds two batched transposed
//! multiplies whose results are reduced back onto the kernel and, via
//! input_reduce + col2im, onto the input.
//!
//! In reference accumulation mode the replication stages are materialized
//! literally. In optimized mode the replicas are never built: each multiply
//! addresses the flattened input and the raw kernel in place and is fused
//! with its downstream reduction, one owner per destination block. Both
//! paths perform identical arithmetic in identical order.

use crate::error::Result;
use crate::exec::{AccumMode, ExecContext};
use crate::lowering::{
    capsule_col2im, capsule_im2col, input_extend, input_reduce, kernel_extend, output_extend,
    output_reduce, FlattenedInput,
};
use crate::matmul::{
    batched_matmul, batched_matmul_a_bt, batched_matmul_at_b, BatchPlan, OperandSpec,
};
use crate::tensor::{
    ensure_finite, pose_a_bt_acc_opt, pose_at_b_acc_opt, pose_matmul_acc_opt, CapsuleTensor,
    ConvConfig, ConvGeometry, ConvKernel, PoseDims, Scalar,
};

/// Operand addressing for the input-side blocks of the lowered multiply.
fn input_spec(g: &ConvGeometry, materialized: bool) -> OperandSpec {
    let stride = g.m * g.k;
    if materialized {
        OperandSpec::dense(stride, g.batch_count())
    } else {
        // Flattened input repeated once per out-channel.
        OperandSpec {
            stride,
            chunk: g.batch * g.spatial() * g.group() * g.slices,
            repeats: g.out_channels,
        }
    }
}

/// Operand addressing for the kernel-side blocks.
fn kernel_spec(g: &ConvGeometry, materialized: bool) -> OperandSpec {
    let stride = g.k * g.n;
    if materialized {
        // Extended kernel: per-position repeats exist, batch items do not.
        OperandSpec {
            stride,
            chunk: g.spatial() * g.group() * g.slices,
            repeats: g.batch,
        }
    } else {
        // Raw kernel: repeats over both batch items and output positions.
        OperandSpec {
            stride,
            chunk: g.group() * g.slices,
            repeats: g.batch * g.spatial(),
        }
    }
}

/// The strided batched-multiply plan of the lowered forward pass. With
/// `materialized == false` the operand specs are zero-copy periodic views
/// over the flattened input and the raw kernel.
pub fn forward_plan(g: &ConvGeometry, materialized: bool) -> BatchPlan {
    BatchPlan {
        batch_count: g.batch_count(),
        m: g.m,
        k: g.k,
        n: g.n,
        a: input_spec(g, materialized),
        b: kernel_spec(g, materialized),
        c_stride: g.m * g.n,
    }
}

pub fn accel_forward<T: Scalar>(
    input: &CapsuleTensor<T>,
    kernel: &ConvKernel<T>,
    cfg: ConvConfig,
    ctx: &ExecContext,
) -> Result<CapsuleTensor<T>> {
    let g = ConvGeometry::resolve(input, kernel, cfg)?;
    ensure_finite(input.data())?;
    ensure_finite(kernel.data())?;
    let flat = capsule_im2col(input, g.k_h, g.k_w, cfg)?;
    match ctx.mode() {
        AccumMode::Reference => {
            let ext_in = input_extend(&flat, g.out_channels);
            let ext_k = kernel_extend(kernel, g.spatial());
            let prod = batched_matmul(&ext_in.data, &ext_k.data, &forward_plan(&g, true), ctx)?;
            output_reduce(&prod, &g, ctx)
        }
        AccumMode::Optimized => Ok(fused_forward(&flat, kernel, &g, ctx)),
    }
}

/// Optimized forward: the batched multiply fused with the output reduction.
/// Each output pose is owned by one worker and accumulates its group's
/// products in canonical order, so the chains match the staged path exactly.
fn fused_forward<T: Scalar>(
    flat: &FlattenedInput<T>,
    kernel: &ConvKernel<T>,
    g: &ConvGeometry,
    ctx: &ExecContext,
) -> CapsuleTensor<T> {
    let in_pose_len = g.in_pose().len();
    let k_pose_len = g.kernel_pose().len();
    let out_pose_len = g.out_pose().len();
    let (spatial, group, out_channels) = (g.spatial(), g.group(), g.out_channels);
    let mut out = vec![T::zero(); g.batch * out_channels * spatial * out_pose_len];
    let fdata = &flat.data;
    let kdata = kernel.data();
    ctx.for_each_chunk_mut(&mut out, out_pose_len, |u, acc| {
        let ij = u % spatial;
        let rest = u / spatial;
        let (b, p) = (rest / out_channels, rest % out_channels);
        let col = (b * spatial + ij) * group;
        for gi in 0..group {
            pose_matmul_acc_opt(
                &fdata[(col + gi) * in_pose_len..][..in_pose_len],
                &kdata[(p * group + gi) * k_pose_len..][..k_pose_len],
                acc,
                g.slices,
                g.m,
                g.k,
                g.n,
            );
        }
    });
    CapsuleTensor::from_raw_unchecked(g.batch, out_channels, g.out_h, g.out_w, g.out_pose(), out)
}

pub fn accel_backward<T: Scalar>(
    input: &CapsuleTensor<T>,
    kernel: &ConvKernel<T>,
    d_out: &CapsuleTensor<T>,
    cfg: ConvConfig,
    ctx: &ExecContext,
) -> Result<(CapsuleTensor<T>, ConvKernel<T>)> {
    let g = ConvGeometry::resolve(input, kernel, cfg)?;
    g.check_output_shape(d_out)?;

    let flat = capsule_im2col(input, g.k_h, g.k_w, cfg)?;
    match ctx.mode() {
        AccumMode::Reference => staged_backward(&flat, kernel, d_out, &g, cfg, ctx),
        AccumMode::Optimized => fused_backward(&flat, kernel, d_out, &g, cfg, ctx),
    }
}

/// Reference-mode backward with every replication stage materialized.
fn staged_backward<T: Scalar>(
    flat: &FlattenedInput<T>,
    kernel: &ConvKernel<T>,
    d_out: &CapsuleTensor<T>,
    g: &ConvGeometry,
    cfg: ConvConfig,
    ctx: &ExecContext,
) -> Result<(CapsuleTensor<T>, ConvKernel<T>)> {
    let ext_grad = output_extend(d_out, g)?;

    // Kernel gradient: per-batch Aᵀ·dO partials, then a strided reduction
    // over the B * H' * W' repeats of each kernel block.
    let grad_spec = OperandSpec::dense(g.m * g.n, g.batch_count());
    let dk_plan = BatchPlan {
        batch_count: g.batch_count(),
        m: g.m,
        k: g.k,
        n: g.n,
        a: input_spec(g, true),
        b: grad_spec,
        c_stride: g.k * g.n,
    };
    let ext_in = input_extend(flat, g.out_channels);
    let dk_partials = batched_matmul_at_b(&ext_in.data, &ext_grad, &dk_plan, ctx)?;
    let dk = reduce_kernel_partials(&dk_partials.data, g, ctx)?;

    // Input gradient: per-batch dO·Bᵀ columns, reduced over the out-channel
    // replicas, then scattered back through col2im.
    let di_plan = BatchPlan {
        batch_count: g.batch_count(),
        m: g.m,
        k: g.k,
        n: g.n,
        a: grad_spec,
        b: kernel_spec(g, true),
        c_stride: g.m * g.k,
    };
    let ext_k = kernel_extend(kernel, g.spatial());
    let di_cols = batched_matmul_a_bt(&ext_grad, &ext_k.data, &di_plan, ctx)?;
    let fd = input_reduce(&di_cols.data, g.out_channels, flat, ctx)?;
    let di = capsule_col2im(&fd, g.in_h, g.in_w, cfg, ctx)?;
    Ok((di, dk))
}

/// Optimized backward: both transposed multiplies fused with their
/// reductions, addressing the upstream gradient and raw kernel in place.
/// Accumulation chains per destination scalar match the staged path.
fn fused_backward<T: Scalar>(
    flat: &FlattenedInput<T>,
    kernel: &ConvKernel<T>,
    d_out: &CapsuleTensor<T>,
    g: &ConvGeometry,
    cfg: ConvConfig,
    ctx: &ExecContext,
) -> Result<(CapsuleTensor<T>, ConvKernel<T>)> {
    let in_pose_len = g.in_pose().len();
    let k_pose_len = g.kernel_pose().len();
    let (spatial, group, batch, out_channels) = (g.spatial(), g.group(), g.batch, g.out_channels);
    let fdata = &flat.data;
    let kdata = kernel.data();

    // Kernel gradient: one owner per kernel pose, (b, i, j) ascending.
    let mut dk = vec![T::zero(); g.kernel_len()];
    ctx.for_each_chunk_mut(&mut dk, k_pose_len, |u, acc| {
        let (p, gi) = (u / group, u % group);
        for b in 0..batch {
            for ij in 0..spatial {
                let (i, j) = (ij / g.out_w, ij % g.out_w);
                pose_at_b_acc_opt(
                    &fdata[((b * spatial + ij) * group + gi) * in_pose_len..][..in_pose_len],
                    d_out.pose_block(b, p, i, j),
                    acc,
                    g.slices,
                    g.m,
                    g.k,
                    g.n,
                );
            }
        }
    });
    let dk = ConvKernel::new(
        g.out_channels,
        g.in_channels,
        g.k_h,
        g.k_w,
        PoseDims { slices: g.slices, rows: g.k, cols: g.n },
        dk,
    )?;

    // Column gradients: one owner per column slot, out-channels ascending;
    // then scattered back through col2im.
    let mut fd_data = vec![T::zero(); fdata.len()];
    ctx.for_each_chunk_mut(&mut fd_data, in_pose_len, |u, acc| {
        let gi = u % group;
        let rest = u / group;
        let (b, ij) = (rest / spatial, rest % spatial);
        let (i, j) = (ij / g.out_w, ij % g.out_w);
        for p in 0..out_channels {
            pose_a_bt_acc_opt(
                d_out.pose_block(b, p, i, j),
                &kdata[(p * group + gi) * k_pose_len..][..k_pose_len],
                acc,
                g.slices,
                g.m,
                g.k,
                g.n,
            );
        }
    });
    let fd = FlattenedInput {
        batch: flat.batch,
        channels: flat.channels,
        k_h: flat.k_h,
        k_w: flat.k_w,
        pose: flat.pose,
        out_h: flat.out_h,
        out_w: flat.out_w,
        data: fd_data,
    };
    let di = capsule_col2im(&fd, g.in_h, g.in_w, cfg, ctx)?;
    Ok((di, dk))
}

/// Sums the per-(batch, output position) kernel-gradient partials onto each
/// kernel block, (b, i, j) ascending. One owner per kernel pose slice.
fn reduce_kernel_partials<T: Scalar>(
    partials: &[T],
    g: &ConvGeometry,
    ctx: &ExecContext,
) -> Result<ConvKernel<T>> {
    let kn = g.k * g.n;
    let slices = g.slices;
    let pose_len = slices * kn;
    let (group, spatial, batch) = (g.group(), g.spatial(), g.batch);
    let mut dk = vec![T::zero(); g.out_channels * group * pose_len];
    ctx.for_each_chunk_mut(&mut dk, pose_len, |u, acc| {
        let (p, gi) = (u / group, u % group);
        for b in 0..batch {
            for ij in 0..spatial {
                let base = (((p * batch + b) * spatial + ij) * group + gi) * slices;
                for s in 0..slices {
                    let blk = &partials[(base + s) * kn..][..kn];
                    let dst = &mut acc[s * kn..][..kn];
                    for (d, v) in dst.iter_mut().zip(blk) {
                        *d = *d + *v;
                    }
                }
            }
        }
    });
    ConvKernel::new(
        g.out_channels,
        g.in_channels,
        g.k_h,
        g.k_w,
        PoseDims { slices, rows: g.k, cols: g.n },
        dk,
    )
}
