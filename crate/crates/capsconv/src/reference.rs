//! Naive loop-nest capsule convolution: the correctness oracle.
//!
//! Single-threaded by contract. Each output pose is a sum, in canonical
//! order (in-channel, kernel row, kernel col, inner index ascending), of
//! slice-wise pose matrix products over the gather window. Reads that fall
//! in the zero-padded region contribute zero.

use crate::error::Result;
use crate::lowering::source_position;
use crate::tensor::{
    ensure_finite, pose_a_bt_acc, pose_at_b_acc, pose_matmul_acc_unchecked, CapsuleTensor,
    ConvConfig, ConvGeometry, ConvKernel, PoseDims, Scalar,
};

pub fn naive_forward<T: Scalar>(
    input: &CapsuleTensor<T>,
    kernel: &ConvKernel<T>,
    cfg: ConvConfig,
) -> Result<CapsuleTensor<T>> {
    let g = ConvGeometry::resolve(input, kernel, cfg)?;
    ensure_finite(input.data())?;
    ensure_finite(kernel.data())?;

    let in_pose_len = g.in_pose().len();
    let out_pose_len = g.out_pose().len();
    let zero_block = vec![T::zero(); in_pose_len];
    let mut out = vec![T::zero(); g.batch * g.out_channels * g.spatial() * out_pose_len];

    for b in 0..g.batch {
        for p in 0..g.out_channels {
            for i in 0..g.out_h {
                for j in 0..g.out_w {
                    let o_off = (((b * g.out_channels + p) * g.out_h + i) * g.out_w + j)
                        * out_pose_len;
                    let acc = &mut out[o_off..o_off + out_pose_len];
                    for c in 0..g.in_channels {
                        for m in 0..g.k_h {
                            for n in 0..g.k_w {
                                let block = match (g.in_y(i, m), g.in_x(j, n)) {
                                    (Some(y), Some(x)) => input.pose_block(b, c, y, x),
                                    _ => &zero_block[..],
                                };
                                pose_matmul_acc_unchecked(
                                    block,
                                    kernel.pose_block(p, c, m, n),
                                    acc,
                                    g.slices,
                                    g.m,
                                    g.k,
                                    g.n,
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(CapsuleTensor::from_raw_unchecked(
        g.batch,
        g.out_channels,
        g.out_h,
        g.out_w,
        g.out_pose(),
        out,
    ))
}

/// Analytic adjoint of [`naive_forward`]: gradients w.r.t. input and kernel.
///
/// Accumulation orders mirror the lowered engines exactly:
/// * dK per (p,c,m,n): sum over (b,i,j) ascending of Iᵀ·dO per slice.
/// * dI per (b,c,y,x): sum over (m,n) ascending of the per-slot gradient,
///   where each slot is itself the sum over out-channels of dO·Kᵀ.
pub fn naive_backward<T: Scalar>(
    input: &CapsuleTensor<T>,
    kernel: &ConvKernel<T>,
    d_out: &CapsuleTensor<T>,
    cfg: ConvConfig,
) -> Result<(CapsuleTensor<T>, ConvKernel<T>)> {
    let g = ConvGeometry::resolve(input, kernel, cfg)?;
    g.check_output_shape(d_out)?;

    let in_pose_len = g.in_pose().len();
    let k_pose_len = g.kernel_pose().len();
    let zero_block = vec![T::zero(); in_pose_len];

    // Kernel gradient.
    let mut dk = vec![T::zero(); kernel.data().len()];
    for p in 0..g.out_channels {
        for c in 0..g.in_channels {
            for m in 0..g.k_h {
                for n in 0..g.k_w {
                    let off = (((p * g.in_channels + c) * g.k_h + m) * g.k_w + n) * k_pose_len;
                    let acc = &mut dk[off..off + k_pose_len];
                    for b in 0..g.batch {
                        for i in 0..g.out_h {
                            for j in 0..g.out_w {
                                let block = match (g.in_y(i, m), g.in_x(j, n)) {
                                    (Some(y), Some(x)) => input.pose_block(b, c, y, x),
                                    _ => &zero_block[..],
                                };
                                pose_at_b_acc(
                                    block,
                                    d_out.pose_block(b, p, i, j),
                                    acc,
                                    g.slices,
                                    g.m,
                                    g.k,
                                    g.n,
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    // Input gradient, gathered per destination location.
    let mut di = vec![T::zero(); input.data().len()];
    let mut slot = vec![T::zero(); in_pose_len];
    for b in 0..g.batch {
        for c in 0..g.in_channels {
            for y in 0..g.in_h {
                for x in 0..g.in_w {
                    let off = (((b * g.in_channels + c) * g.in_h + y) * g.in_w + x) * in_pose_len;
                    let acc = &mut di[off..off + in_pose_len];
                    for m in 0..g.k_h {
                        for n in 0..g.k_w {
                            let Some((i, j)) =
                                source_position(cfg, g.out_h, g.out_w, y, x, m, n)
                            else {
                                continue;
                            };
                            slot.iter_mut().for_each(|v| *v = T::zero());
                            for p in 0..g.out_channels {
                                pose_a_bt_acc(
                                    d_out.pose_block(b, p, i, j),
                                    kernel.pose_block(p, c, m, n),
                                    &mut slot,
                                    g.slices,
                                    g.m,
                                    g.k,
                                    g.n,
                                );
                            }
                            for (a, s) in acc.iter_mut().zip(&slot) {
                                *a = *a + *s;
                            }
                        }
                    }
                }
            }
        }
    }

    let di = CapsuleTensor::from_raw_unchecked(
        g.batch,
        g.in_channels,
        g.in_h,
        g.in_w,
        g.in_pose(),
        di,
    );
    let dk = ConvKernel::new(
        g.out_channels,
        g.in_channels,
        g.k_h,
        g.k_w,
        PoseDims { slices: g.slices, rows: g.k, cols: g.n },
        dk,
    )?;
    Ok((di, dk))
}

/// Central finite differences of `loss` at `x`.
pub fn finite_diff_grad<T: Scalar>(
    mut loss: impl FnMut(&[T]) -> T,
    x: &[T],
    h: T,
) -> Vec<T> {
    let mut probe = x.to_vec();
    let two_h = h + h;
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let plus = loss(&probe);
            probe[i] = x[i] - h;
            let minus = loss(&probe);
            probe[i] = x[i];
            (plus - minus) / two_h
        })
        .collect()
}
