//! The five-stage lowering: im2col gather, input/kernel replication,
//! output reduction, and the backward-pass counterparts (output extension,
//! input reduction, col2im scatter).
//!
//! Every stage here is a pure gather or replicate: zero floating-point
//! arithmetic except in the two reduction stages, which add in canonical
//! order with single-owner destinations.

use crate::error::{CapsError, Result};
use crate::exec::ExecContext;
use crate::matmul::BatchProduct;
use crate::tensor::{output_dims, CapsuleTensor, ConvConfig, ConvGeometry, ConvKernel, PoseDims, Scalar};

/// im2col result: one column per output position, column-major by output
/// position. Column slot order is `[C][k_h][k_w][S][M][K]`, matching the
/// canonical accumulation order.
#[derive(Clone, Debug, PartialEq)]
pub struct FlattenedInput<T: Scalar> {
    pub batch: usize,
    pub channels: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub pose: PoseDims,
    pub out_h: usize,
    pub out_w: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> FlattenedInput<T> {
    /// Scalars per column.
    pub fn col_len(&self) -> usize {
        self.channels * self.k_h * self.k_w * self.pose.len()
    }

    /// Total number of columns (B * H' * W').
    pub fn cols(&self) -> usize {
        self.batch * self.out_h * self.out_w
    }
}

/// [`FlattenedInput`] replicated once per output channel, replication-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedInput<T: Scalar> {
    pub replicas: usize,
    pub replica_len: usize,
    pub data: Vec<T>,
}

/// Kernel pose blocks with each out-channel block repeated `spatial` times,
/// aligned one-to-one with [`ExtendedInput`] blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedKernel<T: Scalar> {
    pub out_channels: usize,
    pub spatial: usize,
    /// Scalars in one out-channel block: C * k_h * k_w * S * K * N.
    pub block_len: usize,
    pub data: Vec<T>,
}

/// Gathers each convolution window into one column. Pure gather; reads from
/// the zero-padded region yield exact zeros.
pub fn capsule_im2col<T: Scalar>(
    input: &CapsuleTensor<T>,
    k_h: usize,
    k_w: usize,
    cfg: ConvConfig,
) -> Result<FlattenedInput<T>> {
    let (out_h, out_w) = output_dims(input.height(), input.width(), k_h, k_w, cfg)?;
    let pose = input.pose();
    let pose_len = pose.len();
    let channels = input.channels();
    let col_len = channels * k_h * k_w * pose_len;
    let mut data = vec![T::zero(); input.batch() * out_h * out_w * col_len];

    let mut cursor = 0usize;
    for b in 0..input.batch() {
        for i in 0..out_h {
            for j in 0..out_w {
                for c in 0..channels {
                    for m in 0..k_h {
                        let y = i * cfg.stride + m;
                        let y = (y >= cfg.padding).then(|| y - cfg.padding);
                        for n in 0..k_w {
                            let x = j * cfg.stride + n;
                            let x = (x >= cfg.padding).then(|| x - cfg.padding);
                            if let (Some(y), Some(x)) = (y, x) {
                                if y < input.height() && x < input.width() {
                                    data[cursor..cursor + pose_len]
                                        .copy_from_slice(input.pose_block(b, c, y, x));
                                }
                            }
                            cursor += pose_len;
                        }
                    }
                }
            }
        }
    }
    Ok(FlattenedInput {
        batch: input.batch(),
        channels,
        k_h,
        k_w,
        pose,
        out_h,
        out_w,
        data,
    })
}

/// Replicates the flattened input once per output channel.
pub fn input_extend<T: Scalar>(flat: &FlattenedInput<T>, out_channels: usize) -> ExtendedInput<T> {
    let replica_len = flat.data.len();
    let mut data = Vec::with_capacity(out_channels * replica_len);
    for _ in 0..out_channels {
        data.extend_from_slice(&flat.data);
    }
    ExtendedInput { replicas: out_channels, replica_len, data }
}

/// Repeats each out-channel's column of capsules `spatial` times.
pub fn kernel_extend<T: Scalar>(kernel: &ConvKernel<T>, spatial: usize) -> ExtendedKernel<T> {
    let block_len = kernel.in_channels() * kernel.k_h() * kernel.k_w() * kernel.pose().len();
    let mut data = Vec::with_capacity(kernel.out_channels() * spatial * block_len);
    for p in 0..kernel.out_channels() {
        let block = &kernel.data()[p * block_len..(p + 1) * block_len];
        for _ in 0..spatial {
            data.extend_from_slice(block);
        }
    }
    ExtendedKernel { out_channels: kernel.out_channels(), spatial, block_len, data }
}

/// Sums each output pose's group of partial-product matrices in canonical
/// order. Parallel over output poses; each pose has one owner.
pub fn output_reduce<T: Scalar>(
    prod: &BatchProduct<T>,
    g: &ConvGeometry,
    ctx: &ExecContext,
) -> Result<CapsuleTensor<T>> {
    let mn = g.m * g.n;
    let out_pose_len = g.out_pose().len();
    let expect = g.batch_count() * mn;
    if prod.data.len() != expect || prod.rows != g.m || prod.cols != g.n {
        return Err(CapsError::shape(format!(
            "batch product of {} {}x{} entries does not match geometry ({expect} expected)",
            prod.data.len(),
            prod.rows,
            prod.cols
        )));
    }
    let (spatial, group, slices) = (g.spatial(), g.group(), g.slices);
    let (batch, out_channels) = (g.batch, g.out_channels);
    let mut out = vec![T::zero(); batch * out_channels * spatial * out_pose_len];
    ctx.for_each_chunk_mut(&mut out, out_pose_len, |u, acc| {
        let ij = u % spatial;
        let rest = u / spatial;
        let (b, p) = (rest / out_channels, rest % out_channels);
        for gi in 0..group {
            let base = ((((p * batch + b) * spatial + ij) * group) + gi) * slices;
            for s in 0..slices {
                let blk = &prod.data[(base + s) * mn..][..mn];
                let dst = &mut acc[s * mn..][..mn];
                for (d, v) in dst.iter_mut().zip(blk) {
                    *d = *d + *v;
                }
            }
        }
    });
    Ok(CapsuleTensor::from_raw_unchecked(
        batch,
        out_channels,
        g.out_h,
        g.out_w,
        g.out_pose(),
        out,
    ))
}

/// Replicates each upstream output pose to all of its C * k_h * k_w
/// contributing positions, aligned with [`ExtendedInput`] block order.
pub fn output_extend<T: Scalar>(d_out: &CapsuleTensor<T>, g: &ConvGeometry) -> Result<Vec<T>> {
    g.check_output_shape(d_out)?;
    let pose_len = g.out_pose().len();
    let group = g.group();
    let mut data =
        Vec::with_capacity(g.out_channels * g.batch * g.spatial() * group * pose_len);
    for p in 0..g.out_channels {
        for b in 0..g.batch {
            for i in 0..g.out_h {
                for j in 0..g.out_w {
                    let block = d_out.pose_block(b, p, i, j);
                    for _ in 0..group {
                        data.extend_from_slice(block);
                    }
                }
            }
        }
    }
    Ok(data)
}

/// Adjoint of [`input_extend`]: sums the per-out-channel replicas, replica
/// index ascending. `col_grads` is replica-major with `out_channels` replicas.
pub fn input_reduce<T: Scalar>(
    col_grads: &[T],
    out_channels: usize,
    template: &FlattenedInput<T>,
    ctx: &ExecContext,
) -> Result<FlattenedInput<T>> {
    let replica_len = template.cols() * template.col_len();
    if col_grads.len() != out_channels * replica_len {
        return Err(CapsError::shape(format!(
            "column gradient length {} != {} replicas of {replica_len}",
            col_grads.len(),
            out_channels
        )));
    }
    let mut data = vec![T::zero(); replica_len];
    let chunk = template.col_len().max(1);
    ctx.for_each_chunk_mut(&mut data, chunk, |u, acc| {
        let base = u * chunk;
        for p in 0..out_channels {
            let src = &col_grads[p * replica_len + base..][..acc.len()];
            for (a, v) in acc.iter_mut().zip(src) {
                *a = *a + *v;
            }
        }
    });
    Ok(FlattenedInput { data, ..template.clone_meta() })
}

impl<T: Scalar> FlattenedInput<T> {
    fn clone_meta(&self) -> FlattenedInput<T> {
        FlattenedInput {
            batch: self.batch,
            channels: self.channels,
            k_h: self.k_h,
            k_w: self.k_w,
            pose: self.pose,
            out_h: self.out_h,
            out_w: self.out_w,
            data: Vec::new(),
        }
    }
}

/// Adjoint of [`capsule_im2col`]: scatter-adds each column slot back into
/// its source input location. Implemented as a destination-owner gather, so
/// each input location is reduced by exactly one worker in canonical
/// (kernel row, kernel col) order. Slots that map into padding are dropped.
pub fn capsule_col2im<T: Scalar>(
    fd: &FlattenedInput<T>,
    in_h: usize,
    in_w: usize,
    cfg: ConvConfig,
    ctx: &ExecContext,
) -> Result<CapsuleTensor<T>> {
    let (expect_h, expect_w) = output_dims(in_h, in_w, fd.k_h, fd.k_w, cfg)?;
    if (expect_h, expect_w) != (fd.out_h, fd.out_w) {
        return Err(CapsError::shape(format!(
            "column grid {}x{} does not match input {in_h}x{in_w} under the shape law",
            fd.out_h, fd.out_w
        )));
    }
    if fd.data.len() != fd.cols() * fd.col_len() {
        return Err(CapsError::shape("flattened buffer length mismatch".to_string()));
    }
    let pose_len = fd.pose.len();
    let col_len = fd.col_len();
    let (channels, k_h, k_w) = (fd.channels, fd.k_h, fd.k_w);
    let (out_h, out_w) = (fd.out_h, fd.out_w);
    let mut out = vec![T::zero(); fd.batch * channels * in_h * in_w * pose_len];
    ctx.for_each_chunk_mut(&mut out, pose_len, |u, acc| {
        let x = u % in_w;
        let rest = u / in_w;
        let y = rest % in_h;
        let rest = rest / in_h;
        let (b, c) = (rest / channels, rest % channels);
        for m in 0..k_h {
            for n in 0..k_w {
                let Some((i, j)) = source_position(cfg, out_h, out_w, y, x, m, n) else {
                    continue;
                };
                let col = (b * out_h + i) * out_w + j;
                let slot = col * col_len + ((c * k_h + m) * k_w + n) * pose_len;
                let src = &fd.data[slot..slot + pose_len];
                for (a, v) in acc.iter_mut().zip(src) {
                    *a = *a + *v;
                }
            }
        }
    });
    Ok(CapsuleTensor::from_raw_unchecked(fd.batch, channels, in_h, in_w, fd.pose, out))
}

/// Output position whose window cell (m, n) covers input location (y, x).
pub(crate) fn source_position(
    cfg: ConvConfig,
    out_h: usize,
    out_w: usize,
    y: usize,
    x: usize,
    m: usize,
    n: usize,
) -> Option<(usize, usize)> {
    let (ny, nx) = (y + cfg.padding, x + cfg.padding);
    if ny < m || nx < n {
        return None;
    }
    let (dy, dx) = (ny - m, nx - n);
    if dy % cfg.stride != 0 || dx % cfg.stride != 0 {
        return None;
    }
    let (i, j) = (dy / cfg.stride, dx / cfg.stride);
    (i < out_h && j < out_w).then_some((i, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::ExecContext;

    #[test]
    fn im2col_figure2_columns() {
        let pose = PoseDims::new(3, 3, 3).unwrap();
        let input = CapsuleTensor::new(1, 1, 5, 5, pose, vec![1.0f64; 25 * 27]).unwrap();
        let flat = capsule_im2col(&input, 4, 4, ConvConfig::new(1, 0).unwrap()).unwrap();
        assert_eq!(flat.cols(), 4);
        assert_eq!(flat.col_len(), 432);
        assert!(flat.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn im2col_unit_geometry_is_identity_copy() {
        let pose = PoseDims::new(2, 2, 2).unwrap();
        let data: Vec<f64> = (0..pose.len() * 3).map(|i| i as f64 - 4.0).collect();
        let input = CapsuleTensor::new(1, 3, 1, 1, pose, data.clone()).unwrap();
        let flat = capsule_im2col(&input, 1, 1, ConvConfig::new(1, 0).unwrap()).unwrap();
        assert_eq!(flat.data, data);
    }

    #[test]
    fn im2col_scalar_poses_window_gather() {
        let pose = PoseDims::new(1, 1, 1).unwrap();
        let data: Vec<f64> = (1..=9).map(|v| v as f64).collect();
        let input = CapsuleTensor::new(1, 1, 3, 3, pose, data).unwrap();
        let flat = capsule_im2col(&input, 2, 2, ConvConfig::new(1, 0).unwrap()).unwrap();
        // column for output (0,0)
        assert_eq!(&flat.data[0..4], &[1.0, 2.0, 4.0, 5.0]);
    }

    #[test]
    fn input_extend_replicates() {
        let pose = PoseDims::new(1, 1, 1).unwrap();
        let flat = FlattenedInput {
            batch: 1,
            channels: 1,
            k_h: 1,
            k_w: 1,
            pose,
            out_h: 2,
            out_w: 1,
            data: vec![1.0f64, 2.0],
        };
        let single = input_extend(&flat, 1);
        assert_eq!(single.data, flat.data);
        let triple = input_extend(&flat, 3);
        assert_eq!(triple.data, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
    }

    #[test]
    fn kernel_extend_layout_and_identity() {
        let pose = PoseDims::new(1, 1, 1).unwrap();
        // two out-channels A=(1), B=(2), spatial 2 -> (A,A,B,B)
        let kernel = ConvKernel::new(2, 1, 1, 1, pose, vec![1.0f64, 2.0]).unwrap();
        let ext = kernel_extend(&kernel, 2);
        assert_eq!(ext.data, vec![1.0, 1.0, 2.0, 2.0]);
        let ext1 = kernel_extend(&kernel, 1);
        assert_eq!(ext1.data, kernel.data());
    }

    #[test]
    fn col2im_overlap_counts() {
        let pose = PoseDims::new(1, 1, 1).unwrap();
        let cfg = ConvConfig::new(1, 0).unwrap();
        let fd = FlattenedInput {
            batch: 1,
            channels: 1,
            k_h: 2,
            k_w: 2,
            pose,
            out_h: 2,
            out_w: 2,
            data: vec![1.0f64; 16],
        };
        let ctx = ExecContext::reference();
        let out = capsule_col2im(&fd, 3, 3, cfg, &ctx).unwrap();
        let expect = vec![1.0, 2.0, 1.0, 2.0, 4.0, 2.0, 1.0, 2.0, 1.0];
        assert_eq!(out.data(), &expect[..]);
    }

    #[test]
    fn col2im_non_overlapping_is_pure_scatter() {
        let pose = PoseDims::new(1, 1, 1).unwrap();
        let cfg = ConvConfig::new(2, 0).unwrap();
        let data: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let input = CapsuleTensor::new(1, 1, 4, 4, pose, data).unwrap();
        let flat = capsule_im2col(&input, 2, 2, cfg).unwrap();
        let ctx = ExecContext::reference();
        let back = capsule_col2im(&flat, 4, 4, cfg, &ctx).unwrap();
        assert_eq!(back.data(), input.data());
    }

    #[test]
    fn stages_do_no_arithmetic_nan_passthrough() {
        // NaN payloads must survive gather/replicate bit-for-bit, and
        // padding slots must be exact zeros.
        let pose = PoseDims::new(1, 1, 1).unwrap();
        let poison = f64::from_bits(0x7ff8_0000_dead_beef);
        let input =
            CapsuleTensor::from_raw_unchecked(1, 1, 2, 2, pose, vec![poison; 4]);
        let cfg = ConvConfig::new(1, 1).unwrap();
        let flat = capsule_im2col(&input, 2, 2, cfg).unwrap();
        for (idx, v) in flat.data.iter().enumerate() {
            assert!(
                v.to_bits() == poison.to_bits() || v.to_bits() == 0,
                "slot {idx} was recomputed"
            );
        }
        assert!(flat.data.iter().any(|v| v.to_bits() == poison.to_bits()));
        let ext = input_extend(&flat, 2);
        assert!(ext
            .data
            .iter()
            .all(|v| v.to_bits() == poison.to_bits() || v.to_bits() == 0));
    }
}
