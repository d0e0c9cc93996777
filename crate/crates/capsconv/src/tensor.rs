//! Pose data model: capsule tensors, capsule kernels, canonical layouts,
//! the shape law, and the slice-wise small-matrix multiply primitive.
//!
//! Layouts are row-major throughout: feature maps are `[B][C][H][W][S][M][K]`
//! and kernels are `[C'][C][k_h][k_w][S][K][N]`. Every engine derives its
//! offsets from these two layouts.

use crate::error::{CapsError, Result};

/// Scalar kinds supported by every engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarKind {
    F32,
    F64,
}

/// Element type of all buffers. f64 is the testing default.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    const KIND: ScalarKind;
}

impl Scalar for f32 {
    const KIND: ScalarKind = ScalarKind::F32;
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::F64;
}

/// Dimensions of one capsule pose: a stack of `slices` matrices of shape
/// `rows x cols`, multiplied slice-wise. `slices == 1` recovers plain
/// matrix capsules.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoseDims {
    pub slices: usize,
    pub rows: usize,
    pub cols: usize,
}

impl PoseDims {
    pub fn new(slices: usize, rows: usize, cols: usize) -> Result<Self> {
        if slices == 0 || rows == 0 || cols == 0 {
            return Err(CapsError::shape(format!(
                "pose dims must be positive, got ({slices}, {rows}, {cols})"
            )));
        }
        Ok(PoseDims { slices, rows, cols })
    }

    /// Scalar slots occupied by one pose.
    pub fn len(&self) -> usize {
        self.slices * self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Stride and symmetric zero-padding for a convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvConfig {
    pub stride: usize,
    pub padding: usize,
}

impl ConvConfig {
    pub fn new(stride: usize, padding: usize) -> Result<Self> {
        if stride == 0 {
            return Err(CapsError::shape("stride must be >= 1"));
        }
        Ok(ConvConfig { stride, padding })
    }
}

/// Output spatial dims under the standard shape law.
pub fn output_dims(
    h: usize,
    w: usize,
    k_h: usize,
    k_w: usize,
    cfg: ConvConfig,
) -> Result<(usize, usize)> {
    let padded_h = h + 2 * cfg.padding;
    let padded_w = w + 2 * cfg.padding;
    if k_h > padded_h || k_w > padded_w {
        return Err(CapsError::shape(format!(
            "kernel {k_h}x{k_w} larger than padded input {padded_h}x{padded_w}"
        )));
    }
    Ok((
        (padded_h - k_h) / cfg.stride + 1,
        (padded_w - k_w) / cfg.stride + 1,
    ))
}

/// Row-major linear offset of `coords` within extents `dims`.
pub fn linear_offset(coords: &[usize], dims: &[usize]) -> Result<usize> {
    if coords.len() != dims.len() {
        return Err(CapsError::bounds(format!(
            "{} coordinates for {} extents",
            coords.len(),
            dims.len()
        )));
    }
    let mut off = 0usize;
    for (i, (&c, &d)) in coords.iter().zip(dims).enumerate() {
        if c >= d {
            return Err(CapsError::bounds(format!(
                "coordinate {c} >= extent {d} at axis {i}"
            )));
        }
        off = off * d + c;
    }
    Ok(off)
}

/// Inverse of [`linear_offset`].
pub fn linear_coords(offset: usize, dims: &[usize]) -> Result<Vec<usize>> {
    let total: usize = dims.iter().product();
    if offset >= total {
        return Err(CapsError::bounds(format!(
            "offset {offset} >= total extent {total}"
        )));
    }
    let mut coords = vec![0usize; dims.len()];
    let mut rem = offset;
    for (c, &d) in coords.iter_mut().zip(dims).rev() {
        *c = rem % d;
        rem /= d;
    }
    Ok(coords)
}

/// Batched feature map of capsule poses, layout `[B][C][H][W][S][M][K]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CapsuleTensor<T: Scalar> {
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
    pose: PoseDims,
    data: Vec<T>,
}

fn check_finite<T: Scalar>(data: &[T]) -> Result<()> {
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(CapsError::NonFinite { index });
    }
    Ok(())
}

impl<T: Scalar> CapsuleTensor<T> {
    pub fn new(
        batch: usize,
        channels: usize,
        height: usize,
        width: usize,
        pose: PoseDims,
        data: Vec<T>,
    ) -> Result<Self> {
        let expect = batch * channels * height * width * pose.len();
        if data.len() != expect {
            return Err(CapsError::shape(format!(
                "tensor data length {} != {expect} for ({batch},{channels},{height},{width},{:?})",
                data.len(),
                pose
            )));
        }
        check_finite(&data)?;
        Ok(CapsuleTensor { batch, channels, height, width, pose, data })
    }

    /// Skips the finiteness check. Engine outputs and test poisons.
    pub fn from_raw_unchecked(
        batch: usize,
        channels: usize,
        height: usize,
        width: usize,
        pose: PoseDims,
        data: Vec<T>,
    ) -> Self {
        debug_assert_eq!(data.len(), batch * channels * height * width * pose.len());
        CapsuleTensor { batch, channels, height, width, pose, data }
    }

    pub fn zeros(batch: usize, channels: usize, height: usize, width: usize, pose: PoseDims) -> Self {
        let len = batch * channels * height * width * pose.len();
        CapsuleTensor { batch, channels, height, width, pose, data: vec![T::zero(); len] }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pose(&self) -> PoseDims {
        self.pose
    }

    pub fn scalar_kind(&self) -> ScalarKind {
        T::KIND
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn shape(&self) -> (usize, usize, usize, usize, PoseDims) {
        (self.batch, self.channels, self.height, self.width, self.pose)
    }

    /// Flat offset of the pose block at `(b, c, y, x)`.
    pub fn pose_offset(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        (((b * self.channels + c) * self.height + y) * self.width + x) * self.pose.len()
    }

    pub fn pose_block(&self, b: usize, c: usize, y: usize, x: usize) -> &[T] {
        let off = self.pose_offset(b, c, y, x);
        &self.data[off..off + self.pose.len()]
    }
}

/// Capsule kernel, layout `[C'][C][k_h][k_w][S][K][N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel<T: Scalar> {
    out_channels: usize,
    in_channels: usize,
    k_h: usize,
    k_w: usize,
    pose: PoseDims,
    data: Vec<T>,
}

impl<T: Scalar> ConvKernel<T> {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        k_h: usize,
        k_w: usize,
        pose: PoseDims,
        data: Vec<T>,
    ) -> Result<Self> {
        let expect = out_channels * in_channels * k_h * k_w * pose.len();
        if data.len() != expect {
            return Err(CapsError::shape(format!(
                "kernel data length {} != {expect} for ({out_channels},{in_channels},{k_h},{k_w},{:?})",
                data.len(),
                pose
            )));
        }
        check_finite(&data)?;
        Ok(ConvKernel { out_channels, in_channels, k_h, k_w, pose, data })
    }

    pub fn zeros(
        out_channels: usize,
        in_channels: usize,
        k_h: usize,
        k_w: usize,
        pose: PoseDims,
    ) -> Self {
        let len = out_channels * in_channels * k_h * k_w * pose.len();
        ConvKernel { out_channels, in_channels, k_h, k_w, pose, data: vec![T::zero(); len] }
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn k_h(&self) -> usize {
        self.k_h
    }

    pub fn k_w(&self) -> usize {
        self.k_w
    }

    pub fn pose(&self) -> PoseDims {
        self.pose
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Flat offset of the pose block at `(out_channel, in_channel, m, n)`.
    pub fn pose_offset(&self, p: usize, c: usize, m: usize, n: usize) -> usize {
        (((p * self.in_channels + c) * self.k_h + m) * self.k_w + n) * self.pose.len()
    }

    pub fn pose_block(&self, p: usize, c: usize, m: usize, n: usize) -> &[T] {
        let off = self.pose_offset(p, c, m, n);
        &self.data[off..off + self.pose.len()]
    }
}

/// Resolved geometry shared by all engines for one (input, kernel, config)
/// triple. Construction performs the full shape validation.
#[derive(Clone, Copy, Debug)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub slices: usize,
    /// Pose rows M of the input.
    pub m: usize,
    /// Inner dim K: input pose cols == kernel pose rows.
    pub k: usize,
    /// Output pose cols N (kernel pose cols).
    pub n: usize,
}

impl ConvGeometry {
    pub fn resolve<T: Scalar>(
        input: &CapsuleTensor<T>,
        kernel: &ConvKernel<T>,
        cfg: ConvConfig,
    ) -> Result<Self> {
        if kernel.in_channels() != input.channels() {
            return Err(CapsError::shape(format!(
                "kernel in_channels {} != input channels {}",
                kernel.in_channels(),
                input.channels()
            )));
        }
        Self::from_parts(
            input.batch(),
            input.channels(),
            kernel.out_channels(),
            input.height(),
            input.width(),
            kernel.k_h(),
            kernel.k_w(),
            input.pose(),
            kernel.pose(),
            cfg,
        )
    }

    /// Shape-only construction; no tensors required.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        batch: usize,
        in_channels: usize,
        out_channels: usize,
        in_h: usize,
        in_w: usize,
        k_h: usize,
        k_w: usize,
        in_pose: PoseDims,
        kernel_pose: PoseDims,
        cfg: ConvConfig,
    ) -> Result<Self> {
        if in_pose.slices != kernel_pose.slices {
            return Err(CapsError::shape(format!(
                "pose slice counts differ: input {} vs kernel {}",
                in_pose.slices, kernel_pose.slices
            )));
        }
        if in_pose.cols != kernel_pose.rows {
            return Err(CapsError::shape(format!(
                "input pose cols {} != kernel pose rows {}",
                in_pose.cols, kernel_pose.rows
            )));
        }
        let (out_h, out_w) = output_dims(in_h, in_w, k_h, k_w, cfg)?;
        Ok(ConvGeometry {
            batch,
            in_channels,
            out_channels,
            in_h,
            in_w,
            k_h,
            k_w,
            out_h,
            out_w,
            stride: cfg.stride,
            padding: cfg.padding,
            slices: in_pose.slices,
            m: in_pose.rows,
            k: in_pose.cols,
            n: kernel_pose.cols,
        })
    }

    /// Kernel positions per output pose: C * k_h * k_w.
    pub fn group(&self) -> usize {
        self.in_channels * self.k_h * self.k_w
    }

    /// Output positions per batch item: H' * W'.
    pub fn spatial(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Independent slice-level matrix products in the lowered form.
    pub fn batch_count(&self) -> usize {
        self.batch * self.out_channels * self.spatial() * self.group() * self.slices
    }

    /// Scalars in one im2col column.
    pub fn col_len(&self) -> usize {
        self.group() * self.slices * self.m * self.k
    }

    /// Scalars in the input tensor.
    pub fn input_len(&self) -> usize {
        self.batch * self.in_channels * self.in_h * self.in_w * self.in_pose().len()
    }

    /// Scalars in the kernel.
    pub fn kernel_len(&self) -> usize {
        self.out_channels * self.group() * self.kernel_pose().len()
    }

    pub fn in_pose(&self) -> PoseDims {
        PoseDims { slices: self.slices, rows: self.m, cols: self.k }
    }

    pub fn kernel_pose(&self) -> PoseDims {
        PoseDims { slices: self.slices, rows: self.k, cols: self.n }
    }

    pub fn out_pose(&self) -> PoseDims {
        PoseDims { slices: self.slices, rows: self.m, cols: self.n }
    }

    /// Input row for output row `i` and kernel row `m`, or None when the
    /// read falls in the zero-padded region.
    pub fn in_y(&self, i: usize, m: usize) -> Option<usize> {
        let y = i * self.stride + m;
        if y < self.padding {
            return None;
        }
        let y = y - self.padding;
        (y < self.in_h).then_some(y)
    }

    pub fn in_x(&self, j: usize, n: usize) -> Option<usize> {
        let x = j * self.stride + n;
        if x < self.padding {
            return None;
        }
        let x = x - self.padding;
        (x < self.in_w).then_some(x)
    }

    /// Expected gradient/output tensor shape check.
    pub fn check_output_shape<T: Scalar>(&self, t: &CapsuleTensor<T>) -> Result<()> {
        let expect = (self.batch, self.out_channels, self.out_h, self.out_w, self.out_pose());
        if t.shape() != expect {
            return Err(CapsError::shape(format!(
                "output-shaped tensor is {:?}, expected {:?}",
                t.shape(),
                expect
            )));
        }
        Ok(())
    }
}

/// Slice-wise `acc += in_pose * kernel_pose`.
///
/// For each slice and each output entry the inner product over K is reduced
/// in ascending index order into a fresh temporary, then added to `acc` with
/// a single add. This is the canonical accumulation primitive every engine
/// shares.
pub fn pose_matmul_accumulate<T: Scalar>(
    in_pose: &[T],
    in_dims: PoseDims,
    kernel_pose: &[T],
    kernel_dims: PoseDims,
    acc: &mut [T],
) -> Result<()> {
    if in_dims.slices != kernel_dims.slices {
        return Err(CapsError::shape(format!(
            "slice counts differ: {} vs {}",
            in_dims.slices, kernel_dims.slices
        )));
    }
    if in_dims.cols != kernel_dims.rows {
        return Err(CapsError::shape(format!(
            "inner dims differ: {} vs {}",
            in_dims.cols, kernel_dims.rows
        )));
    }
    if in_pose.len() != in_dims.len() || kernel_pose.len() != kernel_dims.len() {
        return Err(CapsError::shape("pose block length mismatch".to_string()));
    }
    let expect_acc = in_dims.slices * in_dims.rows * kernel_dims.cols;
    if acc.len() != expect_acc {
        return Err(CapsError::shape(format!(
            "acc length {} != {expect_acc}",
            acc.len()
        )));
    }
    pose_matmul_acc_unchecked(
        in_pose,
        kernel_pose,
        acc,
        in_dims.slices,
        in_dims.rows,
        in_dims.cols,
        kernel_dims.cols,
    );
    Ok(())
}

/// acc (S,M,N) += A (S,M,K) * B (S,K,N), slice-wise.
pub(crate) fn pose_matmul_acc_unchecked<T: Scalar>(
    a: &[T],
    b: &[T],
    acc: &mut [T],
    s: usize,
    m: usize,
    k: usize,
    n: usize,
) {
    for si in 0..s {
        let a = &a[si * m * k..][..m * k];
        let b = &b[si * k * n..][..k * n];
        let c = &mut acc[si * m * n..][..m * n];
        mat_ab_acc(a, b, c, m, k, n);
    }
}

/// acc (S,K,N) += Aᵀ * G, slice-wise, A (S,M,K), G (S,M,N). Dot over M.
pub(crate) fn pose_at_b_acc<T: Scalar>(
    a: &[T],
    g: &[T],
    acc: &mut [T],
    s: usize,
    m: usize,
    k: usize,
    n: usize,
) {
    for si in 0..s {
        let a = &a[si * m * k..][..m * k];
        let g = &g[si * m * n..][..m * n];
        let c = &mut acc[si * k * n..][..k * n];
        mat_at_b_acc(a, g, c, m, k, n);
    }
}

/// acc (S,M,K) += G * Bᵀ, slice-wise, G (S,M,N), B (S,K,N). Dot over N.
pub(crate) fn pose_a_bt_acc<T: Scalar>(
    g: &[T],
    b: &[T],
    acc: &mut [T],
    s: usize,
    m: usize,
    k: usize,
    n: usize,
) {
    for si in 0..s {
        let g = &g[si * m * n..][..m * n];
        let b = &b[si * k * n..][..k * n];
        let c = &mut acc[si * m * k..][..m * k];
        mat_a_bt_acc(g, b, c, m, k, n);
    }
}

/// c (m x n) += a (m x k) * b (k x n).
pub(crate) fn mat_ab_acc<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for r in 0..m {
        let arow = &a[r * k..][..k];
        let crow = &mut c[r * n..][..n];
        for col in 0..n {
            let mut t = T::zero();
            for kk in 0..k {
                t = t + arow[kk] * b[kk * n + col];
            }
            crow[col] = crow[col] + t;
        }
    }
}

/// c (k x n) += aᵀ * g, a (m x k), g (m x n).
pub(crate) fn mat_at_b_acc<T: Scalar>(a: &[T], g: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for kk in 0..k {
        let crow = &mut c[kk * n..][..n];
        for col in 0..n {
            let mut t = T::zero();
            for mm in 0..m {
                t = t + a[mm * k + kk] * g[mm * n + col];
            }
            crow[col] = crow[col] + t;
        }
    }
}

/// c (m x k) += g * bᵀ, g (m x n), b (k x n).
pub(crate) fn mat_a_bt_acc<T: Scalar>(g: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for r in 0..m {
        let grow = &g[r * n..][..n];
        let crow = &mut c[r * k..][..k];
        for kk in 0..k {
            let brow = &b[kk * n..][..n];
            let mut t = T::zero();
            for col in 0..n {
                t = t + grow[col] * brow[col];
            }
            crow[kk] = crow[kk] + t;
        }
    }
}

// Unrolled micro-kernels for the accelerated engines. Each one performs
// exactly the same accumulation chain per output scalar as its generic
// counterpart (including the leading zero of the fresh temporary), so the
// results are bit-identical; only bounds checks and loop overhead differ.
// The naive oracle keeps the plain generic kernels by contract.

/// Like [`pose_matmul_acc_unchecked`] but dispatching to an unrolled kernel
/// when the inner dims are 4x4.
pub(crate) fn pose_matmul_acc_opt<T: Scalar>(
    a: &[T],
    b: &[T],
    acc: &mut [T],
    s: usize,
    m: usize,
    k: usize,
    n: usize,
) {
    if k == 4 && n == 4 {
        for si in 0..s {
            mat_ab_acc_k4n4(&a[si * m * 4..][..m * 4], &b[si * 16..][..16], &mut acc[si * m * 4..][..m * 4], m);
        }
    } else {
        pose_matmul_acc_unchecked(a, b, acc, s, m, k, n);
    }
}

/// Like [`pose_at_b_acc`] but unrolled for M = N = 4.
pub(crate) fn pose_at_b_acc_opt<T: Scalar>(
    a: &[T],
    g: &[T],
    acc: &mut [T],
    s: usize,
    m: usize,
    k: usize,
    n: usize,
) {
    if m == 4 && n == 4 {
        for si in 0..s {
            mat_at_b_acc_m4n4(&a[si * 4 * k..][..4 * k], &g[si * 16..][..16], &mut acc[si * k * 4..][..k * 4], k);
        }
    } else {
        pose_at_b_acc(a, g, acc, s, m, k, n);
    }
}

/// Like [`pose_a_bt_acc`] but unrolled for K = N = 4.
pub(crate) fn pose_a_bt_acc_opt<T: Scalar>(
    g: &[T],
    b: &[T],
    acc: &mut [T],
    s: usize,
    m: usize,
    k: usize,
    n: usize,
) {
    if k == 4 && n == 4 {
        for si in 0..s {
            mat_a_bt_acc_k4n4(&g[si * m * 4..][..m * 4], &b[si * 16..][..16], &mut acc[si * m * 4..][..m * 4], m);
        }
    } else {
        pose_a_bt_acc(g, b, acc, s, m, k, n);
    }
}

/// c (m x 4) += a (m x 4) * b (4 x 4), chains matching [`mat_ab_acc`].
fn mat_ab_acc_k4n4<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize) {
    let (b00, b01, b02, b03) = (b[0], b[1], b[2], b[3]);
    let (b10, b11, b12, b13) = (b[4], b[5], b[6], b[7]);
    let (b20, b21, b22, b23) = (b[8], b[9], b[10], b[11]);
    let (b30, b31, b32, b33) = (b[12], b[13], b[14], b[15]);
    for r in 0..m {
        let ar = &a[r * 4..][..4];
        let (a0, a1, a2, a3) = (ar[0], ar[1], ar[2], ar[3]);
        let cr = &mut c[r * 4..][..4];
        cr[0] = cr[0] + (T::zero() + a0 * b00 + a1 * b10 + a2 * b20 + a3 * b30);
        cr[1] = cr[1] + (T::zero() + a0 * b01 + a1 * b11 + a2 * b21 + a3 * b31);
        cr[2] = cr[2] + (T::zero() + a0 * b02 + a1 * b12 + a2 * b22 + a3 * b32);
        cr[3] = cr[3] + (T::zero() + a0 * b03 + a1 * b13 + a2 * b23 + a3 * b33);
    }
}

/// c (k x 4) += aᵀ * g with a (4 x k), g (4 x 4), chains matching
/// [`mat_at_b_acc`].
fn mat_at_b_acc_m4n4<T: Scalar>(a: &[T], g: &[T], c: &mut [T], k: usize) {
    let (g00, g01, g02, g03) = (g[0], g[1], g[2], g[3]);
    let (g10, g11, g12, g13) = (g[4], g[5], g[6], g[7]);
    let (g20, g21, g22, g23) = (g[8], g[9], g[10], g[11]);
    let (g30, g31, g32, g33) = (g[12], g[13], g[14], g[15]);
    for kk in 0..k {
        let (a0, a1, a2, a3) = (a[kk], a[k + kk], a[2 * k + kk], a[3 * k + kk]);
        let cr = &mut c[kk * 4..][..4];
        cr[0] = cr[0] + (T::zero() + a0 * g00 + a1 * g10 + a2 * g20 + a3 * g30);
        cr[1] = cr[1] + (T::zero() + a0 * g01 + a1 * g11 + a2 * g21 + a3 * g31);
        cr[2] = cr[2] + (T::zero() + a0 * g02 + a1 * g12 + a2 * g22 + a3 * g32);
        cr[3] = cr[3] + (T::zero() + a0 * g03 + a1 * g13 + a2 * g23 + a3 * g33);
    }
}

/// c (m x 4) += g * bᵀ with g (m x 4), b (4 x 4), chains matching
/// [`mat_a_bt_acc`].
fn mat_a_bt_acc_k4n4<T: Scalar>(g: &[T], b: &[T], c: &mut [T], m: usize) {
    let (b00, b01, b02, b03) = (b[0], b[1], b[2], b[3]);
    let (b10, b11, b12, b13) = (b[4], b[5], b[6], b[7]);
    let (b20, b21, b22, b23) = (b[8], b[9], b[10], b[11]);
    let (b30, b31, b32, b33) = (b[12], b[13], b[14], b[15]);
    for r in 0..m {
        let gr = &g[r * 4..][..4];
        let (g0, g1, g2, g3) = (gr[0], gr[1], gr[2], gr[3]);
        let cr = &mut c[r * 4..][..4];
        cr[0] = cr[0] + (T::zero() + g0 * b00 + g1 * b01 + g2 * b02 + g3 * b03);
        cr[1] = cr[1] + (T::zero() + g0 * b10 + g1 * b11 + g2 * b12 + g3 * b13);
        cr[2] = cr[2] + (T::zero() + g0 * b20 + g1 * b21 + g2 * b22 + g3 * b23);
        cr[3] = cr[3] + (T::zero() + g0 * b30 + g1 * b31 + g2 * b32 + g3 * b33);
    }
}

pub(crate) fn ensure_finite<T: Scalar>(data: &[T]) -> Result<()> {
    check_finite(data)
}
