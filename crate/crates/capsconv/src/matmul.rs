//! Strided batched small-matrix multiplication.
//!
//! A [`BatchPlan`] describes many independent, equal-shaped slice products
//! whose operands sit at regular offsets. Operand addressing is
//! chunk-periodic: an operand advances by `stride` for `chunk` consecutive
//! batches, rewinds for `repeats` passes, then jumps to the next chunk.
//! `repeats == 1` with `chunk == batch_count` is plain dense striding; the
//! periodic form realizes the replication of Figures 4 and 5 without
//! materializing the copies.

use crate::error::{CapsError, Result};
use crate::exec::ExecContext;
use crate::tensor::{mat_a_bt_acc, mat_ab_acc, mat_at_b_acc, Scalar};

/// Addressing of one operand across the batch sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OperandSpec {
    /// Element stride between consecutive operand blocks within a chunk.
    pub stride: usize,
    /// Batches per pass over the operand.
    pub chunk: usize,
    /// Passes repeated at the same base offset.
    pub repeats: usize,
}

impl OperandSpec {
    pub fn dense(stride: usize, batch_count: usize) -> Self {
        OperandSpec { stride, chunk: batch_count.max(1), repeats: 1 }
    }

    pub fn offset(&self, t: usize) -> usize {
        ((t / (self.chunk * self.repeats)) * self.chunk + t % self.chunk) * self.stride
    }

    fn max_offset(&self, batch_count: usize) -> usize {
        if batch_count == 0 {
            return 0;
        }
        let supers = (batch_count - 1) / (self.chunk * self.repeats);
        let last_in_chunk = if batch_count >= self.chunk {
            self.chunk - 1
        } else {
            batch_count - 1
        };
        (supers * self.chunk + last_in_chunk) * self.stride
    }
}

/// Uniform dims plus operand addressing for one batched multiply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchPlan {
    pub batch_count: usize,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub a: OperandSpec,
    pub b: OperandSpec,
    /// Output blocks are dense; stride between consecutive results.
    pub c_stride: usize,
}

impl BatchPlan {
    pub fn a_stride(&self) -> usize {
        self.a.stride
    }

    pub fn b_stride(&self) -> usize {
        self.b.stride
    }
}

/// Flat array of `batch_count` independent `rows x cols` products.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchProduct<T: Scalar> {
    pub batch_count: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

#[derive(Clone, Copy)]
enum ProductKind {
    /// A (m x k) * B (k x n) -> m x n
    AxB,
    /// Aᵀ * B with A (m x k), B (m x n) -> k x n
    AtxB,
    /// A * Bᵀ with A (m x n), B (k x n) -> m x k
    AxBt,
}

fn run_batched<T: Scalar>(
    a: &[T],
    b: &[T],
    plan: &BatchPlan,
    ctx: &ExecContext,
    kind: ProductKind,
) -> Result<BatchProduct<T>> {
    let (m, k, n) = (plan.m, plan.k, plan.n);
    let (a_block, b_block, out_rows, out_cols) = match kind {
        ProductKind::AxB => (m * k, k * n, m, n),
        ProductKind::AtxB => (m * k, m * n, k, n),
        ProductKind::AxBt => (m * n, k * n, m, k),
    };
    let out_len = out_rows * out_cols;
    if plan.c_stride != out_len {
        return Err(CapsError::shape(format!(
            "plan c_stride {} != result block length {out_len}",
            plan.c_stride
        )));
    }
    if plan.batch_count > 0 {
        let need_a = plan.a.max_offset(plan.batch_count) + a_block;
        let need_b = plan.b.max_offset(plan.batch_count) + b_block;
        if a.len() < need_a || b.len() < need_b {
            return Err(CapsError::shape(format!(
                "operand buffers ({}, {}) too small for plan needing ({need_a}, {need_b})",
                a.len(),
                b.len()
            )));
        }
    }
    let mut data = vec![T::zero(); plan.batch_count * out_len];
    let (a_spec, b_spec) = (plan.a, plan.b);
    ctx.for_each_chunk_mut(&mut data, out_len, |t, c| {
        let lhs = &a[a_spec.offset(t)..][..a_block];
        let rhs = &b[b_spec.offset(t)..][..b_block];
        match kind {
            ProductKind::AxB => mat_ab_acc(lhs, rhs, c, m, k, n),
            ProductKind::AtxB => mat_at_b_acc(lhs, rhs, c, m, k, n),
            ProductKind::AxBt => mat_a_bt_acc(lhs, rhs, c, m, k, n),
        }
    });
    Ok(BatchProduct { batch_count: plan.batch_count, rows: out_rows, cols: out_cols, data })
}

/// Per batch t: `A_t (m x k) * B_t (k x n)`, inner reduction ascending.
pub fn batched_matmul<T: Scalar>(
    a: &[T],
    b: &[T],
    plan: &BatchPlan,
    ctx: &ExecContext,
) -> Result<BatchProduct<T>> {
    run_batched(a, b, plan, ctx, ProductKind::AxB)
}

/// Per batch t: `A_tᵀ * G_t` with A (m x k), G (m x n); used for dK partials.
pub(crate) fn batched_matmul_at_b<T: Scalar>(
    a: &[T],
    g: &[T],
    plan: &BatchPlan,
    ctx: &ExecContext,
) -> Result<BatchProduct<T>> {
    run_batched(a, g, plan, ctx, ProductKind::AtxB)
}

/// Per batch t: `G_t * B_tᵀ` with G (m x n), B (k x n); used for dI columns.
pub(crate) fn batched_matmul_a_bt<T: Scalar>(
    g: &[T],
    b: &[T],
    plan: &BatchPlan,
    ctx: &ExecContext,
) -> Result<BatchProduct<T>> {
    run_batched(g, b, plan, ctx, ProductKind::AxBt)
}
