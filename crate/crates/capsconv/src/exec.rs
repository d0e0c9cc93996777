//! Execution controls shared by the accelerated engines.
//!
//! Every parallel section partitions work by destination owner: each output
//! chunk is reduced by exactly one worker, sequentially, in canonical order.
//! Results are therefore independent of the worker count.

/// Floating-point accumulation discipline.
///
/// `Reference` pins the canonical summation order and the literal, fully
/// materialized lowering stages, making independent engines bitwise
/// comparable. `Optimized` is allowed to use zero-copy strided views over
/// the flattened input and the raw kernel instead of materialized replicas;
/// the per-scalar reduction order is unchanged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccumMode {
    Reference,
    Optimized,
}

/// Accumulation mode plus an optional private thread pool.
pub struct ExecContext {
    mode: AccumMode,
    workers: usize,
    pool: Option<rayon::ThreadPool>,
}

impl ExecContext {
    pub fn new(mode: AccumMode, workers: usize) -> Self {
        let workers = workers.max(1);
        let pool = (workers > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .expect("failed to build worker pool")
        });
        ExecContext { mode, workers, pool }
    }

    /// Single-threaded reference-mode context; the testing default.
    pub fn reference() -> Self {
        Self::new(AccumMode::Reference, 1)
    }

    pub fn mode(&self) -> AccumMode {
        self.mode
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `f(chunk_index, chunk)` over exact `chunk_len` chunks of `data`,
    /// in parallel when a pool is configured. `data.len()` must be a
    /// multiple of `chunk_len`.
    pub(crate) fn for_each_chunk_mut<T, F>(&self, data: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Send + Sync,
    {
        debug_assert_eq!(data.len() % chunk_len.max(1), 0);
        match &self.pool {
            Some(pool) => pool.install(|| {
                use rayon::prelude::*;
                data.par_chunks_mut(chunk_len)
                    .enumerate()
                    .for_each(|(i, c)| f(i, c));
            }),
            None => {
                for (i, c) in data.chunks_mut(chunk_len).enumerate() {
                    f(i, c);
                }
            }
        }
    }
}
