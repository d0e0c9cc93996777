//! Index-table forward pass: all (input, kernel, output) offsets of the
//! pose-product tasks are precomputed, then executed in one flat loop
//! partitioned by output-pose owner.

use crate::error::{CapsError, Result};
use crate::exec::ExecContext;
use crate::tensor::{
    ensure_finite, pose_matmul_acc_opt, CapsuleTensor, ConvConfig, ConvGeometry,
    ConvKernel, Scalar,
};

/// Offsets of one pose-product task into the flat input, kernel, and output
/// buffers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexTriple {
    pub input_offset: usize,
    pub kernel_offset: usize,
    pub output_offset: usize,
}

/// All tasks of one convolution, grouped contiguously by output pose in
/// canonical accumulation order. Tasks whose gather window falls entirely in
/// the zero-padded region are omitted.
#[derive(Clone, Debug)]
pub struct IndexTable {
    geom: ConvGeometry,
    input_len: usize,
    kernel_len: usize,
    triples: Vec<IndexTriple>,
    /// Start of each output pose's task range; length = pose count + 1.
    group_starts: Vec<usize>,
}

impl IndexTable {
    pub fn geometry(&self) -> &ConvGeometry {
        &self.geom
    }

    pub fn triples(&self) -> &[IndexTriple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Task range owned by output pose `u`.
    pub fn group(&self, u: usize) -> &[IndexTriple] {
        &self.triples[self.group_starts[u]..self.group_starts[u + 1]]
    }

    pub fn pose_count(&self) -> usize {
        self.group_starts.len() - 1
    }
}

pub fn build_index_table<T: Scalar>(
    input: &CapsuleTensor<T>,
    kernel: &ConvKernel<T>,
    cfg: ConvConfig,
) -> Result<IndexTable> {
    let g = ConvGeometry::resolve(input, kernel, cfg)?;
    Ok(index_table_for(g))
}

/// Builds the table from shapes alone, so it can be cached and reused across
/// forward passes with the same geometry.
pub fn index_table_for(g: ConvGeometry) -> IndexTable {
    let in_pose_len = g.in_pose().len();
    let k_pose_len = g.kernel_pose().len();
    let out_pose_len = g.out_pose().len();
    let input_pose_offset = |b: usize, c: usize, y: usize, x: usize| {
        (((b * g.in_channels + c) * g.in_h + y) * g.in_w + x) * in_pose_len
    };
    let kernel_pose_offset = |p: usize, c: usize, m: usize, n: usize| {
        (((p * g.in_channels + c) * g.k_h + m) * g.k_w + n) * k_pose_len
    };
    let poses = g.batch * g.out_channels * g.spatial();
    let mut triples = Vec::with_capacity(poses * g.group());
    let mut group_starts = Vec::with_capacity(poses + 1);
    group_starts.push(0);

    let mut u = 0usize;
    for b in 0..g.batch {
        for p in 0..g.out_channels {
            for i in 0..g.out_h {
                for j in 0..g.out_w {
                    let output_offset = u * out_pose_len;
                    for c in 0..g.in_channels {
                        for m in 0..g.k_h {
                            let Some(y) = g.in_y(i, m) else { continue };
                            for n in 0..g.k_w {
                                let Some(x) = g.in_x(j, n) else { continue };
                                triples.push(IndexTriple {
                                    input_offset: input_pose_offset(b, c, y, x),
                                    kernel_offset: kernel_pose_offset(p, c, m, n),
                                    output_offset,
                                });
                            }
                        }
                    }
                    group_starts.push(triples.len());
                    u += 1;
                }
            }
        }
    }
    IndexTable {
        geom: g,
        input_len: g.input_len(),
        kernel_len: g.kernel_len(),
        triples,
        group_starts,
    }
}

/// Executes the table: each output pose is owned by one worker and reduced
/// sequentially over its task range.
pub fn indexed_forward<T: Scalar>(
    input: &CapsuleTensor<T>,
    kernel: &ConvKernel<T>,
    table: &IndexTable,
    ctx: &ExecContext,
) -> Result<CapsuleTensor<T>> {
    if input.data().len() != table.input_len || kernel.data().len() != table.kernel_len {
        return Err(CapsError::shape(
            "index table was built for different input/kernel shapes".to_string(),
        ));
    }
    let g = table.geom;
    ensure_finite(input.data())?;
    ensure_finite(kernel.data())?;
    let in_pose_len = g.in_pose().len();
    let k_pose_len = g.kernel_pose().len();
    let out_pose_len = g.out_pose().len();
    let mut out = vec![T::zero(); table.pose_count() * out_pose_len];
    let idata = input.data();
    let kdata = kernel.data();
    ctx.for_each_chunk_mut(&mut out, out_pose_len, |u, acc| {
        for t in table.group(u) {
            debug_assert_eq!(t.output_offset, u * out_pose_len);
            pose_matmul_acc_opt(
                &idata[t.input_offset..][..in_pose_len],
                &kdata[t.kernel_offset..][..k_pose_len],
                acc,
                g.slices,
                g.m,
                g.k,
                g.n,
            );
        }
    });
    Ok(CapsuleTensor::from_raw_unchecked(
        g.batch,
        g.out_channels,
        g.out_h,
        g.out_w,
        g.out_pose(),
        out,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::AccumMode;
    use crate::reference::naive_forward;
    use crate::tensor::PoseDims;

    #[test]
    fn unit_geometry_single_triple() {
        let pose = PoseDims::new(1, 1, 1).unwrap();
        let input = CapsuleTensor::new(1, 1, 1, 1, pose, vec![2.0f64]).unwrap();
        let kernel = ConvKernel::new(1, 1, 1, 1, pose, vec![3.0]).unwrap();
        let table = build_index_table(&input, &kernel, ConvConfig::new(1, 0).unwrap()).unwrap();
        assert_eq!(table.triples(), &[IndexTriple { input_offset: 0, kernel_offset: 0, output_offset: 0 }]);
    }

    #[test]
    fn figure2_has_64_triples() {
        let pose = PoseDims::new(3, 3, 3).unwrap();
        let input = CapsuleTensor::new(1, 1, 5, 5, pose, vec![1.0f64; 25 * 27]).unwrap();
        let kernel = ConvKernel::new(1, 1, 4, 4, pose, vec![1.0; 16 * 27]).unwrap();
        let table = build_index_table(&input, &kernel, ConvConfig::new(1, 0).unwrap()).unwrap();
        assert_eq!(table.len(), 64);
        let out = indexed_forward(&input, &kernel, &table, &ExecContext::reference()).unwrap();
        assert!(out.data().iter().all(|&v| v == 48.0));
    }

    #[test]
    fn offsets_in_bounds_and_poses_covered() {
        let ip = PoseDims::new(3, 2, 3).unwrap();
        let kp = PoseDims::new(3, 3, 4).unwrap();
        let input: CapsuleTensor<f64> = CapsuleTensor::zeros(2, 2, 6, 5, ip);
        let kernel = ConvKernel::zeros(3, 2, 3, 2, kp);
        let cfg = ConvConfig::new(2, 1).unwrap();
        let table = build_index_table(&input, &kernel, cfg).unwrap();
        for t in table.triples() {
            assert!(t.input_offset + ip.len() <= input.data().len());
            assert!(t.kernel_offset + kp.len() <= kernel.data().len());
        }
        // padding 1 < kernel extent, so every window intersects the input
        for u in 0..table.pose_count() {
            assert!(!table.group(u).is_empty());
        }
        // groups contiguous and ascending by output offset
        let mut last = 0;
        for t in table.triples() {
            assert!(t.output_offset >= last);
            last = t.output_offset;
        }
    }

    #[test]
    fn zero_input_zero_output() {
        let pose = PoseDims::new(1, 2, 2).unwrap();
        let input = CapsuleTensor::zeros(1, 1, 4, 4, pose);
        let kernel = ConvKernel::new(2, 1, 2, 2, pose, vec![1.5; 2 * 4 * pose.len()]).unwrap();
        let table = build_index_table(&input, &kernel, ConvConfig::new(1, 0).unwrap()).unwrap();
        let out = indexed_forward(&input, &kernel, &table, &ExecContext::reference()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    fn rand_vec(len: usize, seed: u64) -> Vec<f64> {
        let mut state = seed | 1;
        (0..len)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(99);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn matches_naive_exactly() {
        let ip = PoseDims::new(2, 3, 2).unwrap();
        let kp = PoseDims::new(2, 2, 3).unwrap();
        let input =
            CapsuleTensor::new(2, 2, 5, 5, ip, rand_vec(2 * 2 * 25 * ip.len(), 41)).unwrap();
        let kernel =
            ConvKernel::new(3, 2, 2, 2, kp, rand_vec(3 * 2 * 4 * kp.len(), 42)).unwrap();
        let cfg = ConvConfig::new(1, 1).unwrap();
        let naive = naive_forward(&input, &kernel, cfg).unwrap();
        let table = build_index_table(&input, &kernel, cfg).unwrap();
        for workers in [1, 2, 8] {
            let ctx = ExecContext::new(AccumMode::Optimized, workers);
            let out = indexed_forward(&input, &kernel, &table, &ctx).unwrap();
            assert_eq!(out.data(), naive.data());
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let pose = PoseDims::new(1, 1, 1).unwrap();
        let input: CapsuleTensor<f64> = CapsuleTensor::zeros(1, 1, 3, 3, pose);
        let kernel = ConvKernel::zeros(1, 1, 2, 2, pose);
        let table = build_index_table(&input, &kernel, ConvConfig::new(1, 0).unwrap()).unwrap();
        let other = CapsuleTensor::zeros(1, 1, 4, 4, pose);
        assert!(indexed_forward(&other, &kernel, &table, &ExecContext::reference()).is_err());
    }
}
