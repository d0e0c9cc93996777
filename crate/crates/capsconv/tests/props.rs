//! Property-based invariants: offset round-trips and linearity of the
//! convolution in each operand.

use capsconv::{
    linear_coords, linear_offset, pose_matmul_accumulate, CapsuleTensor, ConvConfig, ConvKernel,
    PoseDims,
};
use capsconv::reference::naive_forward;
use proptest::prelude::*;

proptest! {
    #[test]
    fn linear_offset_round_trips(
        dims in proptest::collection::vec(1usize..=12, 1..=5),
        seed in 0usize..1_000_000,
    ) {
        let total: usize = dims.iter().product();
        prop_assume!(total <= 100_000);
        let offset = seed % total;
        let coords = linear_coords(offset, &dims).unwrap();
        prop_assert_eq!(linear_offset(&coords, &dims).unwrap(), offset);
    }

    #[test]
    fn pose_matmul_is_linear_in_lhs(
        s in 1usize..=3,
        m in 1usize..=4,
        k in 1usize..=4,
        n in 1usize..=4,
        scale in -4.0f64..4.0,
        seed in 0u64..1000,
    ) {
        let in_dims = PoseDims::new(s, m, k).unwrap();
        let k_dims = PoseDims::new(s, k, n).unwrap();
        let a: Vec<f64> = (0..in_dims.len())
            .map(|i| (((seed as usize + i) * 37 % 23) as f64) / 23.0 - 0.5)
            .collect();
        let b: Vec<f64> = (0..k_dims.len())
            .map(|i| (((seed as usize + i) * 71 % 19) as f64) / 19.0 - 0.5)
            .collect();
        let scaled: Vec<f64> = a.iter().map(|v| v * scale).collect();
        let mut out = vec![0.0; s * m * n];
        let mut out_scaled = vec![0.0; s * m * n];
        pose_matmul_accumulate(&a, in_dims, &b, k_dims, &mut out).unwrap();
        pose_matmul_accumulate(&scaled, in_dims, &b, k_dims, &mut out_scaled).unwrap();
        for (x, y) in out.iter().zip(&out_scaled) {
            prop_assert!((x * scale - y).abs() <= 1e-12 * (x * scale).abs().max(1.0));
        }
    }

    #[test]
    fn naive_forward_additive_in_kernel(
        h in 3usize..=5,
        w in 3usize..=5,
        kk in 1usize..=2,
        seed in 0u64..1000,
    ) {
        let pose = PoseDims::new(1, 2, 2).unwrap();
        let cfg = ConvConfig::new(1, 0).unwrap();
        let val = |i: usize, salt: u64| ((((seed + salt) as usize + i) * 41 % 29) as f64) / 29.0 - 0.5;
        let input = CapsuleTensor::new(
            1, 1, h, w, pose,
            (0..h * w * pose.len()).map(|i| val(i, 1)).collect(),
        ).unwrap();
        let klen = kk * kk * pose.len();
        let k1: Vec<f64> = (0..klen).map(|i| val(i, 2)).collect();
        let k2: Vec<f64> = (0..klen).map(|i| val(i, 3)).collect();
        let ksum: Vec<f64> = k1.iter().zip(&k2).map(|(a, b)| a + b).collect();
        let conv = |kd: Vec<f64>| {
            let kern = ConvKernel::new(1, 1, kk, kk, pose, kd).unwrap();
            naive_forward(&input, &kern, cfg).unwrap()
        };
        let (o1, o2, osum) = (conv(k1), conv(k2), conv(ksum));
        for ((a, b), c) in o1.data().iter().zip(o2.data()).zip(osum.data()) {
            prop_assert!((a + b - c).abs() <= 1e-12 * c.abs().max(1.0));
        }
    }
}
