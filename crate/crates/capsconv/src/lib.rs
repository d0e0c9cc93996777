//! Capsule-convolution compute library.
//!
//! Capsule convolution replaces the scalar multiply-add of plain convolution
//! with slice-wise pose matrix products: each output capsule is a linear
//! combination of small matrices. This crate provides three interchangeable
//! engines over one data model:
//!
//! * [`reference::naive_forward`] / [`reference::naive_backward`] — the
//!   single-threaded loop-nest oracle.
//! * [`accel::accel_forward`] / [`accel::accel_backward`] — im2col-style
//!   lowering to strided batched small-matrix multiplication.
//! * [`indexed::indexed_forward`] — a precomputed index-table variant with
//!   one flat parallel loop.
//!
//! All engines share a canonical accumulation order and are bitwise
//! comparable in reference mode; parallel execution partitions work by
//! destination owner, so results are independent of worker count.

pub mod accel;
pub mod engine;
pub mod error;
pub mod exec;
pub mod indexed;
pub mod lowering;
pub mod matmul;
pub mod network;
pub mod reference;
pub mod suite;
pub mod tensor;

pub use engine::{conv_backward, conv_forward, EngineKind};
pub use error::{CapsError, Result};
pub use exec::{AccumMode, ExecContext};
pub use tensor::{
    linear_coords, linear_offset, output_dims, pose_matmul_accumulate, CapsuleTensor, ConvConfig,
    ConvGeometry, ConvKernel, PoseDims, Scalar, ScalarKind,
};
