//! Library surface of the capsbench CLI: config parsing, suite wiring, and
//! benchmark timing/reporting. The binary in `main.rs` is a thin wrapper.

pub mod bench;
pub mod check;
pub mod config;
pub mod report;

/// The config shipped with the binary and used when `--config` is omitted.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.cfg");
