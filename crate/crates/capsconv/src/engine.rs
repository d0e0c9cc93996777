//! Engine selection: one forward/backward entry point per layer.

use crate::accel::{accel_backward, accel_forward};
use crate::error::Result;
use crate::exec::ExecContext;
use crate::indexed::{build_index_table, indexed_forward};
use crate::reference::{naive_backward, naive_forward};
use crate::tensor::{CapsuleTensor, ConvConfig, ConvKernel, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineKind {
    Naive,
    Accel,
    Indexed,
}

impl EngineKind {
    pub fn name(&self) -> &'static str {
        match self {
            EngineKind::Naive => "naive",
            EngineKind::Accel => "accel",
            EngineKind::Indexed => "indexed",
        }
    }

    pub fn all() -> [EngineKind; 3] {
        [EngineKind::Naive, EngineKind::Accel, EngineKind::Indexed]
    }
}

impl std::str::FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "naive" => Ok(EngineKind::Naive),
            "accel" => Ok(EngineKind::Accel),
            "indexed" => Ok(EngineKind::Indexed),
            other => Err(format!("unknown engine '{other}' (expected naive|accel|indexed)")),
        }
    }
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn conv_forward<T: Scalar>(
    engine: EngineKind,
    input: &CapsuleTensor<T>,
    kernel: &ConvKernel<T>,
    cfg: ConvConfig,
    ctx: &ExecContext,
) -> Result<CapsuleTensor<T>> {
    match engine {
        EngineKind::Naive => naive_forward(input, kernel, cfg),
        EngineKind::Accel => accel_forward(input, kernel, cfg, ctx),
        EngineKind::Indexed => {
            let table = build_index_table(input, kernel, cfg)?;
            indexed_forward(input, kernel, &table, ctx)
        }
    }
}

/// The index-table scheme is forward-only; its backward pass reuses the
/// staged lowering.
pub fn conv_backward<T: Scalar>(
    engine: EngineKind,
    input: &CapsuleTensor<T>,
    kernel: &ConvKernel<T>,
    d_out: &CapsuleTensor<T>,
    cfg: ConvConfig,
    ctx: &ExecContext,
) -> Result<(CapsuleTensor<T>, ConvKernel<T>)> {
    match engine {
        EngineKind::Naive => naive_backward(input, kernel, d_out, cfg),
        EngineKind::Accel | EngineKind::Indexed => {
            accel_backward(input, kernel, d_out, cfg, ctx)
        }
    }
}
