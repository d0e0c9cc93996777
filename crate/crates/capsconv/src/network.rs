//! A sequential stack of capsule-convolution layers with end-to-end
//! forward/backward. No inter-layer nonlinearity: the stack measures the
//! convolution kernels themselves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{conv_backward, conv_forward, EngineKind};
use crate::error::{CapsError, Result};
use crate::exec::ExecContext;
use crate::indexed::{index_table_for, indexed_forward, IndexTable};
use crate::tensor::{
    output_dims, CapsuleTensor, ConvConfig, ConvGeometry, ConvKernel, PoseDims, Scalar,
};

#[derive(Clone, Copy, Debug)]
pub struct LayerSpec {
    pub k_h: usize,
    pub k_w: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Kernel pose (S, K, N).
    pub kernel_pose: PoseDims,
    pub cfg: ConvConfig,
    pub engine: EngineKind,
}

#[derive(Clone, Copy, Debug)]
pub struct InputSpec {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Input pose (S, M, K).
    pub pose: PoseDims,
}

#[derive(Clone, Debug)]
pub struct NetworkConfig {
    pub input: InputSpec,
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
}

impl NetworkConfig {
    /// Chain shape-check: runs before any parameter allocation.
    pub fn validate(&self) -> Result<()> {
        self.output_shape().map(|_| ())
    }

    /// Folds the shape law over all layers.
    pub fn output_shape(&self) -> Result<(usize, usize, usize, usize, PoseDims)> {
        if self.layers.is_empty() {
            return Err(CapsError::shape("network has no layers"));
        }
        let mut channels = self.input.channels;
        let mut h = self.input.height;
        let mut w = self.input.width;
        let mut pose = self.input.pose;
        for (idx, layer) in self.layers.iter().enumerate() {
            if layer.in_channels != channels {
                return Err(CapsError::shape(format!(
                    "layer {idx}: in_channels {} != upstream channels {channels}",
                    layer.in_channels
                )));
            }
            if layer.kernel_pose.slices != pose.slices {
                return Err(CapsError::shape(format!(
                    "layer {idx}: kernel slices {} != upstream slices {}",
                    layer.kernel_pose.slices, pose.slices
                )));
            }
            if layer.kernel_pose.rows != pose.cols {
                return Err(CapsError::shape(format!(
                    "layer {idx}: kernel pose rows {} != upstream pose cols {}",
                    layer.kernel_pose.rows, pose.cols
                )));
            }
            let (oh, ow) = output_dims(h, w, layer.k_h, layer.k_w, layer.cfg)
                .map_err(|e| CapsError::shape(format!("layer {idx}: {e}")))?;
            h = oh;
            w = ow;
            channels = layer.out_channels;
            pose = PoseDims { slices: pose.slices, rows: pose.rows, cols: layer.kernel_pose.cols };
        }
        Ok((self.input.batch, channels, h, w, pose))
    }
}

/// Deterministic kernel initialization: uniform in [-0.5, 0.5] scaled by
/// 1/sqrt(k_h * k_w * C * K).
pub fn init_parameters<T: Scalar>(config: &NetworkConfig, seed: u64) -> Result<Vec<ConvKernel<T>>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    config
        .layers
        .iter()
        .map(|layer| {
            let fan_in = layer.k_h * layer.k_w * layer.in_channels * layer.kernel_pose.rows;
            let scale = 1.0 / (fan_in as f64).sqrt();
            let len = layer.out_channels
                * layer.in_channels
                * layer.k_h
                * layer.k_w
                * layer.kernel_pose.len();
            let data: Vec<T> = (0..len)
                .map(|_| {
                    let v: f64 = rng.random_range(-0.5..0.5) * scale;
                    T::from_f64(v).expect("scalar conversion")
                })
                .collect();
            ConvKernel::new(
                layer.out_channels,
                layer.in_channels,
                layer.k_h,
                layer.k_w,
                layer.kernel_pose,
                data,
            )
        })
        .collect()
}

/// Per-layer inputs retained by a forward pass for the backward traversal.
pub struct Tape<T: Scalar> {
    layer_inputs: Vec<CapsuleTensor<T>>,
    output_shape: (usize, usize, usize, usize, PoseDims),
}

pub struct Network<T: Scalar> {
    config: NetworkConfig,
    kernels: Vec<ConvKernel<T>>,
    /// Per-layer index tables, precomputed for layers on the indexed engine.
    tables: Vec<Option<IndexTable>>,
}

/// Folds the shape law to one [`ConvGeometry`] per layer.
fn layer_geometries(config: &NetworkConfig) -> Result<Vec<ConvGeometry>> {
    let mut geoms = Vec::with_capacity(config.layers.len());
    let mut channels = config.input.channels;
    let mut h = config.input.height;
    let mut w = config.input.width;
    let mut pose = config.input.pose;
    for layer in &config.layers {
        let g = ConvGeometry::from_parts(
            config.input.batch,
            channels,
            layer.out_channels,
            h,
            w,
            layer.k_h,
            layer.k_w,
            pose,
            layer.kernel_pose,
            layer.cfg,
        )?;
        channels = g.out_channels;
        h = g.out_h;
        w = g.out_w;
        pose = g.out_pose();
        geoms.push(g);
    }
    Ok(geoms)
}

fn build_tables(config: &NetworkConfig) -> Result<Vec<Option<IndexTable>>> {
    let geoms = layer_geometries(config)?;
    Ok(config
        .layers
        .iter()
        .zip(geoms)
        .map(|(layer, g)| (layer.engine == EngineKind::Indexed).then(|| index_table_for(g)))
        .collect())
}

impl<T: Scalar> Network<T> {
    /// Validates the chain and initializes parameters from `config.seed`.
    pub fn init(config: NetworkConfig) -> Result<Self> {
        let kernels = init_parameters(&config, config.seed)?;
        let tables = build_tables(&config)?;
        Ok(Network { config, kernels, tables })
    }

    pub fn with_kernels(config: NetworkConfig, kernels: Vec<ConvKernel<T>>) -> Result<Self> {
        config.validate()?;
        if kernels.len() != config.layers.len() {
            return Err(CapsError::shape(format!(
                "{} kernels for {} layers",
                kernels.len(),
                config.layers.len()
            )));
        }
        let tables = build_tables(&config)?;
        Ok(Network { config, kernels, tables })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn kernels(&self) -> &[ConvKernel<T>] {
        &self.kernels
    }

    pub fn kernels_mut(&mut self) -> &mut Vec<ConvKernel<T>> {
        &mut self.kernels
    }

    pub fn forward(
        &self,
        x: &CapsuleTensor<T>,
        ctx: &ExecContext,
    ) -> Result<(CapsuleTensor<T>, Tape<T>)> {
        let spec = &self.config.input;
        let expect = (spec.batch, spec.channels, spec.height, spec.width, spec.pose);
        if x.shape() != expect {
            return Err(CapsError::shape(format!(
                "network input is {:?}, expected {:?}",
                x.shape(),
                expect
            )));
        }
        let mut layer_inputs = Vec::with_capacity(self.config.layers.len());
        let mut current = x.clone();
        for (idx, (layer, kernel)) in self.config.layers.iter().zip(&self.kernels).enumerate() {
            let next = match &self.tables[idx] {
                Some(table) => indexed_forward(&current, kernel, table, ctx)?,
                None => conv_forward(layer.engine, &current, kernel, layer.cfg, ctx)?,
            };
            layer_inputs.push(std::mem::replace(&mut current, next));
        }
        let tape = Tape { layer_inputs, output_shape: current.shape() };
        Ok((current, tape))
    }

    /// Reverse traversal; returns the input gradient and per-layer kernel
    /// gradients in layer order.
    pub fn backward(
        &self,
        tape: &Tape<T>,
        d_out: &CapsuleTensor<T>,
        ctx: &ExecContext,
    ) -> Result<(CapsuleTensor<T>, Vec<ConvKernel<T>>)> {
        if tape.layer_inputs.len() != self.config.layers.len() {
            return Err(CapsError::TapeMismatch(format!(
                "tape has {} layer inputs, network has {} layers",
                tape.layer_inputs.len(),
                self.config.layers.len()
            )));
        }
        if d_out.shape() != tape.output_shape {
            return Err(CapsError::TapeMismatch(format!(
                "upstream gradient is {:?}, forward output was {:?}",
                d_out.shape(),
                tape.output_shape
            )));
        }
        let mut d_kernels = vec![None; self.config.layers.len()];
        let mut grad = d_out.clone();
        for idx in (0..self.config.layers.len()).rev() {
            let layer = &self.config.layers[idx];
            let (d_in, d_k) = conv_backward(
                layer.engine,
                &tape.layer_inputs[idx],
                &self.kernels[idx],
                &grad,
                layer.cfg,
                ctx,
            )?;
            d_kernels[idx] = Some(d_k);
            grad = d_in;
        }
        Ok((grad, d_kernels.into_iter().map(|k| k.unwrap()).collect()))
    }
}

/// The default 5-layer desk-scale benchmark stack: input (B=8, C=1, 20x20,
/// 4x4 poses), 3x3 kernels, channels 1 -> 4 -> 8 -> 8 -> 8 -> 8.
pub fn default_benchmark_config(engine: EngineKind, seed: u64) -> NetworkConfig {
    let pose = PoseDims { slices: 1, rows: 4, cols: 4 };
    let cfg = ConvConfig { stride: 1, padding: 0 };
    let channels = [1usize, 4, 8, 8, 8, 8];
    let layers = (0..5)
        .map(|i| LayerSpec {
            k_h: 3,
            k_w: 3,
            in_channels: channels[i],
            out_channels: channels[i + 1],
            kernel_pose: pose,
            cfg,
            engine,
        })
        .collect();
    NetworkConfig {
        input: InputSpec { batch: 8, channels: 1, height: 20, width: 20, pose },
        layers,
        seed,
    }
}
