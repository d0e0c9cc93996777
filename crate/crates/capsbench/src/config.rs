//! Flat key=value config files with `[input]` and `[layer.N]` sections.

use capsconv::network::{InputSpec, LayerSpec, NetworkConfig};
use capsconv::{ConvConfig, EngineKind, PoseDims, ScalarKind};

#[derive(Debug, thiserror::Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

#[derive(Clone, Debug)]
pub struct LayerCfg {
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    /// Kernel pose (S, K, N).
    pub pose: PoseDims,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub scalar: ScalarKind,
    pub seed: u64,
    pub workers: usize,
    pub reps: usize,
    pub warmup: usize,
    /// Overrides every suite tolerance when present.
    pub tolerance: Option<f64>,
    pub check_instances: usize,
    pub batch: usize,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    /// Input pose (S, M, K).
    pub input_pose: PoseDims,
    pub layers: Vec<LayerCfg>,
}

fn parse_pose(value: &str, line: usize) -> Result<PoseDims, ConfigError> {
    let parts: Vec<&str> = value.split('x').collect();
    if parts.len() != 3 {
        return Err(ConfigError(format!(
            "line {line}: pose must be SxMxK (e.g. 1x4x4), got '{value}'"
        )));
    }
    let dims: Vec<usize> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| ConfigError(format!("line {line}: bad pose component '{p}'")))
        })
        .collect::<Result<_, _>>()?;
    PoseDims::new(dims[0], dims[1], dims[2])
        .map_err(|e| ConfigError(format!("line {line}: {e}")))
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError(format!("line {line}: invalid value '{value}' for '{key}'")))
}

pub fn parse_config(text: &str) -> Result<BenchConfig, ConfigError> {
    let mut cfg = BenchConfig {
        scalar: ScalarKind::F64,
        seed: 42,
        workers: 4,
        reps: 5,
        warmup: 1,
        tolerance: None,
        check_instances: 100,
        batch: 1,
        in_channels: 1,
        height: 0,
        width: 0,
        input_pose: PoseDims { slices: 1, rows: 1, cols: 1 },
        layers: Vec::new(),
    };
    let mut section = String::new();
    let mut layer_ids: Vec<usize> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            if !content.ends_with(']') {
                return Err(ConfigError(format!("line {line}: unterminated section header")));
            }
            section = content[1..content.len() - 1].trim().to_string();
            if let Some(id) = section.strip_prefix("layer.") {
                let id: usize = id
                    .parse()
                    .map_err(|_| ConfigError(format!("line {line}: bad layer id '{id}'")))?;
                if id != layer_ids.len() + 1 {
                    return Err(ConfigError(format!(
                        "line {line}: layer sections must be contiguous starting at 1, got {id}"
                    )));
                }
                layer_ids.push(id);
                cfg.layers.push(LayerCfg {
                    k: 1,
                    stride: 1,
                    pad: 0,
                    in_ch: 0,
                    out_ch: 0,
                    pose: PoseDims { slices: 1, rows: 1, cols: 1 },
                });
            } else if section != "input" {
                return Err(ConfigError(format!(
                    "line {line}: unknown section '[{section}]'"
                )));
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError(format!("line {line}: expected 'key = value'")));
        };
        let key = key.trim();
        let value = value.trim();
        match (section.as_str(), key) {
            ("", "scalar") => {
                cfg.scalar = match value {
                    "f32" => ScalarKind::F32,
                    "f64" => ScalarKind::F64,
                    _ => {
                        return Err(ConfigError(format!(
                            "line {line}: scalar must be f32 or f64, got '{value}'"
                        )))
                    }
                }
            }
            ("", "seed") => cfg.seed = parse_num(value, key, line)?,
            ("", "workers") => cfg.workers = parse_num(value, key, line)?,
            ("", "reps") => cfg.reps = parse_num(value, key, line)?,
            ("", "warmup") => cfg.warmup = parse_num(value, key, line)?,
            ("", "tolerance") => cfg.tolerance = Some(parse_num(value, key, line)?),
            ("", "check_instances") => cfg.check_instances = parse_num(value, key, line)?,
            ("input", "batch") => cfg.batch = parse_num(value, key, line)?,
            ("input", "channels") => cfg.in_channels = parse_num(value, key, line)?,
            ("input", "height") => cfg.height = parse_num(value, key, line)?,
            ("input", "width") => cfg.width = parse_num(value, key, line)?,
            ("input", "pose") => cfg.input_pose = parse_pose(value, line)?,
            (s, k) if s.starts_with("layer.") => {
                let layer = cfg.layers.last_mut().expect("layer section pushed above");
                match k {
                    "k" => layer.k = parse_num(value, k, line)?,
                    "stride" => {
                        layer.stride = parse_num(value, k, line)?;
                        if layer.stride == 0 {
                            return Err(ConfigError(format!(
                                "line {line}: field 'stride' in [{s}] must be >= 1"
                            )));
                        }
                    }
                    "pad" => layer.pad = parse_num(value, k, line)?,
                    "in_ch" => layer.in_ch = parse_num(value, k, line)?,
                    "out_ch" => layer.out_ch = parse_num(value, k, line)?,
                    "pose" => layer.pose = parse_pose(value, line)?,
                    other => {
                        return Err(ConfigError(format!(
                            "line {line}: unknown key '{other}' in [{s}]"
                        )))
                    }
                }
            }
            (s, k) => {
                return Err(ConfigError(format!(
                    "line {line}: unknown key '{k}' in section '[{s}]'"
                )))
            }
        }
    }

    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &BenchConfig) -> Result<(), ConfigError> {
    if cfg.layers.is_empty() {
        return Err(ConfigError("no [layer.N] sections defined".to_string()));
    }
    if cfg.height == 0 || cfg.width == 0 {
        return Err(ConfigError("[input] height and width must be set".to_string()));
    }
    if cfg.reps < 3 {
        return Err(ConfigError("field 'reps' must be >= 3".to_string()));
    }
    if cfg.warmup < 1 {
        return Err(ConfigError("field 'warmup' must be >= 1".to_string()));
    }
    for (i, layer) in cfg.layers.iter().enumerate() {
        if layer.k == 0 {
            return Err(ConfigError(format!("field 'k' in [layer.{}] must be >= 1", i + 1)));
        }
        if layer.stride == 0 {
            return Err(ConfigError(format!(
                "field 'stride' in [layer.{}] must be >= 1",
                i + 1
            )));
        }
        if layer.in_ch == 0 || layer.out_ch == 0 {
            return Err(ConfigError(format!(
                "fields 'in_ch'/'out_ch' in [layer.{}] must be >= 1",
                i + 1
            )));
        }
    }
    // Full chain shape-check, reported as a config problem.
    to_network(cfg, EngineKind::Naive)
        .validate()
        .map_err(|e| ConfigError(format!("invalid layer chain: {e}")))
}

pub fn to_network(cfg: &BenchConfig, engine: EngineKind) -> NetworkConfig {
    NetworkConfig {
        input: InputSpec {
            batch: cfg.batch,
            channels: cfg.in_channels,
            height: cfg.height,
            width: cfg.width,
            pose: cfg.input_pose,
        },
        layers: cfg
            .layers
            .iter()
            .map(|l| LayerSpec {
                k_h: l.k,
                k_w: l.k,
                in_channels: l.in_ch,
                out_channels: l.out_ch,
                kernel_pose: l.pose,
                cfg: ConvConfig { stride: l.stride, padding: l.pad },
                engine,
            })
            .collect(),
        seed: cfg.seed,
    }
}
