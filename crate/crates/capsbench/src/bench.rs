//! Timed forward/backward runs over the configured network. The naive engine
//! is always measured as the speedup baseline.

use std::time::Instant;

use capsconv::network::Network;
use capsconv::{AccumMode, CapsuleTensor, EngineKind, ExecContext, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{to_network, BenchConfig};
use crate::report::{BenchMeta, BenchReport, BenchRow};

fn random_input<T: Scalar>(cfg: &BenchConfig) -> CapsuleTensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x1000));
    let len = cfg.batch * cfg.in_channels * cfg.height * cfg.width * cfg.input_pose.len();
    let data: Vec<T> = (0..len)
        .map(|_| T::from_f64(rng.random_range(-1.0..1.0)).unwrap())
        .collect();
    CapsuleTensor::new(cfg.batch, cfg.in_channels, cfg.height, cfg.width, cfg.input_pose, data)
        .expect("bench input")
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

/// Median forward and backward wall time for one engine, in milliseconds.
fn time_engine<T: Scalar>(
    cfg: &BenchConfig,
    engine: EngineKind,
) -> capsconv::Result<(f64, f64)> {
    let net: Network<T> = Network::init(to_network(cfg, engine))?;
    let x = random_input::<T>(cfg);
    // The naive baseline is single-threaded by definition.
    let workers = if engine == EngineKind::Naive { 1 } else { cfg.workers };
    let ctx = ExecContext::new(AccumMode::Optimized, workers);

    for _ in 0..cfg.warmup {
        let (out, tape) = net.forward(&x, &ctx)?;
        net.backward(&tape, &out, &ctx)?;
    }
    let mut fwd = Vec::with_capacity(cfg.reps);
    let mut bwd = Vec::with_capacity(cfg.reps);
    for _ in 0..cfg.reps {
        let t0 = Instant::now();
        let (out, tape) = net.forward(&x, &ctx)?;
        fwd.push(t0.elapsed().as_secs_f64() * 1e3);
        let t1 = Instant::now();
        net.backward(&tape, &out, &ctx)?;
        bwd.push(t1.elapsed().as_secs_f64() * 1e3);
    }
    Ok((median(fwd), median(bwd)))
}

/// Runs the benchmark for `engines`, always timing naive for the baseline.
pub fn run_bench<T: Scalar>(
    cfg: &BenchConfig,
    engines: &[EngineKind],
) -> capsconv::Result<BenchReport> {
    let (nf, nb) = time_engine::<T>(cfg, EngineKind::Naive)?;
    let naive_total = nf + nb;
    let mut rows = Vec::new();
    for &engine in engines {
        let (f, b) = if engine == EngineKind::Naive {
            (nf, nb)
        } else {
            time_engine::<T>(cfg, engine)?
        };
        rows.push(BenchRow {
            engine: engine.name().to_string(),
            total_ms: f + b,
            forward_ms: f,
            backward_ms: b,
            speedup: naive_total / (f + b),
        });
    }
    let meta = BenchMeta {
        scalar: format!("{:?}", cfg.scalar).to_lowercase(),
        workers: cfg.workers,
        reps: cfg.reps,
        warmup: cfg.warmup,
        seed: cfg.seed,
    };
    Ok(BenchReport { meta, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn tiny_bench_produces_rows() {
        let cfg = parse_config(
            "reps = 3\nwarmup = 1\nworkers = 2\n\
             [input]\nbatch = 1\nchannels = 1\nheight = 5\nwidth = 5\npose = 1x2x2\n\
             [layer.1]\nk = 2\nstride = 1\nin_ch = 1\nout_ch = 2\npose = 1x2x2\n",
        )
        .unwrap();
        let report =
            run_bench::<f64>(&cfg, &[EngineKind::Naive, EngineKind::Accel, EngineKind::Indexed])
                .unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.rows[0].engine, "naive");
        assert_eq!(report.meta.to_string(), "scalar=f64 workers=2 reps=3 warmup=1 seed=42");
        assert!((report.rows[0].speedup - 1.0).abs() < 1e-12);
        for row in &report.rows {
            assert!(row.total_ms >= 0.0);
            assert!((row.total_ms - (row.forward_ms + row.backward_ms)).abs() < 1e-9);
        }
    }
}
