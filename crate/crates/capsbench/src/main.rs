//! Correctness-check and benchmark CLI for the capsconv engines.
//!
//! Exit codes: 0 success, 1 check failure, 2 config/usage error, 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use capsbench::config::{self, BenchConfig};
use capsbench::{bench, check, report, DEFAULT_CONFIG};
use capsconv::{EngineKind, ScalarKind};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "capsbench", about = "Capsule-convolution correctness checks and benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonOpts {
    /// Config file; the built-in default config is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for the parallel engines.
    #[arg(long)]
    workers: Option<usize>,
    /// Element type: f32 or f64.
    #[arg(long)]
    scalar: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every verification suite; exits nonzero on any failure.
    Check {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Time forward/backward per engine and report speedups over naive.
    Bench {
        #[command(flatten)]
        common: CommonOpts,
        /// Engine to benchmark: naive, accel, indexed, or all.
        #[arg(long, default_value = "all")]
        engine: String,
        /// Write results as CSV to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Timed repetitions per engine (median is reported).
        #[arg(long)]
        reps: Option<usize>,
    },
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("capsbench: {msg}");
    ExitCode::from(2)
}

fn io_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("capsbench: {msg}");
    ExitCode::from(3)
}

fn load_config(common: &CommonOpts) -> Result<BenchConfig, ExitCode> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| io_error(format!("cannot read {}: {e}", path.display())))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut cfg = config::parse_config(&text).map_err(config_error)?;
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(config_error("--workers must be >= 1"));
        }
        cfg.workers = w;
    }
    if let Some(s) = &common.scalar {
        cfg.scalar = match s.as_str() {
            "f32" => ScalarKind::F32,
            "f64" => ScalarKind::F64,
            other => return Err(config_error(format!("--scalar must be f32 or f64, got '{other}'"))),
        };
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn parse_engines(spec: &str) -> Result<Vec<EngineKind>, ExitCode> {
    if spec == "all" {
        return Ok(EngineKind::all().to_vec());
    }
    spec.parse::<EngineKind>()
        .map(|e| vec![e])
        .map_err(|_| config_error(format!("--engine must be naive, accel, indexed, or all, got '{spec}'")))
}

fn run_check_cmd(common: CommonOpts) -> ExitCode {
    let cfg = match load_config(&common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if check::run_check(&cfg) {
        println!("all checks passed");
        ExitCode::SUCCESS
    } else {
        println!("check failed");
        ExitCode::from(1)
    }
}

fn run_bench_cmd(
    common: CommonOpts,
    engine: String,
    csv: Option<PathBuf>,
    reps: Option<usize>,
) -> ExitCode {
    let mut cfg = match load_config(&common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(r) = reps {
        if r < 3 {
            return config_error("--reps must be >= 3");
        }
        cfg.reps = r;
    }
    let engines = match parse_engines(&engine) {
        Ok(e) => e,
        Err(code) => return code,
    };
    let result = match cfg.scalar {
        ScalarKind::F32 => bench::run_bench::<f32>(&cfg, &engines),
        ScalarKind::F64 => bench::run_bench::<f64>(&cfg, &engines),
    };
    let report = match result {
        Ok(r) => r,
        Err(e) => return config_error(format!("benchmark failed: {e}")),
    };
    println!("{}", report.meta);
    print!("{}", report::csv_string(&report));
    if let Some(path) = csv {
        if let Err(e) = report::emit_csv(&report, &path) {
            return io_error(format!("cannot write {}: {e}", path.display()));
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Check { common } => run_check_cmd(common),
        Cmd::Bench { common, engine, csv, reps } => run_bench_cmd(common, engine, csv, reps),
    }
}
