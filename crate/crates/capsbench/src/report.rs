//! Benchmark result rows and CSV emission.

use std::io::Write;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub engine: String,
    pub total_ms: f64,
    pub forward_ms: f64,
    pub backward_ms: f64,
    /// Naive total time divided by this engine's total time.
    pub speedup: f64,
}

/// Environment metadata carried so a report can be rerun exactly.
#[derive(Clone, Debug, Default)]
pub struct BenchMeta {
    pub scalar: String,
    pub workers: usize,
    pub reps: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl std::fmt::Display for BenchMeta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "scalar={} workers={} reps={} warmup={} seed={}",
            self.scalar, self.workers, self.reps, self.warmup, self.seed
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub meta: BenchMeta,
    pub rows: Vec<BenchRow>,
}

pub const CSV_HEADER: &str = "engine,total_ms,forward_ms,backward_ms,speedup";

/// Byte-stable CSV: fixed header, one row per engine, three decimals,
/// newline-terminated.
pub fn csv_string(report: &BenchReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!(
            "{},{:.3},{:.3},{:.3},{:.3}\n",
            row.engine, row.total_ms, row.forward_ms, row.backward_ms, row.speedup
        ));
    }
    out
}

pub fn emit_csv(report: &BenchReport, path: &std::path::Path) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(csv_string(report).as_bytes())
}

pub fn parse_csv(text: &str) -> Result<BenchReport, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(format!("bad CSV header: {other:?}")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(format!("row {}: expected 5 fields, got {}", i + 1, fields.len()));
        }
        let num = |f: &str| -> Result<f64, String> {
            f.parse().map_err(|_| format!("row {}: bad number '{f}'", i + 1))
        };
        rows.push(BenchRow {
            engine: fields[0].to_string(),
            total_ms: num(fields[1])?,
            forward_ms: num(fields[2])?,
            backward_ms: num(fields[3])?,
            speedup: num(fields[4])?,
        });
    }
    // The CSV carries only the rows; metadata lives on the report.
    Ok(BenchReport { meta: BenchMeta::default(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BenchReport {
        BenchReport {
            meta: BenchMeta {
                scalar: "f64".into(),
                workers: 4,
                reps: 5,
                warmup: 1,
                seed: 42,
            },
            rows: vec![
                BenchRow { engine: "naive".into(), total_ms: 120.5, forward_ms: 80.25, backward_ms: 40.25, speedup: 1.0 },
                BenchRow { engine: "accel".into(), total_ms: 30.125, forward_ms: 20.0, backward_ms: 10.125, speedup: 4.0 },
            ],
        }
    }

    #[test]
    fn csv_round_trips() {
        let report = sample();
        let text = csv_string(&report);
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.ends_with('\n'));
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.rows.len(), 2);
        assert_eq!(parsed.rows[0].engine, "naive");
        assert_eq!(parsed.rows[1].total_ms, 30.125);
        // re-emission is byte-stable
        assert_eq!(csv_string(&parsed), text);
    }

    #[test]
    fn empty_report_is_header_only() {
        let text = csv_string(&BenchReport::default());
        assert_eq!(text, format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&text).unwrap().rows.is_empty());
    }

    #[test]
    fn rejects_bad_header() {
        assert!(parse_csv("nope\n").is_err());
    }
}
