//! Per-run metrics tables.
//!
//! One CSV row per outer iteration. Floats print in the shortest decimal
//! form that round-trips, so rewriting a parsed table is lossless; the
//! `relative_gap` column is empty when no optimality reference was supplied.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Result, SlevelError};
use crate::levelset::LevelTrace;

/// The exact header line of every metrics table.
pub const METRICS_HEADER: &str =
    "outer_iter,grad_iters,data_passes,r,u_hat,objective,max_violation,relative_gap,wall_ms";

/// Write one trace as CSV. Rejects empty traces and traces whose counters
/// fail to increase strictly across rows (each outer iteration must consume
/// oracle iterations and data).
pub fn write_metrics_csv<W: Write>(trace: &LevelTrace, out: &mut W) -> Result<()> {
    if trace.entries.is_empty() {
        return Err(SlevelError::InvalidArgument(
            "cannot write a metrics table for an empty trace".into(),
        ));
    }
    for pair in trace.entries.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.outer_iter <= a.outer_iter || b.grad_iters <= a.grad_iters || b.data_passes <= a.data_passes
        {
            return Err(SlevelError::Invariant(format!(
                "trace counters must strictly increase: outer iteration {} does not advance on {}",
                b.outer_iter, a.outer_iter
            )));
        }
    }

    writeln!(out, "{METRICS_HEADER}")?;
    for e in &trace.entries {
        let gap = match e.metrics.relative_gap {
            Some(g) => g.to_string(),
            None => String::new(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            e.outer_iter,
            e.grad_iters,
            e.data_passes,
            e.r,
            e.u_hat,
            e.metrics.objective,
            e.metrics.max_violation,
            gap,
            e.wall_ms,
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Write one trace as CSV to a file path.
pub fn write_metrics_csv_file(trace: &LevelTrace, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_metrics_csv(trace, &mut out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{StopReason, TraceEntry};
    use crate::problem::QualityMetrics;

    fn entry(k: usize, gap: Option<f64>) -> TraceEntry {
        TraceEntry {
            outer_iter: k,
            r: 2.0 - 0.25 * k as f64,
            u_hat: -0.5 / (k + 1) as f64,
            delta_k: 0.05,
            x: vec![1.0],
            metrics: QualityMetrics {
                objective: 1.5 - 0.25 * k as f64,
                max_violation: -0.1,
                relative_gap: gap,
                saa_samples: None,
            },
            grad_iters: 100 * (k as u64 + 1),
            data_passes: 3.5 * (k + 1) as f64,
            wall_ms: 12.5 * (k + 1) as f64,
        }
    }

    fn trace(entries: Vec<TraceEntry>) -> LevelTrace {
        LevelTrace { entries, stop: StopReason::OuterLimit, warnings: Vec::new() }
    }

    #[test]
    fn writes_the_expected_rows() {
        let t = trace(vec![entry(0, Some(0.5)), entry(1, None)]);
        let mut buf = Vec::new();
        write_metrics_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines[1], "0,100,3.5,2,-0.5,1.5,-0.1,0.5,12.5");
        // The missing reference leaves the relative_gap field empty.
        assert_eq!(lines[2], "1,200,7,1.75,-0.25,1.25,-0.1,,25");
    }

    #[test]
    fn floats_round_trip_through_the_text() {
        let mut e = entry(0, Some(1.0 / 3.0));
        e.r = 0.1 + 0.2; // 0.30000000000000004 — must not be shortened to 0.3
        let t = trace(vec![e]);
        let mut buf = Vec::new();
        write_metrics_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[3].parse::<f64>().unwrap().to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(row[7].parse::<f64>().unwrap().to_bits(), (1.0f64 / 3.0).to_bits());
    }

    #[test]
    fn empty_traces_are_rejected() {
        let t = trace(Vec::new());
        let mut buf = Vec::new();
        assert!(matches!(
            write_metrics_csv(&t, &mut buf),
            Err(SlevelError::InvalidArgument(_))
        ));
    }

    #[test]
    fn stalled_counters_are_an_invariant_violation() {
        let mut second = entry(1, None);
        second.grad_iters = 100; // same as entry 0: no oracle work recorded
        let t = trace(vec![entry(0, None), second]);
        let mut buf = Vec::new();
        assert!(matches!(
            write_metrics_csv(&t, &mut buf),
            Err(SlevelError::Invariant(_))
        ));
    }

    #[test]
    fn unwritable_paths_surface_io_errors() {
        let t = trace(vec![entry(0, None)]);
        let err = write_metrics_csv_file(&t, "/nonexistent-dir/metrics.csv").unwrap_err();
        assert!(matches!(err, SlevelError::Io(_)));
    }
}
