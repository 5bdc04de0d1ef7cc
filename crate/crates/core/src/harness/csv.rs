//! Trajectory CSV emission. The schema is fixed: downstream tooling keys on
//! the exact header, and rows are deterministic for a fixed seed except for
//! the wall-clock column.

use crate::solver::IterationRecord;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

pub const CSV_HEADER: &str = "iter,fval,grad_norm,r_k,lambda_k,trace_G,restart,time_s";

/// The full CSV body for a record list, header included, one row per record,
/// trailing newline.
pub fn csv_string(records: &[IterationRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iter, r.fval, r.grad_norm, r.r_k, r.lambda_k, r.trace_g, r.restart, r.time_s
        )
        .expect("string writes are infallible");
    }
    out
}

pub fn write_csv(path: &Path, records: &[IterationRecord]) -> io::Result<()> {
    fs::write(path, csv_string(records))
}

/// A CSV body with the `time_s` column removed from every row; the
/// determinism contract compares these.
pub fn strip_time_column(csv: &str) -> String {
    let mut out = String::with_capacity(csv.len());
    for line in csv.lines() {
        match line.rfind(',') {
            Some(pos) => out.push_str(&line[..pos]),
            None => out.push_str(line),
        }
        out.push('\n');
    }
    out
}
