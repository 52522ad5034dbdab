//! CSV trace files: `#` comment lines, then a fixed header and one row per
//! outer iteration. Fields a solver does not produce are left empty.

use std::io::{self, Write};

use mpg_core::TraceRecord;

pub const TRACE_HEADER: &str = "iter,se,objective,lagrangian,min_w,identity_residual,constraint_residual,snr,seconds";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trace<W: Write>(mut out: W, comments: &[String], trace: &[TraceRecord]) -> io::Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    writeln!(out, "{TRACE_HEADER}")?;
    for r in trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            r.se,
            r.objective,
            opt(r.lagrangian),
            opt(r.min_w),
            opt(r.identity_residual),
            r.constraint_residual,
            opt(r.snr),
            r.elapsed_seconds
        )?;
    }
    out.flush()
}
