use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use conic_split::TraceRecord;

pub const HEADER: [&str; 6] = [
    "iter",
    "primal_res",
    "dual_res",
    "gap",
    "wall_ms",
    "conditioning_event",
];

/// Writes `records` as CSV. With `timing` off `wall_ms` is written as 0 so
/// reruns produce identical files.
pub fn write_trace<W: Write>(out: W, records: &[TraceRecord], timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        let wall = if timing { r.wall_ms } else { 0.0 };
        w.write_record([
            r.iter.to_string(),
            format!("{:e}", r.primal_res),
            format!("{:e}", r.dual_res),
            format!("{:e}", r.gap),
            format!("{wall:.3}"),
            r.conditioning_event.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, records: &[TraceRecord], timing: bool) -> Result<()> {
    let file =
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_trace(file, records, timing)
}
