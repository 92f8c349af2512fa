//! Trace merging and output files.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use tvrestore::{Psnr, SolverTrace};

/// First line of every CSV this tool writes.
pub const CSV_VERSION: &str = "# tvrestore-trace v1";

/// Whole-image view of one iteration: objective summed over patches, PSNR
/// and SSIM averaged over patches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub psnr: Psnr,
    pub ssim: f64,
}

/// Combine per-patch traces. Exact per-patch PSNRs are left out of the mean;
/// the row is exact only when every patch is.
pub fn merge_traces(traces: &[SolverTrace]) -> Vec<TraceRow> {
    let k = traces.first().map_or(0, |t| t.len());
    (0..k)
        .map(|i| {
            let objective = traces.iter().map(|t| t.objective[i]).sum();
            let finite: Vec<f64> =
                traces.iter().filter_map(|t| t.psnr.as_ref().and_then(|p| p[i].db())).collect();
            let psnr = if finite.is_empty() {
                Psnr::Exact
            } else {
                Psnr::Db(finite.iter().sum::<f64>() / finite.len() as f64)
            };
            let ssim = traces.iter().filter_map(|t| t.ssim.as_ref().map(|s| s[i])).sum::<f64>() / traces.len() as f64;
            TraceRow { iteration: i + 1, objective, psnr, ssim }
        })
        .collect()
}

/// CSV writer that starts with the version comment.
pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let mut file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "{CSV_VERSION}")?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn fmt_psnr(p: Psnr) -> String {
    match p {
        Psnr::Exact => "exact".into(),
        Psnr::Db(v) => v.to_string(),
    }
}
