use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::run::{LogRow, RunOutput};
use super::sweep::{SweepFailure, SweepResult, SweepRow};
use crate::error::Error;
use crate::metrics::RunSummary;

pub const SUMMARY_FILE: &str = "summary.json";
pub const LOG_FILE: &str = "log.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const FAILURES_FILE: &str = "sweep_failures.csv";

pub const LOG_HEADER: &str = "time_s,flow_id,metric,value";
pub const SWEEP_HEADER: &str =
    "cca,stddev,seed,goodput,mean_rtt,extra_latency_fraction,p90,p99,wmax_p90,wmax_p99";

fn write(path: PathBuf, contents: &str) -> Result<(), Error> {
    fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })
}

pub fn summary_json(summary: &RunSummary) -> Result<String, Error> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    Ok(text)
}

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 32 + 32);
    out.push_str(LOG_HEADER);
    out.push('\n');
    for r in rows {
        let flow = r.flow_id.map(|f| f.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{:.9},{},{},{}", r.time_s, flow, r.metric, r.value);
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.cca,
            r.stddev,
            r.seed,
            r.goodput,
            r.mean_rtt,
            r.extra_latency_fraction,
            r.p90,
            r.p99,
            r.wmax_p90,
            r.wmax_p99
        );
    }
    out
}

fn failures_csv(failures: &[SweepFailure]) -> String {
    let mut out = String::from("cca,stddev,seed,error\n");
    for f in failures {
        let error = f.error.replace('"', "\"\"");
        let _ = writeln!(out, "{},{},{},\"{}\"", f.cca, f.stddev, f.seed, error);
    }
    out
}

/// Writes `summary.json` and `log.csv` into `dir`.
pub fn write_run(dir: &Path, output: &RunOutput) -> Result<(), Error> {
    let json = summary_json(&output.summary)?;
    ensure_dir(dir)?;
    write(dir.join(SUMMARY_FILE), &json)?;
    write(dir.join(LOG_FILE), &log_csv(&output.log))
}

/// Writes `sweep.csv`, plus `sweep_failures.csv` when some runs failed.
pub fn write_sweep(dir: &Path, result: &SweepResult) -> Result<(), Error> {
    ensure_dir(dir)?;
    write(dir.join(SWEEP_FILE), &sweep_csv(&result.rows))?;
    if !result.failures.is_empty() {
        write(dir.join(FAILURES_FILE), &failures_csv(&result.failures))?;
    }
    Ok(())
}
