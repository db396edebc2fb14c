use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::run::run_scenario;
use crate::metrics::RunSummary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cca: String,
    pub stddev: f64,
    pub seed: u64,
    /// Aggregate over all flows, bits per second.
    pub goodput: f64,
    pub mean_rtt: f64,
    pub extra_latency_fraction: f64,
    /// Delivery-rate percentiles of the first flow, bits per second.
    pub p90: f64,
    pub p99: f64,
    pub wmax_p90: f64,
    pub wmax_p99: f64,
}

impl SweepRow {
    fn from_summary(cca: &str, summary: &RunSummary) -> Self {
        let rates = summary.flows.first().and_then(|f| f.delivery_rate).unwrap_or_default();
        SweepRow {
            cca: cca.to_string(),
            stddev: summary.delay_stddev_ms,
            seed: summary.seed,
            goodput: summary.aggregate_goodput_bps,
            mean_rtt: summary.mean_rtt_s,
            extra_latency_fraction: summary.extra_latency_fraction,
            p90: rates.p90,
            p99: rates.p99,
            wmax_p90: rates.wmax_p90,
            wmax_p99: rates.wmax_p99,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub cca: String,
    pub stddev: f64,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

/// `base` with every flow switched to `cca` and the given jitter and seed.
pub fn sweep_point(base: &ScenarioConfig, cca: &str, stddev: f64, seed: u64) -> ScenarioConfig {
    let mut config = base.clone();
    config.delay_stddev_ms = stddev;
    config.seed = seed;
    for flow in &mut config.flows {
        flow.cca = cca.to_string();
    }
    config
}

fn run_point(base: &ScenarioConfig, cca: &str, stddev: f64, seed: u64) -> Result<SweepRow, SweepFailure> {
    let config = sweep_point(base, cca, stddev, seed);
    let fail = |error: String| SweepFailure {
        cca: cca.to_string(),
        stddev,
        seed,
        error,
    };
    match catch_unwind(AssertUnwindSafe(|| run_scenario(&config))) {
        Ok(Ok(out)) => Ok(SweepRow::from_summary(cca, &out.summary)),
        Ok(Err(e)) => Err(fail(e.to_string())),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "run panicked".to_string());
            Err(fail(msg))
        }
    }
}

/// One run per `(stddev, cca, seed)`; failed runs are recorded and skipped.
/// Rows come back sorted by `(cca, stddev, seed)` regardless of execution order.
pub fn run_sweep(base: &ScenarioConfig, stddevs: &[f64], ccas: &[String], seeds: &[u64]) -> SweepResult {
    let points: Vec<(String, f64, u64)> = ccas
        .iter()
        .flat_map(|c| {
            stddevs
                .iter()
                .flat_map(move |&sd| seeds.iter().map(move |&seed| (c.clone(), sd, seed)))
        })
        .collect();

    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|(c, sd, seed)| run_point(base, c, *sd, *seed))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = points
        .iter()
        .map(|(c, sd, seed)| run_point(base, c, *sd, *seed))
        .collect();

    let mut out = SweepResult::default();
    for r in results {
        match r {
            Ok(row) => out.rows.push(row),
            Err(f) => out.failures.push(f),
        }
    }
    let key = |cca: &str, sd: f64, seed: u64| (cca.to_string(), sd.to_bits(), seed);
    out.rows.sort_by(|a, b| {
        a.cca
            .cmp(&b.cca)
            .then(a.stddev.total_cmp(&b.stddev))
            .then(a.seed.cmp(&b.seed))
    });
    out.failures
        .sort_by_key(|f| key(&f.cca, f.stddev, f.seed));
    out
}
