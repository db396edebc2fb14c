//! Browser bindings: sample the delay process and run short scenarios.

use std::time::Duration;

use padsim::net::{DelayConfig, DelayProcess};
use padsim::scenario::{run_scenario, ScenarioConfig};
use padsim::sim::{RngStream, SimTime};
use serde_json::json;
use wasm_bindgen::prelude::*;

const TRACE_STEP_MS: u64 = 10;

/// Forward one-way delay in milliseconds every 10 ms, around a 80 ms mean.
pub fn forward_delay_ms(stddev_ms: f64, seed: u64, seconds: f64) -> Vec<f64> {
    let config = DelayConfig::gaussian(Duration::from_millis(80), Duration::from_secs_f64(stddev_ms.max(0.0) / 1e3));
    let mut process = DelayProcess::new(config, RngStream::new(seed, "forward"));
    let steps = (seconds.max(0.0) * 1e3) as u64 / TRACE_STEP_MS;
    (0..=steps)
        .map(|i| process.sample(SimTime::from_millis(i * TRACE_STEP_MS)).as_secs_f64() * 1e3)
        .collect()
}

/// Runs one single-flow scenario and returns its summary plus 100 ms series as JSON.
pub fn run_json(cca: &str, stddev_ms: f64, seed: u64, seconds: f64) -> Result<String, String> {
    let mut config = ScenarioConfig::single(cca, stddev_ms, seed);
    config.duration_s = seconds;
    config.warmup_s = (seconds / 6.0).min(5.0);
    let out = run_scenario(&config).map_err(|e| e.to_string())?;

    let mut time_s = Vec::new();
    let mut pacing_mbps = Vec::new();
    let mut queue_packets = Vec::new();
    for row in &out.log {
        match row.metric {
            "queue_packets" => {
                time_s.push(row.time_s);
                queue_packets.push(row.value);
            }
            "pacing_bps" => pacing_mbps.push(row.value / 1e6),
            _ => {}
        }
    }
    let s = &out.summary;
    let rates = s.flows.first().and_then(|f| f.delivery_rate).unwrap_or_default();
    let doc = json!({
        "cca": cca,
        "goodput_mbps": s.aggregate_goodput_bps / 1e6,
        "mean_rtt_ms": s.mean_rtt_s * 1e3,
        "extra_latency": s.extra_latency_fraction,
        "drops": s.queue_drops,
        "rate_p99_mbps": rates.p99 / 1e6,
        "rate_wmax_p99_mbps": rates.wmax_p99 / 1e6,
        "series": {
            "time_s": time_s,
            "pacing_mbps": pacing_mbps,
            "queue_packets": queue_packets,
        },
    });
    Ok(doc.to_string())
}

#[wasm_bindgen]
pub fn delay_trace(stddev_ms: f64, seed: u32, seconds: f64) -> Vec<f64> {
    forward_delay_ms(stddev_ms, seed as u64, seconds)
}

#[wasm_bindgen]
pub fn run(cca: &str, stddev_ms: f64, seed: u32, seconds: f64) -> Result<String, JsValue> {
    run_json(cca, stddev_ms, seed as u64, seconds).map_err(|e| JsValue::from_str(&e))
}
