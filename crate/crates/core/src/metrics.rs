//! Summary statistics over completed runs.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no samples")]
    Empty,
    #[error("percentile {0} outside (0, 100]")]
    BadPercentile(u32),
    #[error("fairness needs at least two flows")]
    TooFewFlows,
}

/// Nearest-rank percentile: the smallest value with at least `p`% of samples at or below it.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    nearest_rank(&sorted, p)
}

fn nearest_rank(sorted: &[f64], p: f64) -> Result<f64, MetricsError> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(MetricsError::BadPercentile(p as u32));
    }
    let rank = (p * sorted.len() as f64 / 100.0).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

pub fn percentiles(samples: &[f64], ps: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    ps.iter().map(|&p| nearest_rank(&sorted, p)).collect()
}

/// Running maximum of `(time_s, value)` samples over a trailing time window.
/// Output `i` is the max over samples `j ≤ i` with `t_j > t_i − window`.
pub fn windowed_max(samples: &[(f64, f64)], window_s: f64) -> Vec<f64> {
    let mut deque: VecDeque<(f64, f64)> = VecDeque::new();
    let mut out = Vec::with_capacity(samples.len());
    for &(t, v) in samples {
        while deque.back().is_some_and(|&(_, b)| b <= v) {
            deque.pop_back();
        }
        deque.push_back((t, v));
        while deque.front().is_some_and(|&(s, _)| s <= t - window_s) {
            deque.pop_front();
        }
        out.push(deque.front().expect("just pushed").1);
    }
    out
}

pub fn windowed_max_percentiles(
    samples: &[(f64, f64)],
    window_s: f64,
    ps: &[f64],
) -> Result<Vec<f64>, MetricsError> {
    percentiles(&windowed_max(samples, window_s), ps)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fairness {
    /// `max / min`; infinite when some flow got nothing.
    pub ratio: f64,
    pub jain: f64,
    pub starvation: bool,
}

pub fn fairness(goodputs: &[f64]) -> Result<Fairness, MetricsError> {
    if goodputs.len() < 2 {
        return Err(MetricsError::TooFewFlows);
    }
    let max = goodputs.iter().copied().fold(f64::MIN, f64::max);
    let min = goodputs.iter().copied().fold(f64::MAX, f64::min);
    let starvation = min <= 0.0;
    let ratio = if starvation { f64::INFINITY } else { max / min };
    let sum: f64 = goodputs.iter().sum();
    let sum_sq: f64 = goodputs.iter().map(|x| x * x).sum();
    let jain = if sum_sq > 0.0 {
        sum * sum / (goodputs.len() as f64 * sum_sq)
    } else {
        0.0
    };
    Ok(Fairness {
        ratio,
        jain,
        starvation,
    })
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Raw and windowed-max delivery-rate percentiles, in bits per second.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RatePercentiles {
    pub p90: f64,
    pub p99: f64,
    pub wmax_p90: f64,
    pub wmax_p99: f64,
    pub samples: usize,
}

impl RatePercentiles {
    pub fn compute(samples: &[(f64, f64)], window_s: f64) -> Option<Self> {
        let raw: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let p = percentiles(&raw, &[90.0, 99.0]).ok()?;
        let w = windowed_max_percentiles(samples, window_s, &[90.0, 99.0]).ok()?;
        Some(RatePercentiles {
            p90: p[0],
            p99: p[1],
            wmax_p90: w[0],
            wmax_p99: w[1],
            samples: raw.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub flow_id: usize,
    pub cca: String,
    pub goodput_bps: f64,
    pub delivered_bytes: u64,
    pub mean_rtt_s: f64,
    pub median_rtt_s: f64,
    pub p95_rtt_s: f64,
    pub extra_latency_fraction: f64,
    pub losses: u64,
    pub retransmissions: u64,
    pub timeouts: u64,
    pub delivery_rate: Option<RatePercentiles>,
    pub pad: Option<crate::pad::PadStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub bottleneck_bps: f64,
    pub rtprop_s: f64,
    pub delay_stddev_ms: f64,
    pub aggregate_goodput_bps: f64,
    pub mean_rtt_s: f64,
    pub extra_latency_fraction: f64,
    pub queue_drops: u64,
    pub fairness: Option<Fairness>,
    pub flows: Vec<FlowSummary>,
    pub events: u64,
    pub trace_digest: String,
}
