use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cca::CcaSpec;
use crate::error::ConfigError;
use crate::pad::PadConfig;

/// Spacing between consecutive flow starts when a flow does not give its own offset.
pub const DEFAULT_FLOW_SPACING_S: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub cca: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_offset_s: Option<f64>,
    /// Application-limited sending rate; omitted means always backlogged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_rate_bps: Option<f64>,
}

impl FlowConfig {
    pub fn new(cca: impl Into<String>) -> Self {
        FlowConfig {
            cca: cca.into(),
            start_offset_s: None,
            app_rate_bps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub bottleneck_bps: f64,
    pub rtprop_ms: f64,
    pub queue_packets: usize,
    pub delay_stddev_ms: f64,
    pub delay_update_ms: f64,
    /// Jitter the ACK path too (with an independent process).
    pub reverse_jitter: bool,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub seed: u64,
    pub segment_bytes: u32,
    /// Period of the cwnd / pacing / queue log rows.
    pub log_interval_ms: f64,
    pub pad: PadConfig,
    pub flows: Vec<FlowConfig>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            bottleneck_bps: 10e6,
            rtprop_ms: 160.0,
            queue_packets: 100,
            delay_stddev_ms: 0.0,
            delay_update_ms: 100.0,
            reverse_jitter: false,
            duration_s: 60.0,
            warmup_s: 5.0,
            seed: 1,
            segment_bytes: 1500,
            log_interval_ms: 100.0,
            pad: PadConfig::default(),
            flows: vec![FlowConfig::new("bbr")],
        }
    }
}

/// A flow after validation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowPlan {
    pub spec: CcaSpec,
    pub start: Duration,
    pub app_rate_bps: Option<f64>,
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be a positive number, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| ConfigError::new("config", e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// A single-flow scenario with everything else at defaults.
    pub fn single(cca: &str, stddev_ms: f64, seed: u64) -> Self {
        ScenarioConfig {
            delay_stddev_ms: stddev_ms,
            seed,
            flows: vec![FlowConfig::new(cca)],
            ..Self::default()
        }
    }

    /// `n` flows of the same algorithm.
    pub fn multi(cca: &str, n: usize, stddev_ms: f64, seed: u64) -> Self {
        ScenarioConfig {
            delay_stddev_ms: stddev_ms,
            seed,
            flows: (0..n).map(|_| FlowConfig::new(cca)).collect(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("bottleneck_bps", self.bottleneck_bps)?;
        positive("rtprop_ms", self.rtprop_ms)?;
        positive("delay_update_ms", self.delay_update_ms)?;
        positive("duration_s", self.duration_s)?;
        positive("log_interval_ms", self.log_interval_ms)?;
        if self.queue_packets == 0 {
            return Err(ConfigError::new("queue_packets", "must be at least 1"));
        }
        if !(self.delay_stddev_ms >= 0.0 && self.delay_stddev_ms.is_finite()) {
            return Err(ConfigError::new(
                "delay_stddev_ms",
                format!("must be zero or positive, got {}", self.delay_stddev_ms),
            ));
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.duration_s) {
            return Err(ConfigError::new(
                "warmup_s",
                format!("must lie in [0, duration_s), got {}", self.warmup_s),
            ));
        }
        if self.segment_bytes < 100 {
            return Err(ConfigError::new("segment_bytes", "must be at least 100"));
        }
        self.pad
            .validate()
            .map_err(|msg| ConfigError::new("pad", msg))?;
        self.flow_plans().map(|_| ())
    }

    pub fn flow_plans(&self) -> Result<Vec<FlowPlan>, ConfigError> {
        if self.flows.is_empty() {
            return Err(ConfigError::new("flows", "at least one flow is required"));
        }
        self.flows
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let spec: CcaSpec = f
                    .cca
                    .parse()
                    .map_err(|e: crate::cca::UnknownCca| ConfigError::new(format!("flows[{i}].cca"), e.to_string()))?;
                let offset = f.start_offset_s.unwrap_or(i as f64 * DEFAULT_FLOW_SPACING_S);
                if !(offset >= 0.0 && offset < self.duration_s) {
                    return Err(ConfigError::new(
                        format!("flows[{i}].start_offset_s"),
                        format!("must lie in [0, duration_s), got {offset}"),
                    ));
                }
                if let Some(rate) = f.app_rate_bps {
                    positive(&format!("flows[{i}].app_rate_bps"), rate)?;
                }
                Ok(FlowPlan {
                    spec,
                    start: Duration::from_secs_f64(offset),
                    app_rate_bps: f.app_rate_bps,
                })
            })
            .collect()
    }

    pub fn rtprop(&self) -> Duration {
        Duration::from_secs_f64(self.rtprop_ms / 1e3)
    }
}
