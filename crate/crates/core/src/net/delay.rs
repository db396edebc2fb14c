//! Propagation delay that drifts around a mean while keeping packets in order.
//!
//! A Gaussian anchor is drawn on every `update_interval` grid point and the delay is
//! linearly interpolated between anchors. An anchor that would make the delay fall
//! faster than [`MAX_DECREASE_SLOPE`] seconds per second is raised, so `t + d(t)` is
//! non-decreasing and a later departure never overtakes an earlier one.

use std::time::Duration;

use crate::sim::{duration_nanos, RngStream, SimTime};

/// Steepest allowed decrease of the delay, in seconds of delay per second of time.
pub const MAX_DECREASE_SLOPE: f64 = 0.999;

pub const DEFAULT_UPDATE_INTERVAL: Duration = Duration::from_millis(100);
pub const DEFAULT_FLOOR: Duration = Duration::from_millis(1);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayConfig {
    pub mean_one_way: Duration,
    pub stddev: Duration,
    pub update_interval: Duration,
    pub floor: Duration,
}

impl DelayConfig {
    pub fn constant(delay: Duration) -> Self {
        DelayConfig {
            mean_one_way: delay,
            stddev: Duration::ZERO,
            update_interval: DEFAULT_UPDATE_INTERVAL,
            floor: DEFAULT_FLOOR.min(delay),
        }
    }

    pub fn gaussian(mean_one_way: Duration, stddev: Duration) -> Self {
        DelayConfig {
            mean_one_way,
            stddev,
            update_interval: DEFAULT_UPDATE_INTERVAL,
            floor: DEFAULT_FLOOR,
        }
    }
}

enum AnchorSource {
    Gaussian { rng: RngStream, mean: f64, stddev: f64 },
    /// Fixed anchors; the last one is held forever.
    Fixed(Vec<f64>),
}

pub struct DelayProcess {
    interval_ns: f64,
    floor_ns: f64,
    source: AnchorSource,
    /// Effective (slope-clamped) anchors, in nanoseconds, generated on demand.
    anchors: Vec<f64>,
}

impl DelayProcess {
    pub fn new(config: DelayConfig, rng: RngStream) -> Self {
        assert!(!config.update_interval.is_zero());
        DelayProcess {
            interval_ns: duration_nanos(config.update_interval) as f64,
            floor_ns: duration_nanos(config.floor) as f64,
            source: AnchorSource::Gaussian {
                rng,
                mean: duration_nanos(config.mean_one_way) as f64,
                stddev: duration_nanos(config.stddev) as f64,
            },
            anchors: Vec::new(),
        }
    }

    pub fn constant(delay: Duration) -> Self {
        Self::from_anchors(&[delay], DEFAULT_UPDATE_INTERVAL, DEFAULT_FLOOR.min(delay))
    }

    /// A process through explicit anchor values at `0, interval, 2·interval, ...`.
    pub fn from_anchors(anchors: &[Duration], interval: Duration, floor: Duration) -> Self {
        assert!(!anchors.is_empty() && !interval.is_zero());
        DelayProcess {
            interval_ns: duration_nanos(interval) as f64,
            floor_ns: duration_nanos(floor) as f64,
            source: AnchorSource::Fixed(
                anchors.iter().map(|&a| duration_nanos(a) as f64).collect(),
            ),
            anchors: Vec::new(),
        }
    }

    fn raw_anchor(&mut self, index: usize) -> f64 {
        match &mut self.source {
            AnchorSource::Gaussian { rng, mean, stddev } => rng.normal(*mean, *stddev),
            AnchorSource::Fixed(values) => values[index.min(values.len() - 1)],
        }
    }

    fn anchor(&mut self, index: usize) -> f64 {
        while self.anchors.len() <= index {
            let i = self.anchors.len();
            let mut value = self.raw_anchor(i).max(self.floor_ns);
            if let Some(&prev) = self.anchors.last() {
                value = value.max(prev - MAX_DECREASE_SLOPE * self.interval_ns);
            }
            self.anchors.push(value);
        }
        self.anchors[index]
    }

    /// One-way delay experienced by a packet entering the link at `t`.
    pub fn sample(&mut self, t: SimTime) -> Duration {
        let pos = t.as_nanos() as f64 / self.interval_ns;
        let index = pos.floor() as usize;
        let frac = pos - index as f64;
        let lo = self.anchor(index);
        let hi = self.anchor(index + 1);
        let d = (lo + (hi - lo) * frac).max(self.floor_ns);
        Duration::from_nanos(d.round() as u64)
    }

    /// Arrival time at the far end for a packet entering the link at `t`.
    pub fn arrival(&mut self, t: SimTime) -> SimTime {
        t + self.sample(t)
    }

    /// Mean of the delay over `[from, to)` on a 1 ms grid.
    pub fn mean_over(&mut self, from: SimTime, to: SimTime) -> Duration {
        let step = 1_000_000u64;
        let mut t = from.as_nanos();
        let (mut sum, mut n) = (0f64, 0u64);
        while t < to.as_nanos() {
            sum += duration_nanos(self.sample(SimTime::from_nanos(t))) as f64;
            n += 1;
            t += step;
        }
        if n == 0 {
            return self.sample(from);
        }
        Duration::from_nanos((sum / n as f64).round() as u64)
    }
}
