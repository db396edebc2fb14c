use std::collections::VecDeque;
use std::ops::Range;
use std::time::Duration;

use super::filter::WindowedFilter;
use super::{CongestionControl, SenderView, INITIAL_CWND_SEGMENTS, MIN_CWND_SEGMENTS};
use crate::net::RateSample;
use crate::sim::{duration_nanos, SimTime};

const DELTA: f64 = 0.5;
const BASE_RTT_WINDOW: Duration = Duration::from_secs(10);
const MAX_VELOCITY: f64 = 4096.0;
/// Rounds a direction must persist before the velocity starts doubling.
const VELOCITY_HOLD_ROUNDS: u32 = 3;

/// Copa's target rate `1 / (δ · d_q)` in packets per second; unbounded with no queueing delay.
pub fn copa_target_rate(delta: f64, queueing_delay: Duration) -> f64 {
    let dq = queueing_delay.as_secs_f64();
    if dq <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / (delta * dq)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Direction {
    Up,
    Down,
}

/// Copa in its default (delay-only) mode.
pub struct Copa {
    mss: f64,
    cwnd: f64,
    velocity: f64,
    slow_start: bool,
    recent: VecDeque<(SimTime, Duration)>,
    base: WindowedFilter<u64>,
    standing: Option<Duration>,
    round_end: u64,
    round_start_cwnd: f64,
    last_direction: Option<Direction>,
    same_direction_rounds: u32,
    srtt: Option<Duration>,
}

impl Copa {
    pub fn new(mss: u32) -> Self {
        Copa {
            mss: mss as f64,
            cwnd: INITIAL_CWND_SEGMENTS as f64,
            velocity: 1.0,
            slow_start: true,
            recent: VecDeque::new(),
            base: WindowedFilter::min(duration_nanos(BASE_RTT_WINDOW)),
            standing: None,
            round_end: 0,
            round_start_cwnd: INITIAL_CWND_SEGMENTS as f64,
            last_direction: None,
            same_direction_rounds: 0,
            srtt: None,
        }
    }

    pub fn cwnd_segments(&self) -> f64 {
        self.cwnd
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    /// Smallest RTT over the last half smoothed RTT.
    fn update_standing(&mut self, now: SimTime, rtt: Duration, srtt: Duration) {
        self.recent.push_back((now, rtt));
        let horizon = now - srtt / 2;
        while self.recent.len() > 1 && self.recent.front().is_some_and(|&(t, _)| t < horizon) {
            self.recent.pop_front();
        }
        self.standing = self.recent.iter().map(|&(_, r)| r).min();
    }

    fn end_round(&mut self, view: &SenderView) {
        self.round_end = view.delivered + view.in_flight;
        let direction = if self.cwnd >= self.round_start_cwnd {
            Direction::Up
        } else {
            Direction::Down
        };
        if self.last_direction == Some(direction) {
            self.same_direction_rounds += 1;
            if self.same_direction_rounds >= VELOCITY_HOLD_ROUNDS {
                self.velocity = (self.velocity * 2.0).min(MAX_VELOCITY);
            }
        } else {
            self.same_direction_rounds = 0;
            self.velocity = 1.0;
        }
        self.last_direction = Some(direction);
        self.round_start_cwnd = self.cwnd;
    }
}

impl CongestionControl for Copa {
    fn name(&self) -> &'static str {
        "copa"
    }

    fn on_ack(&mut self, sample: &RateSample, view: &SenderView) {
        self.srtt = view.srtt;
        if sample.newly_acked == 0 || sample.rtt.is_zero() {
            return;
        }
        let now = view.now;
        let srtt = view.srtt.unwrap_or(sample.rtt);
        self.update_standing(now, sample.rtt, srtt);
        self.base.update(now.as_nanos(), duration_nanos(sample.rtt));
        let (Some(standing), Some(base)) = (self.standing, self.base.get()) else {
            return;
        };
        let dq = standing.saturating_sub(Duration::from_nanos(base));
        let target = copa_target_rate(DELTA, dq);
        let current = self.cwnd / standing.as_secs_f64().max(1e-6);
        let acked = sample.newly_acked as f64 / self.mss;

        if self.slow_start {
            if current < target {
                self.cwnd += acked;
            } else {
                self.slow_start = false;
            }
        } else {
            let step = self.velocity / (DELTA * self.cwnd) * acked;
            if current <= target {
                self.cwnd += step;
            } else {
                self.cwnd -= step;
            }
        }
        self.cwnd = self.cwnd.max(MIN_CWND_SEGMENTS as f64);
        if view.delivered >= self.round_end {
            self.end_round(view);
        }
    }

    fn on_loss_detected(&mut self, _lost: Range<u64>, _view: &SenderView) {}

    fn on_rto(&mut self, _view: &SenderView) {
        self.cwnd = MIN_CWND_SEGMENTS as f64;
        self.velocity = 1.0;
        self.slow_start = false;
        self.last_direction = None;
        self.same_direction_rounds = 0;
        self.round_start_cwnd = self.cwnd;
    }

    fn pacing_rate(&self) -> f64 {
        let rtt = self.standing.or(self.srtt).map_or(0.1, |d| d.as_secs_f64().max(1e-4));
        (2.0 * self.cwnd * self.mss * 8.0 / rtt).max(1e3)
    }

    fn cwnd(&self) -> u64 {
        (self.cwnd * self.mss) as u64
    }
}
