use std::ops::Range;
use std::time::Duration;

use super::{window_pacing_rate, CongestionControl, SenderView, INITIAL_CWND_SEGMENTS, MIN_CWND_SEGMENTS};
use crate::net::RateSample;
use crate::sim::duration_nanos;

const ALPHA: f64 = 2.0;
const BETA: f64 = 4.0;
/// Slow start ends once this many segments sit in the queue.
const GAMMA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Adjustment {
    Increase,
    Hold,
    Decrease,
}

/// Segments the flow keeps queued: `(cwnd/base_rtt − cwnd/rtt) · base_rtt`.
pub fn vegas_diff(cwnd_segments: f64, base_rtt: Duration, rtt: Duration) -> f64 {
    let base = duration_nanos(base_rtt) as f64;
    let rtt = duration_nanos(rtt) as f64;
    cwnd_segments * (rtt - base) / rtt
}

pub fn vegas_adjustment(diff: f64, alpha: f64, beta: f64) -> Adjustment {
    if diff < alpha {
        Adjustment::Increase
    } else if diff >= beta {
        Adjustment::Decrease
    } else {
        Adjustment::Hold
    }
}

pub struct Vegas {
    mss: f64,
    cwnd: f64,
    ssthresh: f64,
    slow_start: bool,
    base_rtt: Option<Duration>,
    round_min_rtt: Option<Duration>,
    round_end: u64,
    srtt: Option<Duration>,
}

impl Vegas {
    pub fn new(mss: u32) -> Self {
        Vegas {
            mss: mss as f64,
            cwnd: INITIAL_CWND_SEGMENTS as f64,
            ssthresh: f64::INFINITY,
            slow_start: true,
            base_rtt: None,
            round_min_rtt: None,
            round_end: 0,
            srtt: None,
        }
    }

    pub fn cwnd_segments(&self) -> f64 {
        self.cwnd
    }

    /// Once-per-round window decision from the smallest RTT seen in the round.
    fn end_of_round(&mut self, rtt: Duration, base: Duration) {
        let diff = vegas_diff(self.cwnd, base, rtt);
        if self.slow_start {
            if diff > GAMMA {
                // leave slow start at the window the base RTT supports
                let target = self.cwnd * duration_nanos(base) as f64 / duration_nanos(rtt) as f64;
                self.cwnd = self.cwnd.min(target + 1.0);
                self.ssthresh = self.cwnd;
                self.slow_start = false;
            }
            return;
        }
        match vegas_adjustment(diff, ALPHA, BETA) {
            Adjustment::Increase => self.cwnd += 1.0,
            Adjustment::Decrease => self.cwnd -= 1.0,
            Adjustment::Hold => {}
        }
    }
}

impl CongestionControl for Vegas {
    fn name(&self) -> &'static str {
        "vegas"
    }

    fn on_ack(&mut self, sample: &RateSample, view: &SenderView) {
        self.srtt = view.srtt;
        if sample.newly_acked == 0 {
            return;
        }
        let rtt = sample.rtt;
        if !rtt.is_zero() {
            self.base_rtt = Some(self.base_rtt.map_or(rtt, |b| b.min(rtt)));
            self.round_min_rtt = Some(self.round_min_rtt.map_or(rtt, |m| m.min(rtt)));
        }
        if view.in_recovery {
            return;
        }
        if self.slow_start {
            self.cwnd += sample.newly_acked as f64 / self.mss;
            if self.cwnd >= self.ssthresh {
                self.cwnd = self.ssthresh;
                self.slow_start = false;
            }
        }
        if view.delivered >= self.round_end {
            self.round_end = view.delivered + view.in_flight;
            if let (Some(rtt), Some(base)) = (self.round_min_rtt.take(), self.base_rtt) {
                self.end_of_round(rtt, base);
            }
        }
        self.cwnd = self.cwnd.max(MIN_CWND_SEGMENTS as f64);
    }

    fn on_loss_detected(&mut self, _lost: Range<u64>, _view: &SenderView) {
        self.cwnd = (self.cwnd / 2.0).max(MIN_CWND_SEGMENTS as f64);
        self.ssthresh = self.cwnd;
        self.slow_start = false;
    }

    fn on_rto(&mut self, _view: &SenderView) {
        self.ssthresh = (self.cwnd / 2.0).max(2.0);
        self.cwnd = MIN_CWND_SEGMENTS as f64;
        self.slow_start = true;
    }

    fn pacing_rate(&self) -> f64 {
        let factor = if self.slow_start { 2.0 } else { 1.2 };
        window_pacing_rate(self.cwnd * self.mss, self.srtt, factor)
    }

    fn cwnd(&self) -> u64 {
        (self.cwnd * self.mss) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(v: u64) -> Duration {
        Duration::from_millis(v)
    }

    #[test]
    fn rule_arithmetic() {
        let diff = vegas_diff(20.0, ms(160), ms(200));
        assert_eq!(diff, 4.0);
        assert_eq!(vegas_adjustment(diff, ALPHA, BETA), Adjustment::Decrease);
        assert_eq!(vegas_diff(20.0, ms(160), ms(160)), 0.0);
        assert_eq!(vegas_adjustment(0.0, ALPHA, BETA), Adjustment::Increase);
        assert_eq!(vegas_adjustment(3.0, ALPHA, BETA), Adjustment::Hold);
    }

    #[test]
    fn round_decision_moves_one_segment() {
        let mut v = Vegas::new(1500);
        v.slow_start = false;
        v.cwnd = 20.0;
        v.end_of_round(ms(200), ms(160));
        assert_eq!(v.cwnd_segments(), 19.0);
        v.end_of_round(ms(160), ms(160));
        assert_eq!(v.cwnd_segments(), 20.0);
    }
}
