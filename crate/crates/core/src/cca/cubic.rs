use std::ops::Range;

use super::{window_pacing_rate, CongestionControl, SenderView, INITIAL_CWND_SEGMENTS, MIN_CWND_SEGMENTS};
use crate::net::RateSample;
use crate::sim::SimTime;

const C: f64 = 0.4;
const BETA: f64 = 0.7;

/// Time for the cubic curve to climb back to `w_max` after a reduction to `beta · w_max`.
pub fn cubic_k(w_max: f64, beta: f64, c: f64) -> f64 {
    (w_max * (1.0 - beta) / c).cbrt()
}

/// `W(t) = c·(t − k)³ + w_max`, in segments, with `t` in seconds since the epoch.
pub fn cubic_window(t: f64, k: f64, w_max: f64, c: f64) -> f64 {
    c * (t - k).powi(3) + w_max
}

/// CUBIC with the TCP-friendly region. Window state is kept in segments.
pub struct Cubic {
    mss: f64,
    cwnd: f64,
    ssthresh: f64,
    w_max: f64,
    k: f64,
    origin: f64,
    epoch_start: Option<SimTime>,
    /// Reno-equivalent window for the TCP-friendly check.
    w_est: f64,
    srtt: Option<std::time::Duration>,
}

impl Cubic {
    pub fn new(mss: u32) -> Self {
        Cubic {
            mss: mss as f64,
            cwnd: INITIAL_CWND_SEGMENTS as f64,
            ssthresh: f64::INFINITY,
            w_max: 0.0,
            k: 0.0,
            origin: 0.0,
            epoch_start: None,
            w_est: 0.0,
            srtt: None,
        }
    }

    pub fn cwnd_segments(&self) -> f64 {
        self.cwnd
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    fn clamp(&mut self) {
        self.cwnd = self.cwnd.max(MIN_CWND_SEGMENTS as f64);
    }

    /// Multiplicative decrease at the start of a congestion event.
    pub fn reduce(&mut self) {
        self.epoch_start = None;
        // Fast convergence: release bandwidth when the previous peak was not reached.
        self.w_max = if self.cwnd < self.w_max {
            self.cwnd * (1.0 + BETA) / 2.0
        } else {
            self.cwnd
        };
        self.cwnd *= BETA;
        self.clamp();
        self.ssthresh = self.cwnd;
    }

    fn congestion_avoidance(&mut self, now: SimTime, acked_segments: f64, min_rtt: f64) {
        let epoch = *self.epoch_start.get_or_insert_with(|| {
            if self.cwnd < self.w_max {
                self.k = cubic_k_from(self.w_max, self.cwnd);
                self.origin = self.w_max;
            } else {
                self.k = 0.0;
                self.origin = self.cwnd;
            }
            self.w_est = self.cwnd;
            now
        });
        let t = now.saturating_since(epoch).as_secs_f64() + min_rtt;
        let target = cubic_window(t, self.k, self.origin, C);
        let per_ack = if target > self.cwnd {
            (target - self.cwnd) / self.cwnd
        } else {
            0.01 / self.cwnd
        };
        self.cwnd += per_ack * acked_segments;

        self.w_est += 3.0 * (1.0 - BETA) / (1.0 + BETA) * acked_segments / self.cwnd;
        if self.w_est > self.cwnd {
            self.cwnd = self.w_est;
        }
    }
}

/// `k` when the window restarts at `cwnd` below the previous peak.
fn cubic_k_from(w_max: f64, cwnd: f64) -> f64 {
    ((w_max - cwnd).max(0.0) / C).cbrt()
}

impl CongestionControl for Cubic {
    fn name(&self) -> &'static str {
        "cubic"
    }

    fn on_ack(&mut self, sample: &RateSample, view: &SenderView) {
        self.srtt = view.srtt;
        let acked = sample.newly_acked as f64 / self.mss;
        if acked <= 0.0 || view.in_recovery {
            return;
        }
        if self.cwnd < self.ssthresh {
            self.cwnd += acked;
        } else {
            let min_rtt = view.min_rtt.map_or(0.0, |d| d.as_secs_f64());
            self.congestion_avoidance(view.now, acked, min_rtt);
        }
        self.clamp();
    }

    fn on_loss_detected(&mut self, _lost: Range<u64>, _view: &SenderView) {
        self.reduce();
    }

    fn on_rto(&mut self, _view: &SenderView) {
        self.epoch_start = None;
        self.w_max = self.cwnd;
        self.ssthresh = (self.cwnd * BETA).max(2.0);
        self.cwnd = MIN_CWND_SEGMENTS as f64;
    }

    fn pacing_rate(&self) -> f64 {
        let factor = if self.cwnd < self.ssthresh { 2.0 } else { 1.2 };
        window_pacing_rate(self.cwnd * self.mss, self.srtt, factor)
    }

    fn cwnd(&self) -> u64 {
        (self.cwnd * self.mss) as u64
    }
}
