use std::collections::VecDeque;
use std::time::Duration;

use crate::net::AckRecord;
use crate::sim::SimTime;

/// The largest sequence number `ack` proves received: the cumulative point or
/// the right edge of the highest SACK block.
pub fn resolve_highest_seq(ack: &AckRecord) -> u64 {
    ack.highest_received()
}

/// Historical ACK-arrival rate over the last `w` round trips.
#[derive(Clone, Debug)]
pub struct RateEstimator {
    w: f64,
    history: VecDeque<(SimTime, u64)>,
    lambda: Option<f64>,
}

impl RateEstimator {
    pub fn new(w: f64) -> Self {
        RateEstimator {
            w,
            history: VecDeque::new(),
            lambda: None,
        }
    }

    /// Current estimate in bytes per second.
    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn highest(&self) -> Option<u64> {
        self.history.back().map(|&(_, s)| s)
    }

    /// Records `(t_now, highest)` and recomputes λ against the newest record at
    /// least `w · rtt` old, or the oldest record when history is shorter.
    pub fn update(&mut self, t_now: SimTime, highest: u64, rtt: Option<Duration>) -> Option<f64> {
        let ack_now = self.highest().map_or(highest, |h| h.max(highest));
        let span = rtt.map(|r| r.mul_f64(self.w));

        let reference = match span.and_then(|s| t_now.as_nanos().checked_sub(s.as_nanos() as u64)) {
            Some(cutoff) => {
                let cutoff = SimTime::from_nanos(cutoff);
                // Newest record not after the cutoff.
                let idx = self.history.partition_point(|&(t, _)| t <= cutoff);
                if idx > 0 {
                    self.history.drain(..idx - 1);
                }
                self.history.front().copied()
            }
            None => self.history.front().copied(),
        };

        if let Some((t_prev, ack_prev)) = reference {
            if t_now > t_prev {
                let secs = (t_now - t_prev).as_secs_f64();
                self.lambda = Some((ack_now - ack_prev) as f64 / secs);
            }
        }

        match self.history.back_mut() {
            Some(last) if last.0 == t_now => last.1 = ack_now,
            _ => self.history.push_back((t_now, ack_now)),
        }
        self.lambda
    }

    pub fn clear(&mut self) {
        self.history.clear();
        self.lambda = None;
    }
}
