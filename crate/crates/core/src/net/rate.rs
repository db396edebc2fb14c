//! Delivery-rate bookkeeping in the style of the Linux `tcp_rate` machinery.
//!
//! Every transmitted packet snapshots the connection's delivered counter. When the
//! packet is acknowledged, the bytes delivered since that snapshot divided by
//! `max(send interval, ack interval)` is the delivery-rate sample.

use std::time::Duration;

use super::packet::{AckRecord, RateSample};
use crate::sim::SimTime;

/// Connection state captured when a packet is (re)transmitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TxSnapshot {
    pub delivered: u64,
    pub delivered_time: SimTime,
    pub first_sent_time: SimTime,
    pub is_app_limited: bool,
}

#[derive(Clone, Debug, Default)]
pub struct DeliveryRateEstimator {
    delivered: u64,
    delivered_time: SimTime,
    first_sent_time: SimTime,
    /// Non-zero while the flow is application limited: the delivered count at
    /// which the limited stretch ends.
    app_limited_until: u64,
}

impl DeliveryRateEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bytes delivered as observed by the congestion controller so far.
    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn is_app_limited(&self) -> bool {
        self.app_limited_until != 0
    }

    pub fn on_send(&mut self, now: SimTime, nothing_in_flight: bool) -> TxSnapshot {
        if nothing_in_flight {
            self.first_sent_time = now;
            self.delivered_time = now;
        }
        TxSnapshot {
            delivered: self.delivered,
            delivered_time: self.delivered_time,
            first_sent_time: self.first_sent_time,
            is_app_limited: self.is_app_limited(),
        }
    }

    /// An empty sample for `ack`; packets are folded in with [`Self::on_delivered`].
    pub fn draft(&self, ack: AckRecord, rtt: Duration, min_rtt: Duration) -> RateSample {
        RateSample {
            delivered_bytes: 0,
            prior_delivered: 0,
            prior_time: SimTime::ZERO,
            send_elapsed: Duration::ZERO,
            ack_elapsed: Duration::ZERO,
            interval: Duration::ZERO,
            rtt,
            newly_acked: 0,
            newly_lost: 0,
            is_app_limited: false,
            min_rtt,
            anchor_send_time: SimTime::ZERO,
            has_anchor: false,
            ack,
        }
    }

    /// Folds a newly delivered packet into `sample`. The most recently sent packet
    /// among those delivered anchors the measurement.
    pub fn on_delivered(
        &self,
        sample: &mut RateSample,
        tx: &TxSnapshot,
        send_time: SimTime,
        bytes: u64,
    ) {
        sample.newly_acked += bytes;
        let newer = !sample.has_anchor
            || tx.delivered > sample.prior_delivered
            || (tx.delivered == sample.prior_delivered && send_time >= sample.anchor_send_time);
        if newer {
            sample.has_anchor = true;
            sample.prior_delivered = tx.delivered;
            sample.prior_time = tx.delivered_time;
            sample.is_app_limited = tx.is_app_limited;
            sample.send_elapsed = send_time.saturating_since(tx.first_sent_time);
            sample.anchor_send_time = send_time;
        }
    }

    /// Hands `sample` to the congestion controller at `observed_at`: counts its
    /// bytes as delivered, stamps the delivery clock and fixes the sample interval.
    pub fn complete(&mut self, sample: &mut RateSample, observed_at: SimTime) {
        self.delivered += sample.newly_acked;
        if self.app_limited_until != 0 && self.delivered > self.app_limited_until {
            self.app_limited_until = 0;
        }
        if sample.has_anchor {
            sample.delivered_bytes = self.delivered - sample.prior_delivered;
            self.first_sent_time = sample.anchor_send_time;
        }
        if sample.newly_acked > 0 {
            self.delivered_time = observed_at;
        }
        sample.retime(observed_at);
    }

    pub fn mark_app_limited(&mut self, in_flight: u64) {
        self.app_limited_until = (self.delivered + in_flight).max(1);
    }
}

/// Rate between two consecutive acknowledgments: the bytes the later one newly
/// reports over the gap between their arrivals. This is the instantaneous quantity
/// that compressed ACKs inflate.
pub fn ack_gap_rate_bps(previous_arrival: SimTime, ack: &AckRecord) -> Option<f64> {
    let gap = ack.arrival_time.checked_since(previous_arrival)?;
    (!gap.is_zero()).then(|| crate::sim::rate_bps(ack.acked_new_bytes as u64, gap))
}
