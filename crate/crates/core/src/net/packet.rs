use std::time::Duration;

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::sim::{rate_bps, SimTime};

pub type FlowId = usize;

/// Default segment size on the wire, headers included.
pub const DEFAULT_SEGMENT_BYTES: u32 = 1500;

/// Most SACK blocks a single acknowledgment carries.
pub const MAX_SACK_BLOCKS: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub flow: FlowId,
    /// Byte offset of the first payload byte in the flow's stream.
    pub seq: u64,
    pub size: u32,
    pub send_time: SimTime,
    pub is_retransmission: bool,
    /// Set by the sender while the congestion controller is probing (pacing gain above one).
    pub probe_marked: bool,
}

impl Packet {
    pub fn end(&self) -> u64 {
        self.seq + self.size as u64
    }
}

/// Half-open received byte range `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SackBlock {
    pub start: u64,
    pub end: u64,
}

impl SackBlock {
    pub fn new(start: u64, end: u64) -> Self {
        debug_assert!(start < end);
        SackBlock { start, end }
    }

    pub fn contains(&self, seq: u64, end: u64) -> bool {
        self.start <= seq && end <= self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AckRecord {
    pub flow: FlowId,
    /// Next byte expected: every byte below it has been received.
    pub cum_ack: u64,
    /// Disjoint received ranges above `cum_ack`, ascending.
    pub sack_blocks: ArrayVec<SackBlock, MAX_SACK_BLOCKS>,
    /// Payload bytes this acknowledgment reports for the first time.
    pub acked_new_bytes: u32,
    pub gen_time: SimTime,
    pub arrival_time: SimTime,
    /// Send time of the segment that triggered this acknowledgment (timestamp echo).
    pub echo_send_time: SimTime,
    pub echo_seq: u64,
}

impl AckRecord {
    pub fn is_well_formed(&self) -> bool {
        let mut floor = self.cum_ack;
        for block in &self.sack_blocks {
            if block.start <= floor || block.end <= block.start {
                return false;
            }
            floor = block.end;
        }
        self.arrival_time >= self.gen_time
    }

    /// Largest sequence number known to have been received: the cumulative
    /// point, or the right edge of the highest SACK block when one exists.
    pub fn highest_received(&self) -> u64 {
        self.sack_blocks
            .iter()
            .map(|b| b.end)
            .max()
            .map_or(self.cum_ack, |edge| edge.max(self.cum_ack))
    }
}

/// A delivery-rate measurement as handed from the socket to the congestion controller.
///
/// The sample stays open until [`RateSample::retime`] fixes the instant the controller
/// observes it. Without a shim in the path that instant is the ACK's arrival.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSample {
    pub delivered_bytes: u64,
    /// Delivered counter snapshot carried by the most recently sent newly-acked packet.
    pub prior_delivered: u64,
    pub prior_time: SimTime,
    pub send_elapsed: Duration,
    pub ack_elapsed: Duration,
    /// `max(send_elapsed, ack_elapsed)`.
    pub interval: Duration,
    pub rtt: Duration,
    /// Bytes cumulatively or selectively acknowledged for the first time by this ACK.
    pub newly_acked: u64,
    pub newly_lost: u64,
    pub is_app_limited: bool,
    /// Samples over intervals shorter than the minimum RTT are not trusted.
    pub min_rtt: Duration,
    /// Send time of the packet the sample is anchored on.
    pub(crate) anchor_send_time: SimTime,
    pub(crate) has_anchor: bool,
    pub ack: AckRecord,
}

impl RateSample {
    /// A sample that carries `ack` but no delivery-rate measurement.
    pub fn unanchored(ack: AckRecord, rtt: Duration) -> Self {
        RateSample {
            delivered_bytes: 0,
            prior_delivered: 0,
            prior_time: SimTime::ZERO,
            send_elapsed: Duration::ZERO,
            ack_elapsed: Duration::ZERO,
            interval: Duration::ZERO,
            rtt,
            newly_acked: ack.acked_new_bytes as u64,
            newly_lost: 0,
            is_app_limited: false,
            min_rtt: rtt,
            anchor_send_time: SimTime::ZERO,
            has_anchor: false,
            ack,
        }
    }

    /// Sets the observation instant and derives `ack_elapsed` and `interval` from it.
    pub fn retime(&mut self, observed_at: SimTime) {
        if self.has_anchor {
            self.ack_elapsed = observed_at.saturating_since(self.prior_time);
            self.interval = self.send_elapsed.max(self.ack_elapsed);
        }
    }

    pub fn is_valid(&self) -> bool {
        self.has_anchor
            && self.delivered_bytes > 0
            && !self.interval.is_zero()
            && self.interval >= self.min_rtt
    }

    /// Delivered bits per second over `interval`, if the sample is trustworthy.
    pub fn delivery_rate_bps(&self) -> Option<f64> {
        self.is_valid()
            .then(|| rate_bps(self.delivered_bytes, self.interval))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ack(cum: u64, blocks: &[(u64, u64)]) -> AckRecord {
        AckRecord {
            flow: 0,
            cum_ack: cum,
            sack_blocks: blocks.iter().map(|&(s, e)| SackBlock::new(s, e)).collect(),
            acked_new_bytes: 1500,
            gen_time: SimTime::ZERO,
            arrival_time: SimTime::ZERO,
            echo_send_time: SimTime::ZERO,
            echo_seq: 0,
        }
    }

    #[test]
    fn highest_received() {
        assert_eq!(ack(3000, &[]).highest_received(), 3000);
        assert_eq!(ack(1500, &[(3000, 4500)]).highest_received(), 4500);
        assert_eq!(
            ack(1500, &[(3000, 4500), (6000, 7500)]).highest_received(),
            7500
        );
    }

    #[test]
    fn well_formed() {
        assert!(ack(1500, &[(3000, 4500), (6000, 7500)]).is_well_formed());
        assert!(!ack(3000, &[(3000, 4500)]).is_well_formed());
        assert!(!ack(1500, &[(6000, 7500), (3000, 4500)]).is_well_formed());
    }
}
