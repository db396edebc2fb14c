use std::collections::BTreeMap;

use arrayvec::ArrayVec;

use super::packet::{AckRecord, FlowId, Packet, SackBlock, MAX_SACK_BLOCKS};
use crate::sim::SimTime;

/// Receiving endpoint of one flow. Acknowledges every data packet immediately.
pub struct Receiver {
    flow: FlowId,
    cum_ack: u64,
    /// Out-of-order ranges above `cum_ack`, keyed by start, never adjacent or overlapping.
    ranges: BTreeMap<u64, u64>,
    received_bytes: u64,
    duplicate_bytes: u64,
}

impl Receiver {
    pub fn new(flow: FlowId) -> Self {
        Receiver {
            flow,
            cum_ack: 0,
            ranges: BTreeMap::new(),
            received_bytes: 0,
            duplicate_bytes: 0,
        }
    }

    pub fn cum_ack(&self) -> u64 {
        self.cum_ack
    }

    /// Distinct payload bytes received, in order or not.
    pub fn received_bytes(&self) -> u64 {
        self.received_bytes
    }

    pub fn duplicate_bytes(&self) -> u64 {
        self.duplicate_bytes
    }

    pub fn on_data(&mut self, pkt: &Packet, now: SimTime) -> AckRecord {
        let fresh = self.insert(pkt.seq.max(self.cum_ack), pkt.end());
        self.received_bytes += fresh;
        self.duplicate_bytes += pkt.size as u64 - fresh;

        let mut sack_blocks: ArrayVec<SackBlock, MAX_SACK_BLOCKS> = self
            .ranges
            .iter()
            .rev()
            .take(MAX_SACK_BLOCKS)
            .map(|(&s, &e)| SackBlock::new(s, e))
            .collect();
        sack_blocks.reverse();

        AckRecord {
            flow: self.flow,
            cum_ack: self.cum_ack,
            sack_blocks,
            acked_new_bytes: fresh as u32,
            gen_time: now,
            arrival_time: now,
            echo_send_time: pkt.send_time,
            echo_seq: pkt.seq,
        }
    }

    /// Records `[start, end)` and returns how many of its bytes were new.
    fn insert(&mut self, mut start: u64, mut end: u64) -> u64 {
        if start >= end {
            return 0;
        }
        let (orig_start, orig_end) = (start, end);
        let span = end - start;
        let mut covered = 0;
        // Absorb a range that starts before us and reaches into or touches us.
        if let Some((&s, &e)) = self.ranges.range(..=start).next_back() {
            if e >= start {
                covered += e.min(end) - start;
                self.ranges.remove(&s);
                start = s;
                end = end.max(e);
            }
        }
        // Absorb every range starting inside (or touching the end of) the new one.
        while let Some((&s, &e)) = self.ranges.range(start..=end).next() {
            if s < orig_end {
                covered += e.min(orig_end) - s.max(orig_start);
            }
            self.ranges.remove(&s);
            end = end.max(e);
        }
        if start <= self.cum_ack {
            self.cum_ack = self.cum_ack.max(end);
        } else {
            self.ranges.insert(start, end);
        }
        span - covered.min(span)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(seq: u64) -> Packet {
        Packet {
            flow: 0,
            seq,
            size: 1500,
            send_time: SimTime::ZERO,
            is_retransmission: false,
            probe_marked: false,
        }
    }

    fn blocks(a: &AckRecord) -> Vec<(u64, u64)> {
        a.sack_blocks.iter().map(|b| (b.start, b.end)).collect()
    }

    #[test]
    fn in_order() {
        let mut r = Receiver::new(0);
        let a = r.on_data(&data(0), SimTime::ZERO);
        assert_eq!((a.cum_ack, blocks(&a)), (1500, vec![]));
        let a = r.on_data(&data(1500), SimTime::ZERO);
        assert_eq!((a.cum_ack, blocks(&a)), (3000, vec![]));
    }

    #[test]
    fn hole_then_fill() {
        let mut r = Receiver::new(0);
        r.on_data(&data(0), SimTime::ZERO);
        let a = r.on_data(&data(3000), SimTime::ZERO);
        assert_eq!((a.cum_ack, blocks(&a)), (1500, vec![(3000, 4500)]));
        assert!(a.is_well_formed());
        let mut rtx = data(1500);
        rtx.is_retransmission = true;
        let a = r.on_data(&rtx, SimTime::ZERO);
        assert_eq!((a.cum_ack, blocks(&a)), (4500, vec![]));
        assert_eq!(a.acked_new_bytes, 1500);
    }

    #[test]
    fn duplicates_ack_nothing_new() {
        let mut r = Receiver::new(0);
        r.on_data(&data(0), SimTime::ZERO);
        let a = r.on_data(&data(0), SimTime::ZERO);
        assert_eq!(a.acked_new_bytes, 0);
        r.on_data(&data(4500), SimTime::ZERO);
        let a = r.on_data(&data(4500), SimTime::ZERO);
        assert_eq!(a.acked_new_bytes, 0);
        assert_eq!(r.duplicate_bytes(), 3000);
    }

    #[test]
    fn reports_the_highest_four_blocks() {
        let mut r = Receiver::new(0);
        for i in [2u64, 4, 6, 8, 10, 12] {
            r.on_data(&data(i * 1500), SimTime::ZERO);
        }
        let a = r.on_data(&data(13 * 1500), SimTime::ZERO);
        assert_eq!(a.cum_ack, 0);
        assert_eq!(
            blocks(&a),
            vec![
                (6 * 1500, 7 * 1500),
                (8 * 1500, 9 * 1500),
                (10 * 1500, 11 * 1500),
                (12 * 1500, 14 * 1500)
            ]
        );
        assert!(a.is_well_formed());
    }

    #[test]
    fn merging_adjacent_ranges() {
        let mut r = Receiver::new(0);
        r.on_data(&data(3000), SimTime::ZERO);
        r.on_data(&data(6000), SimTime::ZERO);
        let a = r.on_data(&data(4500), SimTime::ZERO);
        assert_eq!(blocks(&a), vec![(3000, 7500)]);
        let a = r.on_data(&data(1500), SimTime::ZERO);
        assert_eq!(blocks(&a), vec![(1500, 7500)]);
        let a = r.on_data(&data(0), SimTime::ZERO);
        assert_eq!((a.cum_ack, blocks(&a)), (7500, vec![]));
        assert_eq!(r.received_bytes(), 7500);
    }
}
