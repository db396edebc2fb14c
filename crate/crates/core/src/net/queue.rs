use std::collections::VecDeque;
use std::time::Duration;

use super::packet::Packet;
use crate::sim::{transmission_time, SimTime};

/// What happened to a packet offered to the bottleneck.
#[derive(Debug, PartialEq, Eq)]
pub enum Admission {
    /// The link was idle; the packet finishes serialization at the given time.
    Transmitting { departs_at: SimTime },
    Queued,
    Dropped,
}

/// Drop-tail FIFO in front of a fixed-rate link.
///
/// `capacity` counts packets waiting behind the one being serialized.
pub struct BottleneckQueue {
    capacity: usize,
    rate_bps: f64,
    waiting: VecDeque<Packet>,
    in_service: Option<Packet>,
    drops: u64,
}

impl BottleneckQueue {
    pub fn new(capacity: usize, rate_bps: f64) -> Self {
        assert!(rate_bps > 0.0);
        BottleneckQueue {
            capacity,
            rate_bps,
            waiting: VecDeque::with_capacity(capacity),
            in_service: None,
            drops: 0,
        }
    }

    pub fn occupancy(&self) -> usize {
        self.waiting.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn rate_bps(&self) -> f64 {
        self.rate_bps
    }

    pub fn drops(&self) -> u64 {
        self.drops
    }

    pub fn is_busy(&self) -> bool {
        self.in_service.is_some()
    }

    pub fn serialization(&self, bytes: u32) -> Duration {
        transmission_time(bytes as u64, self.rate_bps)
    }

    pub fn offer(&mut self, pkt: Packet, now: SimTime) -> Admission {
        if self.in_service.is_none() {
            let departs_at = now + self.serialization(pkt.size);
            self.in_service = Some(pkt);
            Admission::Transmitting { departs_at }
        } else if self.waiting.len() < self.capacity {
            self.waiting.push_back(pkt);
            Admission::Queued
        } else {
            self.drops += 1;
            Admission::Dropped
        }
    }

    /// Completes the current transmission. Returns the departed packet and, if
    /// another one starts, its departure time.
    pub fn complete(&mut self, now: SimTime) -> (Packet, Option<SimTime>) {
        let done = self
            .in_service
            .take()
            .expect("departure event without a packet in service");
        let next = self.waiting.pop_front().map(|pkt| {
            let departs_at = now + self.serialization(pkt.size);
            self.in_service = Some(pkt);
            departs_at
        });
        (done, next)
    }
}
