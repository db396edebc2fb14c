use std::collections::{BTreeMap, VecDeque};
use std::time::Duration;

use crate::net::Packet;
use crate::sim::SimTime;

/// Sequence ranges sent while the controller was probing above the grant rate.
#[derive(Clone, Debug, Default)]
pub struct ProbeRegistry {
    ranges: BTreeMap<u64, u64>,
    open: bool,
    sent: VecDeque<(SimTime, u32)>,
    sent_bytes: u64,
}

impl ProbeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bytes per second sent over the trailing `window`.
    fn send_rate(&mut self, now: SimTime, size: u32, window: Duration) -> f64 {
        self.sent.push_back((now, size));
        self.sent_bytes += size as u64;
        while let Some(&(t, b)) = self.sent.front() {
            if t + window > now {
                break;
            }
            self.sent.pop_front();
            self.sent_bytes -= b as u64;
        }
        self.sent_bytes as f64 / window.as_secs_f64()
    }

    /// Observes an outgoing packet. `mu` is the grant rate in bytes per second.
    pub fn on_packet_sent(
        &mut self,
        pkt: &Packet,
        now: SimTime,
        rtt: Option<Duration>,
        mu: Option<f64>,
        direct_channel: bool,
    ) -> bool {
        let measured = match rtt {
            Some(rtt) if !rtt.is_zero() => Some(self.send_rate(now, pkt.size, rtt)),
            _ => None,
        };
        let above = matches!((measured, mu), (Some(rate), Some(mu)) if rate > mu);
        let probing = above || (direct_channel && pkt.probe_marked);
        if probing {
            self.insert(pkt.seq, pkt.end());
        }
        self.open = probing;
        probing
    }

    fn insert(&mut self, mut lo: u64, mut hi: u64) {
        if let Some((&s, &e)) = self.ranges.range(..=lo).next_back() {
            if e >= lo {
                lo = s;
                hi = hi.max(e);
            }
        }
        let absorbed: Vec<u64> = self.ranges.range(lo..=hi).map(|(&s, _)| s).collect();
        for s in absorbed {
            hi = hi.max(self.ranges.remove(&s).unwrap_or(hi));
        }
        self.ranges.insert(lo, hi);
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    /// Whether the byte just below `highest` was sent while probing.
    pub fn matches(&self, highest: u64) -> bool {
        let Some(byte) = highest.checked_sub(1) else {
            return false;
        };
        self.ranges
            .range(..=byte)
            .next_back()
            .is_some_and(|(_, &e)| byte < e)
    }

    /// Forgets ranges wholly below the cumulative acknowledgment.
    pub fn prune(&mut self, cum_ack: u64) {
        while let Some((&s, &e)) = self.ranges.first_key_value() {
            if e > cum_ack {
                break;
            }
            self.ranges.remove(&s);
        }
    }

    pub fn ranges(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.ranges.iter().map(|(&s, &e)| (s, e))
    }

    pub fn clear(&mut self) {
        self.ranges.clear();
        self.open = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(seq: u64, probe: bool) -> Packet {
        Packet {
            flow: 0,
            seq,
            size: 1500,
            send_time: SimTime::ZERO,
            is_retransmission: false,
            probe_marked: probe,
        }
    }

    const RTT: Duration = Duration::from_millis(160);
    const MU: f64 = 10.25e6 / 8.0;

    /// Sends `n` packets starting at `seq0` paced at `bps`, returning the end time.
    fn send_at(reg: &mut ProbeRegistry, t0: SimTime, seq0: u64, n: u64, bps: f64) -> SimTime {
        let gap = crate::sim::transmission_time(1500, bps);
        let mut t = t0;
        for i in 0..n {
            reg.on_packet_sent(&pkt(seq0 + i * 1500, false), t, Some(RTT), Some(MU), false);
            t += gap;
        }
        t
    }

    #[test]
    fn steady_sending_below_mu_registers_nothing() {
        let mut reg = ProbeRegistry::new();
        send_at(&mut reg, SimTime::ZERO, 0, 1000, 10e6);
        assert_eq!(reg.ranges().count(), 0);
    }

    #[test]
    fn one_rtt_probe_yields_one_interval() {
        let mut reg = ProbeRegistry::new();
        // 0.96 s at 10 Mbps, then one RTT at 12.5 Mbps, then 0.75x to drain
        let t = send_at(&mut reg, SimTime::ZERO, 0, 800, 10e6);
        let t = send_at(&mut reg, t, 800 * 1500, 166, 12.5e6);
        send_at(&mut reg, t, 966 * 1500, 100, 7.5e6);
        let ranges: Vec<_> = reg.ranges().collect();
        assert_eq!(ranges.len(), 1);
        let (lo, hi) = ranges[0];
        assert!(lo >= 800 * 1500 && hi <= 1066 * 1500);
        assert!(reg.matches(900 * 1500));
        assert!(!reg.matches(700 * 1500));
    }

    #[test]
    fn direct_channel_registers_marked_packets() {
        let mut reg = ProbeRegistry::new();
        assert!(reg.on_packet_sent(&pkt(0, true), SimTime::ZERO, None, None, true));
        assert!(!reg.on_packet_sent(&pkt(1500, true), SimTime::ZERO, None, None, false));
        assert!(reg.matches(1500));
        assert!(!reg.matches(3000));
        assert!(!reg.matches(0));
    }

    #[test]
    fn ranges_merge_and_prune() {
        let mut reg = ProbeRegistry::new();
        reg.insert(0, 1500);
        reg.insert(3000, 4500);
        reg.insert(1500, 3000);
        assert_eq!(reg.ranges().collect::<Vec<_>>(), vec![(0, 4500)]);
        reg.insert(9000, 10500);
        reg.prune(4500);
        assert_eq!(reg.ranges().collect::<Vec<_>>(), vec![(9000, 10500)]);
    }
}
