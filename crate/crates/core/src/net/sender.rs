//! Sending side of a flow: segment scoreboard, SACK-based loss detection,
//! retransmission timeout, pacing and delivery-rate bookkeeping.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::time::Duration;

use super::packet::{AckRecord, FlowId, Packet, RateSample};
use super::rate::{DeliveryRateEstimator, TxSnapshot};
use crate::cca::{CongestionControl, SenderView};
use crate::sim::{transmission_time, SimTime};

/// SACKed segments above a hole before the hole is declared lost.
pub const DUP_THRESHOLD: usize = 3;
pub const MIN_RTO: Duration = Duration::from_millis(200);
pub const MAX_RTO: Duration = Duration::from_secs(60);
pub const INITIAL_RTO: Duration = Duration::from_secs(1);

#[derive(Clone, Copy, Debug, Default)]
pub struct RttEstimator {
    srtt: Option<Duration>,
    rttvar: Duration,
    min_rtt: Option<Duration>,
    latest: Option<Duration>,
}

impl RttEstimator {
    pub fn update(&mut self, rtt: Duration) {
        self.latest = Some(rtt);
        self.min_rtt = Some(self.min_rtt.map_or(rtt, |m| m.min(rtt)));
        match self.srtt {
            None => {
                self.srtt = Some(rtt);
                self.rttvar = rtt / 2;
            }
            Some(srtt) => {
                let err = srtt.abs_diff(rtt);
                self.rttvar = (self.rttvar * 3 + err) / 4;
                self.srtt = Some((srtt * 7 + rtt) / 8);
            }
        }
    }

    pub fn srtt(&self) -> Option<Duration> {
        self.srtt
    }

    pub fn min_rtt(&self) -> Option<Duration> {
        self.min_rtt
    }

    pub fn latest(&self) -> Option<Duration> {
        self.latest
    }

    pub fn rto(&self) -> Duration {
        match self.srtt {
            None => INITIAL_RTO,
            Some(srtt) => (srtt + self.rttvar * 4).clamp(MIN_RTO, MAX_RTO),
        }
    }
}

/// Where new payload comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AppSource {
    Backlogged,
    /// Data becomes available at a constant rate from `start`.
    ConstantRate { bits_per_sec: f64, start: SimTime },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SegState {
    InFlight,
    Sacked,
    Lost,
}

#[derive(Clone, Debug)]
struct Segment {
    size: u32,
    send_time: SimTime,
    tx: TxSnapshot,
    state: SegState,
    retransmitted: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SenderStats {
    pub packets_sent: u64,
    pub bytes_sent: u64,
    pub retransmissions: u64,
    pub fast_recoveries: u64,
    pub timeouts: u64,
    pub ignored_acks: u64,
}

#[derive(Debug, PartialEq)]
pub enum SendPoll {
    Send(Packet),
    /// Nothing may leave before this instant (pacing or application data).
    WaitUntil(SimTime),
    /// Window-limited or out of data; an ACK will unblock the sender.
    Blocked,
}

/// What processing one acknowledgment produced.
#[derive(Debug)]
pub struct AckOutcome {
    /// The delivery-rate sample, not yet observed by the controller.
    pub sample: RateSample,
    /// First range newly declared lost if this ACK started a recovery episode.
    pub loss_event: Option<Range<u64>>,
    pub recovery_exited: bool,
}

pub struct Sender {
    flow: FlowId,
    mss: u32,
    app: AppSource,
    next_seq: u64,
    snd_una: u64,
    segments: BTreeMap<u64, Segment>,
    lost: BTreeSet<u64>,
    in_flight: u64,
    sacked_segments: usize,
    rate: DeliveryRateEstimator,
    rtt: RttEstimator,
    rto_backoff: u32,
    rto_deadline: Option<SimTime>,
    recovery_point: Option<u64>,
    next_send_time: SimTime,
    /// Latest send time among delivered segments.
    newest_delivered_send: SimTime,
    stats: SenderStats,
}

impl Sender {
    pub fn new(flow: FlowId, mss: u32, app: AppSource) -> Self {
        Sender {
            flow,
            mss,
            app,
            next_seq: 0,
            snd_una: 0,
            segments: BTreeMap::new(),
            lost: BTreeSet::new(),
            in_flight: 0,
            sacked_segments: 0,
            rate: DeliveryRateEstimator::new(),
            rtt: RttEstimator::default(),
            rto_backoff: 0,
            rto_deadline: None,
            recovery_point: None,
            next_send_time: SimTime::ZERO,
            newest_delivered_send: SimTime::ZERO,
            stats: SenderStats::default(),
        }
    }

    pub fn flow(&self) -> FlowId {
        self.flow
    }

    pub fn mss(&self) -> u32 {
        self.mss
    }

    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn in_flight(&self) -> u64 {
        self.in_flight
    }

    pub fn rtt(&self) -> &RttEstimator {
        &self.rtt
    }

    pub fn stats(&self) -> SenderStats {
        self.stats
    }

    pub fn in_recovery(&self) -> bool {
        self.recovery_point.is_some()
    }

    pub fn rto_deadline(&self) -> Option<SimTime> {
        self.rto_deadline
    }

    pub fn view(&self, now: SimTime) -> SenderView {
        SenderView {
            now,
            mss: self.mss,
            in_flight: self.in_flight,
            delivered: self.rate.delivered(),
            srtt: self.rtt.srtt(),
            min_rtt: self.rtt.min_rtt(),
            in_recovery: self.in_recovery(),
        }
    }

    fn current_rto(&self) -> Duration {
        (self.rtt.rto() * 2u32.pow(self.rto_backoff.min(16))).min(MAX_RTO)
    }

    fn app_available(&self, now: SimTime) -> u64 {
        match self.app {
            AppSource::Backlogged => u64::MAX,
            AppSource::ConstantRate {
                bits_per_sec,
                start,
            } => {
                let produced = (bits_per_sec * now.saturating_since(start).as_secs_f64() / 8.0) as u64;
                produced.saturating_sub(self.next_seq)
            }
        }
    }

    fn app_ready_at(&self) -> Option<SimTime> {
        match self.app {
            AppSource::Backlogged => None,
            AppSource::ConstantRate {
                bits_per_sec,
                start,
            } => Some(start + transmission_time(self.next_seq + self.mss as u64, bits_per_sec)),
        }
    }

    /// Decides whether a packet may leave now.
    pub fn poll_send(&mut self, now: SimTime, cca: &dyn CongestionControl) -> SendPoll {
        if now < self.next_send_time {
            return SendPoll::WaitUntil(self.next_send_time);
        }
        if self.in_flight > 0 && self.in_flight + self.mss as u64 > cca.cwnd() {
            return SendPoll::Blocked;
        }
        let nothing_in_flight = self.in_flight == 0;
        let (seq, size, is_retransmission) = if let Some(&seq) = self.lost.iter().next() {
            (seq, self.segments[&seq].size, true)
        } else if self.app_available(now) >= self.mss as u64 {
            (self.next_seq, self.mss, false)
        } else {
            self.rate.mark_app_limited(self.in_flight);
            return match self.app_ready_at() {
                Some(t) if t > now => SendPoll::WaitUntil(t),
                _ => SendPoll::Blocked,
            };
        };

        let tx = self.rate.on_send(now, nothing_in_flight);
        if is_retransmission {
            self.lost.remove(&seq);
            let seg = self.segments.get_mut(&seq).expect("lost segment tracked");
            seg.state = SegState::InFlight;
            seg.retransmitted = true;
            seg.send_time = now;
            seg.tx = tx;
            self.stats.retransmissions += 1;
        } else {
            self.segments.insert(
                seq,
                Segment {
                    size,
                    send_time: now,
                    tx,
                    state: SegState::InFlight,
                    retransmitted: false,
                },
            );
            self.next_seq += size as u64;
        }
        self.in_flight += size as u64;
        self.stats.packets_sent += 1;
        self.stats.bytes_sent += size as u64;
        self.next_send_time = now + transmission_time(size as u64, cca.pacing_rate());
        if self.rto_deadline.is_none() {
            self.rto_deadline = Some(now + self.current_rto());
        }
        SendPoll::Send(Packet {
            flow: self.flow,
            seq,
            size,
            send_time: now,
            is_retransmission,
            probe_marked: cca.pacing_gain() > 1.0,
        })
    }

    fn mark_delivered(&mut self, seq: u64, sample: &mut RateSample) {
        let seg = &self.segments[&seq];
        match seg.state {
            SegState::Sacked => return,
            SegState::InFlight => self.in_flight -= seg.size as u64,
            SegState::Lost => {
                self.lost.remove(&seq);
            }
        }
        self.newest_delivered_send = self.newest_delivered_send.max(seg.send_time);
        self.rate
            .on_delivered(sample, &seg.tx, seg.send_time, seg.size as u64);
    }

    /// Processes an acknowledgment arriving at the socket at `now`.
    ///
    /// Returns `None` for acknowledgments that match nothing this sender sent.
    pub fn on_ack(&mut self, ack: &AckRecord, now: SimTime) -> Option<AckOutcome> {
        let sack_in_range = ack
            .sack_blocks
            .iter()
            .all(|b| b.end <= self.next_seq && b.start >= ack.cum_ack);
        if ack.flow != self.flow || ack.cum_ack > self.next_seq || !sack_in_range {
            self.stats.ignored_acks += 1;
            return None;
        }

        if ack.acked_new_bytes > 0 {
            self.rtt.update(now.saturating_since(ack.echo_send_time));
        }
        let rtt = self.rtt.latest().unwrap_or_default();
        let mut sample = self
            .rate
            .draft(ack.clone(), rtt, self.rtt.min_rtt().unwrap_or_default());

        if ack.cum_ack > self.snd_una {
            let acked: Vec<u64> = self.segments.range(..ack.cum_ack).map(|(&s, _)| s).collect();
            for seq in acked {
                self.mark_delivered(seq, &mut sample);
                if self.segments.remove(&seq).map(|s| s.state) == Some(SegState::Sacked) {
                    self.sacked_segments -= 1;
                }
            }
            self.snd_una = ack.cum_ack;
            self.rto_backoff = 0;
            self.rto_deadline = (self.snd_una < self.next_seq).then(|| now + self.current_rto());
        }

        for block in &ack.sack_blocks {
            let hits: Vec<u64> = self
                .segments
                .range(block.start..block.end)
                .filter(|(&s, seg)| seg.state != SegState::Sacked && s + seg.size as u64 <= block.end)
                .map(|(&s, _)| s)
                .collect();
            for seq in hits {
                self.mark_delivered(seq, &mut sample);
                self.segments.get_mut(&seq).expect("segment").state = SegState::Sacked;
                self.sacked_segments += 1;
            }
        }

        let newly_lost = self.detect_losses();
        sample.newly_lost = newly_lost.iter().map(|r| r.end - r.start).sum();
        let mut loss_event = None;
        if let Some(first) = newly_lost.first() {
            if self.recovery_point.is_none() {
                self.recovery_point = Some(self.next_seq);
                self.stats.fast_recoveries += 1;
                loss_event = Some(first.clone());
            }
        }
        let mut recovery_exited = false;
        if let Some(point) = self.recovery_point {
            if self.snd_una >= point {
                self.recovery_point = None;
                recovery_exited = true;
            }
        }

        Some(AckOutcome {
            sample,
            loss_event,
            recovery_exited,
        })
    }

    /// Marks as lost every un-SACKed original transmission with at least
    /// [`DUP_THRESHOLD`] SACKed segments above it, and every retransmission
    /// that a later-sent segment has overtaken. The path never reorders, so
    /// the latter is unambiguous.
    fn detect_losses(&mut self) -> Vec<Range<u64>> {
        if self.sacked_segments == 0 {
            return Vec::new();
        }
        let newest = self.newest_delivered_send;
        let mut sacked_above = 0;
        let mut newly_lost = Vec::new();
        for (&seq, seg) in self.segments.iter_mut().rev() {
            let lost = if seg.retransmitted {
                seg.send_time < newest
            } else {
                sacked_above >= DUP_THRESHOLD
            };
            match seg.state {
                SegState::Sacked => sacked_above += 1,
                SegState::InFlight if lost => {
                    seg.state = SegState::Lost;
                    self.in_flight -= seg.size as u64;
                    self.lost.insert(seq);
                    newly_lost.push(seq..seq + seg.size as u64);
                }
                _ => {}
            }
        }
        newly_lost.reverse();
        newly_lost
    }

    /// Hands `sample` to the controller's view of the connection at `observed_at`.
    pub fn complete_sample(&mut self, sample: &mut RateSample, observed_at: SimTime) {
        self.rate.complete(sample, observed_at);
    }

    /// Fires the retransmission timer if `now` is its deadline. Every outstanding
    /// segment not SACKed is marked lost and recovery runs until `next_seq` is acked.
    pub fn on_rto(&mut self, now: SimTime) -> bool {
        if self.rto_deadline != Some(now) {
            return false;
        }
        // The timer covers the oldest outstanding transmission; a head that was
        // retransmitted recently gets a full timeout from its last send.
        let head_sent = self
            .segments
            .values()
            .find(|seg| seg.state != SegState::Sacked)
            .map(|seg| seg.send_time);
        if let Some(sent) = head_sent {
            let deadline = sent + self.current_rto();
            if deadline > now {
                self.rto_deadline = Some(deadline);
                return false;
            }
        }
        for (&seq, seg) in self.segments.iter_mut() {
            if seg.state == SegState::InFlight {
                seg.state = SegState::Lost;
                self.lost.insert(seq);
            }
        }
        self.in_flight = 0;
        self.recovery_point = Some(self.next_seq);
        self.rto_backoff += 1;
        self.stats.timeouts += 1;
        self.next_send_time = now;
        self.rto_deadline = Some(now + self.current_rto());
        true
    }

    /// Bytes acknowledged cumulatively never exceed bytes handed to the network.
    pub fn check_invariants(&self) {
        debug_assert!(self.snd_una <= self.next_seq);
        debug_assert_eq!(
            self.in_flight,
            self.segments
                .values()
                .filter(|s| s.state == SegState::InFlight)
                .map(|s| s.size as u64)
                .sum::<u64>()
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::{CcaKind, CongestionControl};
    use crate::net::Receiver;
    use crate::sim::RngStream;

    fn cubic() -> Box<dyn CongestionControl> {
        CcaKind::Cubic.build(1500, RngStream::new(0, "cca"))
    }

    fn send(s: &mut Sender, cca: &dyn CongestionControl, now: SimTime) -> Packet {
        match s.poll_send(now, cca) {
            SendPoll::Send(p) => p,
            other => panic!("expected a send, got {other:?}"),
        }
    }

    #[test]
    fn rto_follows_rfc6298() {
        let mut r = RttEstimator::default();
        assert_eq!(r.rto(), INITIAL_RTO);
        r.update(Duration::from_millis(160));
        // 160 + 4 * 80
        assert_eq!(r.rto(), Duration::from_millis(480));
        let mut fast = RttEstimator::default();
        fast.update(Duration::from_millis(10));
        fast.update(Duration::from_millis(10));
        assert_eq!(fast.rto(), MIN_RTO);
    }

    #[test]
    fn sack_hole_triggers_fast_retransmit() {
        let cca = cubic();
        let mut s = Sender::new(0, 1500, AppSource::Backlogged);
        let mut rx = Receiver::new(0);
        let mut now = SimTime::ZERO;
        let pkts: Vec<Packet> = (0..6)
            .map(|_| {
                now += Duration::from_millis(10);
                send(&mut s, cca.as_ref(), now)
            })
            .collect();
        assert_eq!(s.in_flight(), 9000);
        let t = SimTime::from_millis(100);
        // segment 1 is lost in the network
        let mut events = Vec::new();
        for p in pkts.iter().filter(|p| p.seq != 1500) {
            let ack = rx.on_data(p, t);
            events.push(s.on_ack(&ack, t).unwrap());
        }
        assert_eq!(s.snd_una(), 1500);
        let starts: Vec<_> = events.iter().filter_map(|e| e.loss_event.clone()).collect();
        assert_eq!(starts, vec![1500..3000]);
        assert!(s.in_recovery());
        assert_eq!(s.in_flight(), 0);
        s.check_invariants();

        let rtx = send(&mut s, cca.as_ref(), t);
        assert!(rtx.is_retransmission);
        assert_eq!(rtx.seq, 1500);
        let ack = rx.on_data(&rtx, SimTime::from_millis(200));
        let out = s.on_ack(&ack, SimTime::from_millis(200)).unwrap();
        assert!(out.recovery_exited);
        assert_eq!(s.snd_una(), 9000);
        assert_eq!(s.in_flight(), 0);
    }

    #[test]
    fn rto_marks_everything_lost() {
        let cca = cubic();
        let mut s = Sender::new(0, 1500, AppSource::Backlogged);
        for i in 0..4 {
            send(&mut s, cca.as_ref(), SimTime::from_millis(i * 10));
        }
        let deadline = s.rto_deadline().unwrap();
        assert_eq!(deadline, SimTime::ZERO + INITIAL_RTO);
        assert!(!s.on_rto(SimTime::from_millis(5)));
        assert!(s.on_rto(deadline));
        assert_eq!(s.in_flight(), 0);
        assert!(s.in_recovery());
        let first = send(&mut s, cca.as_ref(), deadline);
        assert!(first.is_retransmission);
        assert_eq!(first.seq, 0);
        assert_eq!(s.stats().timeouts, 1);
        s.check_invariants();
    }

    #[test]
    fn unknown_acks_are_ignored() {
        let mut s = Sender::new(0, 1500, AppSource::Backlogged);
        let mut rx = Receiver::new(0);
        let bogus = Packet {
            flow: 0,
            seq: 0,
            size: 1500,
            send_time: SimTime::ZERO,
            is_retransmission: false,
            probe_marked: false,
        };
        let ack = rx.on_data(&bogus, SimTime::ZERO);
        assert!(s.on_ack(&ack, SimTime::ZERO).is_none());
        assert_eq!(s.stats().ignored_acks, 1);
    }

    #[test]
    fn window_blocks_sending() {
        let cca = cubic();
        let mut s = Sender::new(0, 1500, AppSource::Backlogged);
        let mut now = SimTime::ZERO;
        let mut sent = 0;
        loop {
            match s.poll_send(now, cca.as_ref()) {
                SendPoll::Send(_) => sent += 1,
                SendPoll::WaitUntil(t) => now = t,
                SendPoll::Blocked => break,
            }
        }
        assert_eq!(sent * 1500, cca.cwnd());
    }

    #[test]
    fn app_limited_source_waits_for_data() {
        let cca = cubic();
        let app = AppSource::ConstantRate {
            bits_per_sec: 1.2e6,
            start: SimTime::ZERO,
        };
        let mut s = Sender::new(0, 1500, app);
        assert_eq!(
            s.poll_send(SimTime::ZERO, cca.as_ref()),
            SendPoll::WaitUntil(SimTime::from_millis(10))
        );
        assert!(matches!(
            s.poll_send(SimTime::from_millis(10), cca.as_ref()),
            SendPoll::Send(_)
        ));
    }
}
