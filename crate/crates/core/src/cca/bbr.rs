//! BBR version 1: windowed-max bottleneck bandwidth, windowed-min round-trip
//! propagation time, and an eight-phase pacing gain cycle.

use std::ops::Range;
use std::time::Duration;

use super::filter::WindowedFilter;
use super::{CongestionControl, SenderView, INITIAL_CWND_SEGMENTS, MIN_CWND_SEGMENTS};
use crate::net::RateSample;
use crate::sim::{duration_nanos, RngStream, SimTime};

pub const BBR_GAIN_CYCLE: [f64; 8] = [1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];

/// 2/ln(2): the smallest gain that doubles the sending rate every round.
const HIGH_GAIN: f64 = 2.885;
const CWND_GAIN: f64 = 2.0;
const BTL_BW_WINDOW_ROUNDS: u64 = 10;
const RT_PROP_WINDOW: Duration = Duration::from_secs(10);
const PROBE_RTT_DURATION: Duration = Duration::from_millis(200);
const FULL_BW_GROWTH: f64 = 1.25;
const FULL_BW_ROUNDS: u32 = 3;
/// Segments of headroom added to every window target.
const QUANTA_SEGMENTS: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BbrMode {
    Startup,
    Drain,
    ProbeBw,
    ProbeRtt,
}

pub struct Bbr {
    mss: u64,
    rng: RngStream,
    mode: BbrMode,
    btl_bw: WindowedFilter<f64>,
    rt_prop: WindowedFilter<u64>,
    rt_prop_stamp: SimTime,
    pacing_gain: f64,
    cwnd_gain: f64,
    cycle_index: usize,
    cycle_stamp: SimTime,
    round_count: u64,
    next_round_delivered: u64,
    round_start: bool,
    full_bw: f64,
    full_bw_count: u32,
    full_bw_reached: bool,
    cwnd: u64,
    prior_cwnd: u64,
    packet_conservation: bool,
    prev_in_recovery: bool,
    probe_rtt_done: Option<SimTime>,
    probe_rtt_round_done: bool,
    pacing_rate: f64,
    has_seen_rtt: bool,
}

impl Bbr {
    pub fn new(mss: u32, rng: RngStream) -> Self {
        let mss = mss as u64;
        let cwnd = INITIAL_CWND_SEGMENTS * mss;
        Bbr {
            mss,
            rng,
            mode: BbrMode::Startup,
            btl_bw: WindowedFilter::max(BTL_BW_WINDOW_ROUNDS),
            rt_prop: WindowedFilter::min(duration_nanos(RT_PROP_WINDOW)),
            rt_prop_stamp: SimTime::ZERO,
            pacing_gain: HIGH_GAIN,
            cwnd_gain: HIGH_GAIN,
            cycle_index: 0,
            cycle_stamp: SimTime::ZERO,
            round_count: 0,
            next_round_delivered: 0,
            round_start: false,
            full_bw: 0.0,
            full_bw_count: 0,
            full_bw_reached: false,
            cwnd,
            prior_cwnd: cwnd,
            packet_conservation: false,
            prev_in_recovery: false,
            probe_rtt_done: None,
            probe_rtt_round_done: false,
            // Nominal 1 ms round trip until a real one is measured.
            pacing_rate: HIGH_GAIN * cwnd as f64 * 8.0 / 1e-3,
            has_seen_rtt: false,
        }
    }

    pub fn mode(&self) -> BbrMode {
        self.mode
    }

    /// Bottleneck bandwidth estimate in bits per second.
    pub fn btl_bw(&self) -> f64 {
        self.btl_bw.get().unwrap_or(0.0)
    }

    pub fn rt_prop(&self) -> Option<Duration> {
        self.rt_prop.get().map(Duration::from_nanos)
    }

    pub fn round_count(&self) -> u64 {
        self.round_count
    }

    pub fn full_bw_reached(&self) -> bool {
        self.full_bw_reached
    }

    fn min_cwnd(&self) -> u64 {
        MIN_CWND_SEGMENTS * self.mss
    }

    fn bdp(&self, gain: f64) -> Option<u64> {
        let bw = self.btl_bw.get()?;
        let rtt = self.rt_prop()?;
        Some((gain * bw * rtt.as_secs_f64() / 8.0) as u64)
    }

    fn inflight_target(&self, gain: f64) -> u64 {
        match self.bdp(gain) {
            Some(bdp) => bdp + QUANTA_SEGMENTS * self.mss,
            None => INITIAL_CWND_SEGMENTS * self.mss,
        }
    }

    fn save_cwnd(&mut self) {
        self.prior_cwnd = if self.prev_in_recovery || self.mode == BbrMode::ProbeRtt {
            self.prior_cwnd.max(self.cwnd)
        } else {
            self.cwnd
        };
    }

    fn enter_startup(&mut self) {
        self.mode = BbrMode::Startup;
        self.pacing_gain = HIGH_GAIN;
        self.cwnd_gain = HIGH_GAIN;
    }

    fn enter_probe_bw(&mut self, now: SimTime) {
        self.mode = BbrMode::ProbeBw;
        self.cwnd_gain = CWND_GAIN;
        // Start anywhere but the draining phase; the advance below moves one step.
        self.cycle_index = BBR_GAIN_CYCLE.len() - 1 - self.rng.below(7) as usize;
        self.advance_cycle(now);
    }

    fn advance_cycle(&mut self, now: SimTime) {
        self.cycle_index = (self.cycle_index + 1) % BBR_GAIN_CYCLE.len();
        self.cycle_stamp = now;
        self.pacing_gain = BBR_GAIN_CYCLE[self.cycle_index];
    }

    fn is_next_cycle_phase(&self, sample: &RateSample, view: &SenderView) -> bool {
        let full_length = self
            .rt_prop()
            .is_some_and(|rt| view.now.saturating_since(self.cycle_stamp) > rt);
        if self.pacing_gain > 1.0 {
            full_length
                && (sample.newly_lost > 0 || view.in_flight >= self.inflight_target(self.pacing_gain))
        } else if self.pacing_gain < 1.0 {
            full_length || view.in_flight <= self.inflight_target(1.0)
        } else {
            full_length
        }
    }

    fn check_full_bw_reached(&mut self, sample: &RateSample) {
        if self.full_bw_reached || !self.round_start || sample.is_app_limited {
            return;
        }
        let bw = self.btl_bw();
        if bw >= self.full_bw * FULL_BW_GROWTH {
            self.full_bw = bw;
            self.full_bw_count = 0;
            return;
        }
        self.full_bw_count += 1;
        self.full_bw_reached = self.full_bw_count >= FULL_BW_ROUNDS;
    }

    fn update_rt_prop(&mut self, sample: &RateSample, view: &SenderView) {
        let now = view.now;
        if sample.newly_acked > 0 && !sample.rtt.is_zero() {
            let rtt = duration_nanos(sample.rtt);
            if self.rt_prop.get().is_none_or(|m| rtt <= m) {
                self.rt_prop_stamp = now;
            }
            self.rt_prop.update(now.as_nanos(), rtt);
        }
        let expired = now.saturating_since(self.rt_prop_stamp) > RT_PROP_WINDOW;
        if expired && self.mode != BbrMode::ProbeRtt && self.rt_prop.get().is_some() {
            self.save_cwnd();
            self.mode = BbrMode::ProbeRtt;
            self.pacing_gain = 1.0;
            self.cwnd_gain = 1.0;
            self.probe_rtt_done = None;
        }
        if self.mode != BbrMode::ProbeRtt {
            return;
        }
        match self.probe_rtt_done {
            None if view.in_flight <= self.min_cwnd() => {
                self.probe_rtt_done = Some(now + PROBE_RTT_DURATION);
                self.probe_rtt_round_done = false;
                self.next_round_delivered = view.delivered;
            }
            None => {}
            Some(done) => {
                if self.round_start {
                    self.probe_rtt_round_done = true;
                }
                if self.probe_rtt_round_done && now >= done {
                    self.rt_prop_stamp = now;
                    self.cwnd = self.cwnd.max(self.prior_cwnd);
                    if self.full_bw_reached {
                        self.enter_probe_bw(now);
                    } else {
                        self.enter_startup();
                    }
                }
            }
        }
    }

    fn set_pacing_rate(&mut self, view: &SenderView) {
        let Some(bw) = self.btl_bw.get() else {
            if !self.has_seen_rtt {
                if let Some(srtt) = view.srtt {
                    self.has_seen_rtt = true;
                    self.pacing_rate =
                        HIGH_GAIN * self.cwnd as f64 * 8.0 / srtt.as_secs_f64().max(1e-6);
                }
            }
            return;
        };
        let rate = self.pacing_gain * bw;
        if rate > 0.0 && (self.full_bw_reached || rate > self.pacing_rate) {
            self.pacing_rate = rate;
        }
    }

    fn set_cwnd(&mut self, sample: &RateSample, view: &SenderView) {
        let acked = sample.newly_acked;
        let target = self.inflight_target(self.cwnd_gain);
        let mut cwnd = self.cwnd;
        if sample.newly_lost > 0 {
            cwnd = cwnd.saturating_sub(sample.newly_lost).max(self.mss);
        }
        if view.in_recovery && !self.prev_in_recovery {
            self.packet_conservation = true;
            self.next_round_delivered = view.delivered;
            cwnd = view.in_flight + acked;
        } else if !view.in_recovery && self.prev_in_recovery {
            cwnd = cwnd.max(self.prior_cwnd);
            self.packet_conservation = false;
        }
        self.prev_in_recovery = view.in_recovery;

        if self.packet_conservation {
            cwnd = cwnd.max(view.in_flight + acked);
        } else if self.full_bw_reached {
            cwnd = (cwnd + acked).min(target);
        } else if cwnd < target || view.delivered < INITIAL_CWND_SEGMENTS * self.mss {
            cwnd += acked;
        }
        cwnd = cwnd.max(self.min_cwnd());
        if self.mode == BbrMode::ProbeRtt {
            cwnd = cwnd.min(self.min_cwnd());
        }
        self.cwnd = cwnd;
    }
}

impl CongestionControl for Bbr {
    fn name(&self) -> &'static str {
        "bbr"
    }

    fn on_ack(&mut self, sample: &RateSample, view: &SenderView) {
        self.round_start = false;
        if sample.delivered_bytes > 0 && sample.prior_delivered >= self.next_round_delivered {
            self.next_round_delivered = view.delivered;
            self.round_count += 1;
            self.round_start = true;
            self.packet_conservation = false;
        }

        if let Some(bw) = sample.delivery_rate_bps() {
            if !sample.is_app_limited {
                self.btl_bw.update(self.round_count, bw);
            }
        }

        if self.mode == BbrMode::ProbeBw && self.is_next_cycle_phase(sample, view) {
            self.advance_cycle(view.now);
        }

        self.check_full_bw_reached(sample);
        if self.mode == BbrMode::Startup && self.full_bw_reached {
            self.mode = BbrMode::Drain;
            self.pacing_gain = 1.0 / HIGH_GAIN;
            self.cwnd_gain = HIGH_GAIN;
        }
        if self.mode == BbrMode::Drain && view.in_flight <= self.inflight_target(1.0) {
            self.enter_probe_bw(view.now);
        }

        self.update_rt_prop(sample, view);
        self.set_pacing_rate(view);
        self.set_cwnd(sample, view);
    }

    fn on_loss_detected(&mut self, _lost: Range<u64>, view: &SenderView) {
        self.save_cwnd();
        self.prev_in_recovery = true;
        self.packet_conservation = true;
        self.next_round_delivered = view.delivered;
        self.cwnd = (view.in_flight + self.mss).max(self.min_cwnd());
    }

    fn on_rto(&mut self, _view: &SenderView) {
        self.save_cwnd();
        self.prev_in_recovery = true;
        self.packet_conservation = false;
        self.full_bw = 0.0;
        self.round_start = true;
        self.cwnd = self.min_cwnd();
    }

    fn pacing_rate(&self) -> f64 {
        self.pacing_rate
    }

    fn cwnd(&self) -> u64 {
        self.cwnd
    }

    fn pacing_gain(&self) -> f64 {
        self.pacing_gain
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{AckRecord, DeliveryRateEstimator};
    use arrayvec::ArrayVec;

    fn view(now: SimTime) -> SenderView {
        SenderView {
            now,
            mss: 1500,
            in_flight: 100 * 1500,
            delivered: 0,
            srtt: Some(Duration::from_millis(160)),
            min_rtt: Some(Duration::from_millis(160)),
            in_recovery: false,
        }
    }

    /// A valid sample of `bps` over one 160 ms round trip.
    fn sample(bps: f64, prior_delivered: u64, app_limited: bool) -> RateSample {
        let est = DeliveryRateEstimator::new();
        let ack = AckRecord {
            flow: 0,
            cum_ack: 0,
            sack_blocks: ArrayVec::new(),
            acked_new_bytes: 1500,
            gen_time: SimTime::ZERO,
            arrival_time: SimTime::ZERO,
            echo_send_time: SimTime::ZERO,
            echo_seq: 0,
        };
        let interval = Duration::from_millis(160);
        let mut s = est.draft(ack, interval, interval);
        s.has_anchor = true;
        s.prior_delivered = prior_delivered;
        s.newly_acked = 1500;
        s.delivered_bytes = (bps * interval.as_secs_f64() / 8.0).round() as u64;
        s.interval = interval;
        s.ack_elapsed = interval;
        s.is_app_limited = app_limited;
        s
    }

    #[test]
    fn bandwidth_is_windowed_max() {
        let mut bbr = Bbr::new(1500, RngStream::new(0, "bbr"));
        for (i, mbps) in [10.0, 10.5, 9.8].into_iter().enumerate() {
            bbr.on_ack(&sample(mbps * 1e6, 0, false), &view(SimTime::from_millis(i as u64)));
        }
        assert!((bbr.btl_bw() - 10.5e6).abs() < 1.0);
    }

    #[test]
    fn app_limited_samples_cannot_raise_estimate() {
        let mut bbr = Bbr::new(1500, RngStream::new(0, "bbr"));
        bbr.on_ack(&sample(10e6, 0, false), &view(SimTime::ZERO));
        bbr.on_ack(&sample(20e6, 0, true), &view(SimTime::from_millis(1)));
        assert!((bbr.btl_bw() - 10e6).abs() < 1.0);
        bbr.on_ack(&sample(9e6, 0, true), &view(SimTime::from_millis(2)));
        assert!((bbr.btl_bw() - 10e6).abs() < 1.0);
    }

    #[test]
    fn probe_gain_scales_pacing() {
        let mut bbr = Bbr::new(1500, RngStream::new(0, "bbr"));
        bbr.full_bw_reached = true;
        bbr.on_ack(&sample(10e6, 0, false), &view(SimTime::ZERO));
        bbr.mode = BbrMode::ProbeBw;
        bbr.cycle_index = 0;
        bbr.cycle_stamp = SimTime::ZERO;
        bbr.pacing_gain = BBR_GAIN_CYCLE[0];
        let mut v = view(SimTime::from_millis(1));
        v.in_flight = 0;
        bbr.on_ack(&sample(10e6, 0, false), &v);
        assert_eq!(bbr.pacing_gain(), 1.25);
        assert!((bbr.pacing_rate() - 12.5e6).abs() < 1.0);
    }

    #[test]
    fn window_is_twice_bdp_in_probe_bw() {
        let mut bbr = Bbr::new(1500, RngStream::new(0, "bbr"));
        bbr.full_bw_reached = true;
        bbr.mode = BbrMode::ProbeBw;
        bbr.cwnd_gain = CWND_GAIN;
        bbr.cwnd = 10_000_000;
        bbr.on_ack(&sample(10e6, 0, false), &view(SimTime::ZERO));
        // 2 * 10 Mbit/s * 160 ms = 400 kB, plus three segments of headroom
        assert_eq!(bbr.cwnd(), 400_000 + 3 * 1500);
    }

    #[test]
    fn startup_exits_after_three_flat_rounds() {
        let mut bbr = Bbr::new(1500, RngStream::new(0, "bbr"));
        let mut delivered = 0;
        for round in 0..6u64 {
            let mut v = view(SimTime::from_millis(round * 200));
            v.delivered = delivered;
            bbr.on_ack(&sample(10e6, delivered, false), &v);
            delivered += 200_000;
        }
        assert!(bbr.full_bw_reached());
        assert_ne!(bbr.mode(), BbrMode::Startup);
    }

    #[test]
    fn timeout_collapses_window_then_recovery_exit_restores_it() {
        let mut bbr = Bbr::new(1500, RngStream::new(0, "bbr"));
        bbr.cwnd = 300_000;
        bbr.on_rto(&view(SimTime::ZERO));
        assert_eq!(bbr.cwnd(), 4 * 1500);
        let mut v = view(SimTime::from_millis(1));
        v.in_flight = 0;
        bbr.on_ack(&sample(10e6, 0, false), &v);
        assert!(bbr.cwnd() >= 300_000);
    }
}
