//! ACK pacing shim between the socket and the congestion controller.
//!
//! The socket hands every processed acknowledgment to [`Pad`] together with its
//! rate sample. In passive mode they go straight through. When ACKs start showing
//! up earlier than the historical arrival rate λ allows, the buffer switches to
//! positive mode and releases them no faster than μ = kλ.

use std::collections::VecDeque;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::net::{Packet, RateSample};
use crate::sim::SimTime;

mod estimator;
mod probe;

pub use estimator::{resolve_highest_seq, RateEstimator};
pub use probe::ProbeRegistry;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PadConfig {
    pub k: f64,
    /// Rate-estimator window in round trips.
    pub w: f64,
    /// Fraction of the expected inter-ACK gap an ACK may be early by.
    pub guard_fraction: f64,
    /// Round trips of empty buffer before returning to passive mode.
    pub idle_reset_rtts: f64,
    /// Also treat packets the controller marks as probes as probe traffic.
    pub direct_probe_channel: bool,
    /// Keep the shim in the path but forward everything untouched.
    pub bypass: bool,
}

impl Default for PadConfig {
    fn default() -> Self {
        PadConfig {
            k: 1.025,
            w: 16.0,
            guard_fraction: 0.25,
            idle_reset_rtts: 1.0,
            direct_probe_channel: false,
            bypass: false,
        }
    }
}

impl PadConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.k > 1.0 && self.k.is_finite()) {
            return Err(format!("pad.k must be greater than 1, got {}", self.k));
        }
        if !(self.w >= 1.0 && self.w.is_finite()) {
            return Err(format!("pad.w must be at least 1, got {}", self.w));
        }
        if !(self.guard_fraction > 0.0 && self.guard_fraction < 1.0) {
            return Err(format!(
                "pad.guard_fraction must lie strictly between 0 and 1, got {}",
                self.guard_fraction
            ));
        }
        if !(self.idle_reset_rtts > 0.0 && self.idle_reset_rtts.is_finite()) {
            return Err(format!(
                "pad.idle_reset_rtts must be positive, got {}",
                self.idle_reset_rtts
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Passive,
    Positive,
}

/// A sample on its way to the controller.
#[derive(Clone, Debug)]
pub struct Forwarded {
    pub sample: RateSample,
    pub arrived: SimTime,
    pub probe: bool,
}

impl Forwarded {
    pub fn added_delay(&self, now: SimTime) -> Duration {
        now - self.arrived
    }
}

/// A grant timer the caller must schedule; stale generations are ignored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GrantTimer {
    pub at: SimTime,
    pub generation: u64,
}

#[derive(Debug, Default)]
pub struct PadOutput {
    /// Samples to hand to the controller now, in order.
    pub forwarded: Vec<Forwarded>,
    pub timer: Option<GrantTimer>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PadStats {
    pub acks_in: u64,
    pub acks_out: u64,
    pub delayed: u64,
    pub probe_passes: u64,
    pub to_positive: u64,
    pub to_passive: u64,
    pub overflow_flushes: u64,
    pub rto_flushes: u64,
    pub max_queue: usize,
    pub total_added_delay_s: f64,
    pub max_added_delay_s: f64,
}

pub struct Pad {
    config: PadConfig,
    estimator: RateEstimator,
    probes: ProbeRegistry,
    queue: VecDeque<Forwarded>,
    queued_bytes: u64,
    mode: Mode,
    last_forward: Option<SimTime>,
    last_grant: SimTime,
    empty_since: Option<SimTime>,
    generation: u64,
    armed: Option<SimTime>,
    stats: PadStats,
}

impl Pad {
    pub fn new(config: PadConfig) -> Self {
        Pad {
            config,
            estimator: RateEstimator::new(config.w),
            probes: ProbeRegistry::new(),
            queue: VecDeque::new(),
            queued_bytes: 0,
            mode: Mode::Passive,
            last_forward: None,
            last_grant: SimTime::ZERO,
            empty_since: None,
            generation: 0,
            armed: None,
            stats: PadStats::default(),
        }
    }

    pub fn config(&self) -> &PadConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// λ in bytes per second.
    pub fn lambda(&self) -> Option<f64> {
        self.estimator.lambda()
    }

    /// μ = kλ in bytes per second.
    pub fn mu(&self) -> Option<f64> {
        self.lambda().filter(|&l| l > 0.0).map(|l| self.config.k * l)
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn history_len(&self) -> usize {
        self.estimator.history_len()
    }

    pub fn probes(&self) -> &ProbeRegistry {
        &self.probes
    }

    pub fn stats(&self) -> PadStats {
        self.stats
    }

    pub fn on_packet_sent(&mut self, pkt: &Packet, now: SimTime, srtt: Option<Duration>) {
        if self.config.bypass {
            return;
        }
        let mu = self.mu();
        self.probes
            .on_packet_sent(pkt, now, srtt, mu, self.config.direct_probe_channel);
    }

    /// Takes an acknowledgment's sample from the socket at `now`.
    pub fn on_ack(&mut self, sample: RateSample, now: SimTime, srtt: Option<Duration>) -> PadOutput {
        self.stats.acks_in += 1;
        let mut out = PadOutput::default();
        let entry = Forwarded {
            probe: false,
            sample,
            arrived: now,
        };
        if self.config.bypass {
            self.emit(entry, now, &mut out);
            return out;
        }

        let highest = resolve_highest_seq(&entry.sample.ack);
        let probe = self.probes.matches(highest);
        self.probes.prune(entry.sample.ack.cum_ack);
        if !entry.sample.is_app_limited {
            self.estimator.update(now, highest, srtt);
        }
        let entry = Forwarded { probe, ..entry };

        if self.mode == Mode::Positive && self.queue.is_empty() {
            let idle = srtt.map_or(Duration::ZERO, |r| r.mul_f64(self.config.idle_reset_rtts));
            if self.empty_since.is_some_and(|t| now >= t + idle) {
                self.set_mode(Mode::Passive);
            }
        }

        if probe {
            self.stats.probe_passes += 1;
            self.flush(now, &mut out);
            self.emit(entry, now, &mut out);
            self.last_grant = now;
            self.disarm();
            return out;
        }

        if self.mode == Mode::Passive {
            if self.is_early(&entry, now) {
                self.set_mode(Mode::Positive);
                self.last_grant = self.last_forward.unwrap_or(now);
            } else {
                self.emit(entry, now, &mut out);
                return out;
            }
        }

        self.enqueue(entry);
        if let Some(mu) = self.mu() {
            let limit = 2.0 * mu / self.config.k * srtt.map_or(0.0, |r| r.as_secs_f64());
            if limit > 0.0 && self.queued_bytes as f64 > limit {
                self.stats.overflow_flushes += 1;
                self.flush(now, &mut out);
                self.set_mode(Mode::Passive);
                self.disarm();
                return out;
            }
        }
        self.release(now, &mut out);
        if !self.queue.is_empty() {
            self.empty_since = None;
        }
        out
    }

    /// Whether `entry` arrives more than the guard fraction ahead of the schedule λ implies.
    fn is_early(&self, entry: &Forwarded, now: SimTime) -> bool {
        let (Some(lambda), Some(prev)) = (self.lambda(), self.last_forward) else {
            return false;
        };
        if lambda <= 0.0 {
            return false;
        }
        let gap = entry.sample.ack.acked_new_bytes as f64 / lambda;
        let threshold = prev + Duration::from_secs_f64(gap * (1.0 - self.config.guard_fraction));
        now < threshold
    }

    /// Fires a grant timer armed earlier.
    pub fn on_grant_timer(&mut self, now: SimTime, generation: u64) -> PadOutput {
        let mut out = PadOutput::default();
        if generation != self.generation || self.armed != Some(now) {
            return out;
        }
        self.armed = None;
        self.release(now, &mut out);
        out
    }

    /// Forwards everything buffered and forgets all history.
    pub fn on_rto(&mut self, now: SimTime) -> Vec<Forwarded> {
        let mut out = PadOutput::default();
        if !self.queue.is_empty() {
            self.stats.rto_flushes += 1;
        }
        self.flush(now, &mut out);
        self.disarm();
        self.estimator.clear();
        self.probes.clear();
        self.set_mode(Mode::Passive);
        self.last_forward = None;
        self.empty_since = None;
        out.forwarded
    }

    fn next_grant_time(&self) -> Option<SimTime> {
        let head = self.queue.front()?;
        let due = match self.mu() {
            Some(mu) => {
                self.last_grant
                    + Duration::from_secs_f64(head.sample.ack.acked_new_bytes as f64 / mu)
            }
            None => self.last_grant,
        };
        Some(due.max(head.arrived))
    }

    fn release(&mut self, now: SimTime, out: &mut PadOutput) {
        while let Some(due) = self.next_grant_time() {
            if due > now {
                if self.armed != Some(due) {
                    self.generation += 1;
                    self.armed = Some(due);
                    out.timer = Some(GrantTimer {
                        at: due,
                        generation: self.generation,
                    });
                }
                return;
            }
            let entry = self.dequeue();
            self.last_grant = due;
            self.emit(entry, now, out);
        }
        self.disarm();
    }

    fn flush(&mut self, now: SimTime, out: &mut PadOutput) {
        while !self.queue.is_empty() {
            let entry = self.dequeue();
            self.emit(entry, now, out);
        }
        self.last_grant = now;
    }

    fn disarm(&mut self) {
        if self.armed.take().is_some() {
            self.generation += 1;
        }
    }

    fn enqueue(&mut self, entry: Forwarded) {
        self.queued_bytes += entry.sample.ack.acked_new_bytes as u64;
        self.queue.push_back(entry);
        self.stats.max_queue = self.stats.max_queue.max(self.queue.len());
    }

    fn dequeue(&mut self) -> Forwarded {
        let entry = self.queue.pop_front().expect("non-empty queue");
        self.queued_bytes -= entry.sample.ack.acked_new_bytes as u64;
        entry
    }

    fn emit(&mut self, entry: Forwarded, now: SimTime, out: &mut PadOutput) {
        let delay = entry.added_delay(now).as_secs_f64();
        if delay > 0.0 {
            self.stats.delayed += 1;
            self.stats.total_added_delay_s += delay;
            self.stats.max_added_delay_s = self.stats.max_added_delay_s.max(delay);
        }
        self.stats.acks_out += 1;
        self.last_forward = Some(now);
        if self.queue.is_empty() && self.empty_since.is_none() {
            self.empty_since = Some(now);
        }
        out.forwarded.push(entry);
    }

    fn set_mode(&mut self, mode: Mode) {
        if self.mode != mode {
            match mode {
                Mode::Positive => self.stats.to_positive += 1,
                Mode::Passive => self.stats.to_passive += 1,
            }
            self.mode = mode;
        }
    }
}
