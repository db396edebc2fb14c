//! Congestion controllers behind one callback interface.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::time::Duration;

use crate::net::{Packet, RateSample};
use crate::sim::{RngStream, SimTime};

mod bbr;
mod copa;
mod cubic;
pub mod filter;
mod vegas;

pub use bbr::{Bbr, BbrMode, BBR_GAIN_CYCLE};
pub use copa::{copa_target_rate, Copa};
pub use cubic::{cubic_k, cubic_window, Cubic};
pub use vegas::{vegas_adjustment, vegas_diff, Adjustment, Vegas};

/// Smallest congestion window any controller may report, in segments.
pub const MIN_CWND_SEGMENTS: u64 = 4;
pub const INITIAL_CWND_SEGMENTS: u64 = 10;

/// Sender state visible to a controller at callback time.
#[derive(Clone, Copy, Debug)]
pub struct SenderView {
    pub now: SimTime,
    pub mss: u32,
    pub in_flight: u64,
    /// Bytes delivered as observed by the controller.
    pub delivered: u64,
    pub srtt: Option<Duration>,
    pub min_rtt: Option<Duration>,
    /// Fast recovery or post-timeout loss recovery is in progress.
    pub in_recovery: bool,
}

impl SenderView {
    pub fn min_cwnd(&self) -> u64 {
        MIN_CWND_SEGMENTS * self.mss as u64
    }
}

pub trait CongestionControl: Send {
    fn name(&self) -> &'static str;

    fn on_packet_sent(&mut self, _pkt: &Packet, _view: &SenderView) {}

    fn on_ack(&mut self, sample: &RateSample, view: &SenderView);

    /// Start of a fast-recovery episode; `lost` is the first range declared lost.
    fn on_loss_detected(&mut self, lost: Range<u64>, view: &SenderView);

    fn on_rto(&mut self, view: &SenderView);

    /// Bits per second. Always positive.
    fn pacing_rate(&self) -> f64;

    /// Bytes. Never below [`MIN_CWND_SEGMENTS`] segments.
    fn cwnd(&self) -> u64;

    fn pacing_gain(&self) -> f64 {
        1.0
    }
}

/// Rate a window-based controller paces at: `factor · cwnd / srtt`.
pub(crate) fn window_pacing_rate(cwnd_bytes: f64, srtt: Option<Duration>, factor: f64) -> f64 {
    let srtt = srtt.map_or(0.1, |d| d.as_secs_f64().max(1e-4));
    (factor * cwnd_bytes * 8.0 / srtt).max(1e3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CcaKind {
    Bbr,
    Cubic,
    Vegas,
    Copa,
}

impl CcaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CcaKind::Bbr => "bbr",
            CcaKind::Cubic => "cubic",
            CcaKind::Vegas => "vegas",
            CcaKind::Copa => "copa",
        }
    }

    pub fn build(self, mss: u32, rng: RngStream) -> Box<dyn CongestionControl> {
        match self {
            CcaKind::Bbr => Box::new(Bbr::new(mss, rng)),
            CcaKind::Cubic => Box::new(Cubic::new(mss)),
            CcaKind::Vegas => Box::new(Vegas::new(mss)),
            CcaKind::Copa => Box::new(Copa::new(mss)),
        }
    }
}

/// A controller name as written in scenarios: `"bbr"`, or `"pad+bbr"` to put the
/// ACK-pacing shim in front of it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CcaSpec {
    pub kind: CcaKind,
    pub pad: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown congestion control {0:?} (expected bbr, cubic, vegas or copa, optionally prefixed with \"pad+\")")]
pub struct UnknownCca(pub String);

impl FromStr for CcaSpec {
    type Err = UnknownCca;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (pad, base) = match s.strip_prefix("pad+") {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let kind = match base {
            "bbr" => CcaKind::Bbr,
            "cubic" => CcaKind::Cubic,
            "vegas" => CcaKind::Vegas,
            "copa" => CcaKind::Copa,
            _ => return Err(UnknownCca(s.to_string())),
        };
        Ok(CcaSpec { kind, pad })
    }
}

impl fmt::Display for CcaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pad {
            f.write_str("pad+")?;
        }
        f.write_str(self.kind.as_str())
    }
}
