//! The dumbbell path: sender socket, drop-tail bottleneck, delay-fluctuating
//! link and a SACK-generating receiver.

mod delay;
mod packet;
mod queue;
mod rate;
mod receiver;
mod sender;

pub use delay::{DelayConfig, DelayProcess, DEFAULT_FLOOR, DEFAULT_UPDATE_INTERVAL, MAX_DECREASE_SLOPE};
pub use packet::{AckRecord, FlowId, Packet, RateSample, SackBlock, DEFAULT_SEGMENT_BYTES, MAX_SACK_BLOCKS};
pub use queue::{Admission, BottleneckQueue};
pub use rate::{ack_gap_rate_bps, DeliveryRateEstimator, TxSnapshot};
pub use receiver::Receiver;
pub use sender::{
    AckOutcome, AppSource, RttEstimator, SendPoll, Sender, SenderStats, DUP_THRESHOLD, INITIAL_RTO, MAX_RTO,
    MIN_RTO,
};
