//! Deterministic event engine, simulated clock and seeded random streams.

mod engine;
mod rng;
mod time;

pub use engine::{EventHandle, Scheduler};
pub use rng::RngStream;
pub use time::{duration_nanos, rate_bps, transmission_time, SimTime};
