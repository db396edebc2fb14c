//! Packet-level simulation of congestion control over a path whose propagation
//! delay fluctuates, with an optional ACK pacing shim in front of the controller.
//!
//! ```
//! use padsim::scenario::{run_scenario, ScenarioConfig};
//!
//! let mut config = ScenarioConfig::single("pad+bbr", 6.0, 7);
//! config.duration_s = 3.0;
//! config.warmup_s = 1.0;
//! let out = run_scenario(&config).unwrap();
//! assert!(out.summary.aggregate_goodput_bps > 0.0);
//! ```

pub mod cca;
pub mod error;
pub mod metrics;
pub mod net;
pub mod pad;
pub mod scenario;
pub mod sim;

pub use error::{ConfigError, Error};
