//! Declarative experiments: configuration, the event loop that wires the path
//! together, parameter sweeps and report files.

mod config;
mod output;
mod run;
mod sweep;

pub use config::{FlowConfig, FlowPlan, ScenarioConfig, DEFAULT_FLOW_SPACING_S};
pub use output::{
    log_csv, summary_json, sweep_csv, write_run, write_sweep, FAILURES_FILE, LOG_FILE, LOG_HEADER, SUMMARY_FILE,
    SWEEP_FILE, SWEEP_HEADER,
};
pub use run::{run_scenario, LogRow, RunOutput};
pub use sweep::{run_sweep, sweep_point, SweepFailure, SweepResult, SweepRow};
