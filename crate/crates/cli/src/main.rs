use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use padsim::scenario::{
    run_scenario, run_sweep, write_run, write_sweep, ScenarioConfig, FAILURES_FILE, LOG_FILE, SUMMARY_FILE,
    SWEEP_FILE,
};

#[derive(Parser)]
#[command(name = "padsim", version, about = "Dumbbell congestion-control simulator with ACK pacing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write summary.json and log.csv.
    Run {
        /// Scenario file (TOML).
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the scenario for every combination of jitter, controller and seed.
    Sweep {
        config: PathBuf,
        /// Delay standard deviations in milliseconds.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        stddev: Vec<f64>,
        /// Controllers, e.g. `bbr`, `pad+bbr`, `cubic`.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        cca: Vec<String>,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        seeds: Vec<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    Ok(ScenarioConfig::load(path)?)
}

fn run(config: &Path, out: &Path) -> Result<()> {
    let config = load(config)?;
    let output = run_scenario(&config)?;
    write_run(out, &output)?;
    let s = &output.summary;
    println!(
        "goodput {:.3} Mbps, mean rtt {:.1} ms, extra latency {:.1}%, {} drops",
        s.aggregate_goodput_bps / 1e6,
        s.mean_rtt_s * 1e3,
        s.extra_latency_fraction * 100.0,
        s.queue_drops
    );
    for f in &s.flows {
        println!(
            "  flow {} {:<10} {:.3} Mbps, mean rtt {:.1} ms",
            f.flow_id,
            f.cca,
            f.goodput_bps / 1e6,
            f.mean_rtt_s * 1e3
        );
    }
    println!("wrote {} and {}", out.join(SUMMARY_FILE).display(), out.join(LOG_FILE).display());
    Ok(())
}

fn sweep(config: &Path, stddevs: &[f64], ccas: &[String], seeds: &[u64], out: &Path) -> Result<bool> {
    let base = load(config)?;
    if let Some(sd) = stddevs.iter().find(|sd| !(sd.is_finite() && **sd >= 0.0)) {
        bail!("invalid --stddev: {sd} is not a non-negative number");
    }
    for cca in ccas {
        let mut probe = base.clone();
        for flow in &mut probe.flows {
            flow.cca = cca.clone();
        }
        probe.validate().with_context(|| format!("--cca {cca}"))?;
    }
    let result = run_sweep(&base, stddevs, ccas, seeds);
    write_sweep(out, &result)?;
    println!("{} runs, wrote {}", result.rows.len(), out.join(SWEEP_FILE).display());
    for f in &result.failures {
        eprintln!("failed: cca={} stddev={} seed={}: {}", f.cca, f.stddev, f.seed, f.error);
    }
    if !result.failures.is_empty() {
        eprintln!("failures listed in {}", out.join(FAILURES_FILE).display());
    }
    Ok(result.failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config, out } => run(config, out).map(|()| true),
        Command::Sweep {
            config,
            stddev,
            cca,
            seeds,
            out,
        } => sweep(config, stddev, cca, seeds, out),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
