//! End-to-end acceptance report. Prints one PASS/FAIL line per criterion.
//!
//! Failures are reported but only make the process exit non-zero when
//! `PADSIM_STRICT_ACCEPTANCE=1` is set, so the numbers stay visible in ordinary
//! test runs.

use std::time::{Duration, Instant};

use padsim::metrics::{percentile, windowed_max, RunSummary};
use padsim::net::{ack_gap_rate_bps, AckRecord, DelayProcess, Packet, Receiver};
use padsim::pad::{Pad, PadConfig, RateEstimator};
use padsim::scenario::{run_scenario, ScenarioConfig};
use padsim::sim::{RngStream, SimTime};

const LINK_BPS: f64 = 10e6;
const SEED: u64 = 1;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, id: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        let line = format!("{tag} {id}: {detail}");
        println!("{line}");
        self.lines.push((pass, line));
    }
}

fn run(config: &ScenarioConfig) -> RunSummary {
    let started = Instant::now();
    let out = run_scenario(config).expect("valid scenario");
    let wall = started.elapsed();
    assert!(wall < Duration::from_secs(10), "scenario took {wall:?}");
    out.summary
}

fn single(cca: &str, sd: f64) -> RunSummary {
    run(&ScenarioConfig::single(cca, sd, SEED))
}

fn mbps(bps: f64) -> String {
    format!("{:.3} Mbps", bps / 1e6)
}

fn pp_above_link(bps: f64) -> f64 {
    (bps / LINK_BPS - 1.0) * 100.0
}

fn dominated(a: &RunSummary, by: &RunSummary) -> bool {
    let (ga, ra) = (a.aggregate_goodput_bps, a.mean_rtt_s);
    let (gb, rb) = (by.aggregate_goodput_bps, by.mean_rtt_s);
    gb >= ga && rb <= ra && (gb > ga || rb < ra)
}

fn stable_link(r: &mut Report, bbr0: &RunSummary) {
    let g = bbr0.aggregate_goodput_bps;
    let x = bbr0.extra_latency_fraction;
    r.check(
        "1 stable link",
        g >= 0.95 * LINK_BPS && x <= 0.15,
        format!("bbr sd=0 goodput {} (need >= 9.500), extra latency {:.3} (need <= 0.150)", mbps(g), x),
    );
}

fn degradation(r: &mut Report, bbr0: &RunSummary, bbr12: &RunSummary) {
    let ratio = bbr12.aggregate_goodput_bps / bbr0.aggregate_goodput_bps;
    let x = bbr12.extra_latency_fraction;
    r.check(
        "2 bbr degradation",
        ratio <= 0.75 && x >= 0.30,
        format!("goodput sd=12/sd=0 {ratio:.3} (need <= 0.750), extra latency sd=12 {x:.3} (need >= 0.300)"),
    );
}

fn improvement(r: &mut Report, bbr12: &RunSummary, pad12: &RunSummary) {
    let ratio = pad12.aggregate_goodput_bps / bbr12.aggregate_goodput_bps;
    let (xp, xb) = (pad12.extra_latency_fraction, bbr12.extra_latency_fraction);
    r.check(
        "3 pad improvement",
        ratio >= 1.25 && xp <= xb,
        format!("sd=12 goodput pad+bbr/bbr {ratio:.3} (need >= 1.250), extra latency {xp:.3} vs {xb:.3} (need <=)"),
    );
}

fn overestimation(r: &mut Report) {
    let bbr = single("bbr", 6.0);
    let pad = single("pad+bbr", 6.0);
    let b = bbr.flows[0].delivery_rate.expect("bbr rate samples");
    let p = pad.flows[0].delivery_rate.expect("pad+bbr rate samples");
    let raw = pp_above_link(b.p99);
    let wmax = pp_above_link(b.wmax_p99);
    let pass = (4.0..=15.0).contains(&raw)
        && (7.0..=18.0).contains(&wmax)
        && p.p99 < b.p99
        && p.wmax_p99 < b.wmax_p99;
    r.check(
        "4 overestimation",
        pass,
        format!(
            "bbr sd=6 p99 +{raw:.2} pp (need 4..15), wmax p99 +{wmax:.2} pp (need 7..18); \
             pad+bbr p99 {} vs {}, wmax p99 {} vs {} (need both lower)",
            mbps(p.p99),
            mbps(b.p99),
            mbps(p.wmax_p99),
            mbps(b.wmax_p99)
        ),
    );
}

fn pareto(r: &mut Report) {
    let mut dominators = Vec::new();
    let mut points = Vec::new();
    for sd in [3.0, 12.0] {
        let pad = single("pad+bbr", sd);
        points.push(format!(
            "sd={sd} pad+bbr ({}, {:.1} ms)",
            mbps(pad.aggregate_goodput_bps),
            pad.mean_rtt_s * 1e3
        ));
        for cca in ["bbr", "cubic", "vegas", "copa"] {
            let other = single(cca, sd);
            if dominated(&pad, &other) {
                dominators.push(format!(
                    "sd={sd} {cca} ({}, {:.1} ms)",
                    mbps(other.aggregate_goodput_bps),
                    other.mean_rtt_s * 1e3
                ));
            }
        }
    }
    let detail = if dominators.is_empty() {
        format!("{}; no dominating baseline", points.join(", "))
    } else {
        format!("{}; dominated by {}", points.join(", "), dominators.join(", "))
    };
    r.check("5 pareto", dominators.is_empty(), detail);
}

fn multi_flow(r: &mut Report) {
    let mut all = true;
    let mut parts = Vec::new();
    for n in [2, 5] {
        for sd in [3.0, 6.0, 12.0] {
            let bbr = run(&ScenarioConfig::multi("bbr", n, sd, SEED));
            let pad = run(&ScenarioConfig::multi("pad+bbr", n, sd, SEED));
            let ratio = pad.aggregate_goodput_bps / bbr.aggregate_goodput_bps;
            all &= (1.0..=1.6).contains(&ratio);
            parts.push(format!("n={n} sd={sd} {ratio:.3}"));
        }
    }
    r.check(
        "6 multi-flow",
        all,
        format!("aggregate pad+bbr/bbr {} (need 1.0..1.6)", parts.join(", ")),
    );
}

fn fairness(r: &mut Report) {
    let mut config = ScenarioConfig::multi("bbr", 2, 6.0, SEED);
    config.flows[0].cca = "pad+bbr".to_string();
    let s = run(&config);
    let f = s.fairness.expect("two flows");
    r.check(
        "7 fairness",
        f.ratio <= 1.3 && !f.starvation,
        format!(
            "sd=6 pad+bbr {} vs bbr {}, max/min {:.3} (need <= 1.300), starvation {}",
            mbps(s.flows[0].goodput_bps),
            mbps(s.flows[1].goodput_bps),
            f.ratio,
            f.starvation
        ),
    );
}

fn assembled_acks(r: &mut Report) {
    // five packets paced 10 ms apart; the forward delay steps from 80 ms to 75 ms
    // at the fourth packet while the return path stays at 80 ms
    let ms = Duration::from_millis;
    let mut forward = DelayProcess::from_anchors(&[ms(80), ms(80), ms(80), ms(75), ms(75)], ms(10), ms(1));
    let mut reverse = DelayProcess::constant(ms(80));
    let mut receiver = Receiver::new(0);
    let mut acks: Vec<AckRecord> = Vec::new();
    for i in 0..5u64 {
        let sent = SimTime::from_millis(10 * i);
        let pkt = Packet {
            flow: 0,
            seq: i * 1500,
            size: 1500,
            send_time: sent,
            is_retransmission: false,
            probe_marked: false,
        };
        let arrive = forward.arrival(sent);
        let mut ack = receiver.on_data(&pkt, arrive);
        ack.arrival_time = reverse.arrival(arrive);
        acks.push(ack);
    }
    let send_rate = 1500.0 * 8.0 / 0.010;
    let sample = ack_gap_rate_bps(acks[2].arrival_time, &acks[3]).expect("positive gap");
    let ratio = sample / send_rate;
    r.check(
        "8 assembled acks",
        ratio == 2.0,
        format!("fourth ACK sample {} over send rate {} = {ratio}x (need exactly 2.0)", mbps(sample), mbps(send_rate)),
    );
}

fn pad_fifo_and_exactly_once() -> Result<(), String> {
    let mut rng = RngStream::new(SEED, "acceptance-pad");
    let srtt = Some(Duration::from_millis(160));
    let mut pad = Pad::new(PadConfig::default());
    let mut t = SimTime::ZERO;
    let mut seq = 0u64;
    let mut timer: Option<(SimTime, u64)> = None;
    let mut out_order = Vec::new();
    let mut sent = 0u64;
    let handle = |out: padsim::pad::PadOutput, order: &mut Vec<u64>, timer: &mut Option<(SimTime, u64)>| {
        order.extend(out.forwarded.iter().map(|f| f.sample.ack.cum_ack));
        if let Some(g) = out.timer {
            *timer = Some((g.at, g.generation));
        }
    };
    for i in 0..20_000u64 {
        // bursts of compressed ACKs between stretches at the link rate
        let gap_us = if (i / 200) % 3 == 2 { 300 } else { 1200 + (rng.unit() * 200.0) as u64 };
        t = t + Duration::from_micros(gap_us);
        while let Some((at, generation)) = timer.filter(|&(at, _)| at <= t) {
            timer = None;
            let out = pad.on_grant_timer(at, generation);
            handle(out, &mut out_order, &mut timer);
        }
        seq += 1500;
        sent += 1;
        let out = pad.on_ack(ack_sample(seq), t, srtt);
        handle(out, &mut out_order, &mut timer);
        if i % 5000 == 4999 {
            out_order.extend(pad.on_rto(t).iter().map(|f| f.sample.ack.cum_ack));
            timer = None;
        }
    }
    out_order.extend(pad.on_rto(t).iter().map(|f| f.sample.ack.cum_ack));
    if out_order.len() as u64 != sent {
        return Err(format!("{} ACKs in, {} out", sent, out_order.len()));
    }
    if out_order.windows(2).any(|w| w[0] >= w[1]) {
        return Err("forwarding order differs from arrival order".into());
    }
    if pad.stats().delayed == 0 {
        return Err("stream never exercised positive mode".into());
    }
    Ok(())
}

fn ack_sample(cum: u64) -> padsim::net::RateSample {
    let ack = AckRecord {
        flow: 0,
        cum_ack: cum,
        sack_blocks: Default::default(),
        acked_new_bytes: 1500,
        gen_time: SimTime::ZERO,
        arrival_time: SimTime::ZERO,
        echo_send_time: SimTime::ZERO,
        echo_seq: cum - 1500,
    };
    padsim::net::RateSample::unanchored(ack, Duration::from_millis(160))
}

fn zero_delay_on_stable_link() -> Result<(), String> {
    let config = ScenarioConfig::single("pad+bbr", 0.0, SEED);
    let out = run_scenario(&config).map_err(|e| e.to_string())?;
    let delayed: Vec<_> = out
        .log
        .iter()
        .filter(|row| row.metric == "pad_added_delay_s" && row.time_s >= config.warmup_s)
        .collect();
    match delayed.first() {
        None => Ok(()),
        Some(row) => Err(format!(
            "{} non-probe ACKs delayed after warm-up, first at {:.3} s by {:.6} s",
            delayed.len(),
            row.time_s,
            row.value
        )),
    }
}

fn lambda_matches_least_squares() -> Result<(), String> {
    let rtt = Duration::from_millis(160);
    for seed in 0..20u64 {
        let mut rng = RngStream::new(seed, "acceptance-lambda");
        let mut est = RateEstimator::new(16.0);
        let mut points = Vec::new();
        // 20 RTTs of a 10 Mbps stream with ±6 ms of arrival jitter, kept in order
        let mut last = 0.0f64;
        let n = (20.0 * 0.160 / 0.0012) as u64;
        for i in 1..=n {
            let nominal = i as f64 * 0.0012;
            let t = (nominal + rng.normal(0.0, 0.006)).max(last);
            last = t;
            let seq = i * 1500;
            est.update(SimTime::from_nanos((t * 1e9) as u64), seq, Some(rtt));
            points.push((t, seq as f64));
        }
        let lambda = est.lambda().ok_or("no lambda")?;
        let window: Vec<_> = points.iter().filter(|p| p.0 >= last - 16.0 * 0.160).collect();
        let k = window.len() as f64;
        let mt = window.iter().map(|p| p.0).sum::<f64>() / k;
        let ms = window.iter().map(|p| p.1).sum::<f64>() / k;
        let cov: f64 = window.iter().map(|p| (p.0 - mt) * (p.1 - ms)).sum();
        let var: f64 = window.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let slope = cov / var;
        let err = (lambda - slope).abs() / slope;
        if err > 0.02 {
            return Err(format!("seed {seed}: lambda {lambda:.0} B/s vs slope {slope:.0} B/s"));
        }
    }
    Ok(())
}

fn filters_match_brute_force() -> Result<(), String> {
    let mut rng = RngStream::new(SEED, "acceptance-filters");
    let mut t = 0.0;
    let samples: Vec<(f64, f64)> = (0..3000)
        .map(|_| {
            t += rng.unit() * 0.01;
            (t, rng.normal(10e6, 1e6))
        })
        .collect();
    let window = 1.6;
    let fast = windowed_max(&samples, window);
    for (i, &(ti, _)) in samples.iter().enumerate() {
        let brute = samples[..=i]
            .iter()
            .filter(|s| s.0 > ti - window)
            .map(|s| s.1)
            .fold(f64::MIN, f64::max);
        if fast[i] != brute {
            return Err(format!("windowed max differs at sample {i}"));
        }
    }
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    for p in 1..=100usize {
        let rank = (p * sorted.len()).div_ceil(100);
        let got = percentile(&values, p as f64).map_err(|e| e.to_string())?;
        if got != sorted[rank - 1] {
            return Err(format!("p{p} differs"));
        }
    }
    Ok(())
}

fn deterministic() -> Result<(), String> {
    let config = ScenarioConfig::single("pad+bbr", 6.0, 42);
    let a = run_scenario(&config).map_err(|e| e.to_string())?;
    let b = run_scenario(&config).map_err(|e| e.to_string())?;
    if a.summary.trace_digest != b.summary.trace_digest {
        return Err("trace digests differ".into());
    }
    let sa = serde_json::to_string(&a.summary).map_err(|e| e.to_string())?;
    let sb = serde_json::to_string(&b.summary).map_err(|e| e.to_string())?;
    if sa != sb {
        return Err("summaries differ".into());
    }
    Ok(())
}

fn delay_order_preserved() -> Result<(), String> {
    for seed in 0..5u64 {
        let mut p = DelayProcess::new(
            padsim::net::DelayConfig::gaussian(Duration::from_millis(80), Duration::from_millis(30)),
            RngStream::new(seed, "acceptance-delay"),
        );
        let mut last = SimTime::ZERO;
        for us in (0..20_000_000u64).step_by(7) {
            let at = p.arrival(SimTime::from_micros(us));
            if at < last {
                return Err(format!("seed {seed}: overtaking at {us} us"));
            }
            last = at;
        }
    }
    Ok(())
}

fn properties(r: &mut Report) {
    let suites: [(&str, fn() -> Result<(), String>); 6] = [
        ("pad fifo and exactly-once across rto", pad_fifo_and_exactly_once),
        ("zero added delay at sd=0", zero_delay_on_stable_link),
        ("lambda vs least squares", lambda_matches_least_squares),
        ("windowed max and percentile", filters_match_brute_force),
        ("determinism", deterministic),
        ("delay order preservation", delay_order_preserved),
    ];
    let mut failed = Vec::new();
    for (name, suite) in suites {
        if let Err(e) = suite() {
            failed.push(format!("{name}: {e}"));
        }
    }
    let detail = if failed.is_empty() {
        format!("{} suites hold", suites.len())
    } else {
        failed.join("; ")
    };
    r.check("9 properties", failed.is_empty(), detail);
}

fn main() {
    let mut r = Report { lines: Vec::new() };
    let bbr0 = single("bbr", 0.0);
    let bbr12 = single("bbr", 12.0);
    let pad12 = single("pad+bbr", 12.0);
    stable_link(&mut r, &bbr0);
    degradation(&mut r, &bbr0, &bbr12);
    improvement(&mut r, &bbr12, &pad12);
    overestimation(&mut r);
    pareto(&mut r);
    multi_flow(&mut r);
    fairness(&mut r);
    assembled_acks(&mut r);
    properties(&mut r);

    let passed = r.lines.iter().filter(|l| l.0).count();
    println!("acceptance: {passed}/{} criteria met", r.lines.len());
    let strict = std::env::var("PADSIM_STRICT_ACCEPTANCE").is_ok_and(|v| v == "1");
    if strict && passed < r.lines.len() {
        std::process::exit(1);
    }
}
