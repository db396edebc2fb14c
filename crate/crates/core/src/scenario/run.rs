use std::time::Duration;

use sha2::{Digest, Sha256};

use super::config::{FlowPlan, ScenarioConfig};
use crate::cca::{CongestionControl, SenderView};
use crate::error::ConfigError;
use crate::metrics::{fairness, mean, percentile, FlowSummary, RatePercentiles, RunSummary};
use crate::net::{
    Admission, AckRecord, AppSource, BottleneckQueue, DelayConfig, DelayProcess, FlowId, Packet, RateSample,
    Receiver, SendPoll, Sender,
};
use crate::pad::{Pad, PadOutput};
use crate::sim::{RngStream, Scheduler, SimTime};

#[derive(Clone, Debug)]
enum Event {
    FlowStart(FlowId),
    Wake(FlowId),
    Departure,
    Deliver(Packet),
    Ack(AckRecord),
    Grant { flow: FlowId, generation: u64 },
    Rto(FlowId),
    WarmupEnd,
    Log,
}

/// One row of the run log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub time_s: f64,
    /// `None` for link-wide metrics.
    pub flow_id: Option<FlowId>,
    pub metric: &'static str,
    pub value: f64,
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub log: Vec<LogRow>,
}

struct Flow {
    plan: FlowPlan,
    sender: Sender,
    cca: Box<dyn CongestionControl>,
    pad: Option<Pad>,
    receiver: Receiver,
    wake_at: Option<SimTime>,
    rto_at: Option<SimTime>,
    started: bool,
    drops: u64,
    cum_at_warmup: u64,
    rtts: Vec<f64>,
    rates: Vec<(f64, f64)>,
}

struct World {
    config: ScenarioConfig,
    warmup: SimTime,
    flows: Vec<Flow>,
    queue: BottleneckQueue,
    forward: DelayProcess,
    reverse: DelayProcess,
    log: Vec<LogRow>,
    trace: Sha256,
    log_interval: Duration,
}

/// Runs `config` to completion. The same configuration always produces the same output.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput, ConfigError> {
    config.validate()?;
    let plans = config.flow_plans()?;
    let seed = config.seed;
    let one_way = config.rtprop() / 2;
    let update = Duration::from_secs_f64(config.delay_update_ms / 1e3);
    let stddev = Duration::from_secs_f64(config.delay_stddev_ms / 1e3);
    let forward = DelayProcess::new(
        DelayConfig {
            update_interval: update,
            ..DelayConfig::gaussian(one_way, stddev)
        },
        RngStream::new(seed, "forward-delay"),
    );
    let reverse = if config.reverse_jitter {
        DelayProcess::new(
            DelayConfig {
                update_interval: update,
                ..DelayConfig::gaussian(one_way, stddev)
            },
            RngStream::new(seed, "reverse-delay"),
        )
    } else {
        DelayProcess::constant(one_way)
    };

    let mss = config.segment_bytes;
    let flows = plans
        .iter()
        .enumerate()
        .map(|(i, plan)| {
            let start = SimTime::ZERO + plan.start;
            let app = match plan.app_rate_bps {
                Some(bits_per_sec) => AppSource::ConstantRate { bits_per_sec, start },
                None => AppSource::Backlogged,
            };
            Flow {
                plan: *plan,
                sender: Sender::new(i, mss, app),
                cca: plan.spec.kind.build(mss, RngStream::new(seed, format!("cca-{i}"))),
                pad: plan.spec.pad.then(|| Pad::new(config.pad)),
                receiver: Receiver::new(i),
                wake_at: None,
                rto_at: None,
                started: false,
                drops: 0,
                cum_at_warmup: 0,
                rtts: Vec::new(),
                rates: Vec::new(),
            }
        })
        .collect();

    let mut world = World {
        config: config.clone(),
        warmup: SimTime::from_secs_f64(config.warmup_s),
        flows,
        queue: BottleneckQueue::new(config.queue_packets, config.bottleneck_bps),
        forward,
        reverse,
        log: Vec::new(),
        trace: Sha256::new(),
        log_interval: Duration::from_secs_f64(config.log_interval_ms / 1e3),
    };

    let mut sched = Scheduler::new();
    for (i, plan) in plans.iter().enumerate() {
        sched.schedule(SimTime::ZERO + plan.start, Event::FlowStart(i));
    }
    sched.schedule(world.warmup, Event::WarmupEnd);
    sched.schedule(SimTime::ZERO, Event::Log);
    let end = SimTime::from_secs_f64(config.duration_s);
    sched.run_until(end, |s, _, e| world.handle(s, e));
    Ok(world.finish(end, sched.fired()))
}

fn secs(t: SimTime) -> f64 {
    t.as_secs_f64()
}

impl World {
    fn trace(&mut self, now: SimTime, tag: u8, flow: usize, value: u64) {
        self.trace.update(now.as_nanos().to_le_bytes());
        self.trace.update([tag]);
        self.trace.update((flow as u64).to_le_bytes());
        self.trace.update(value.to_le_bytes());
    }

    fn row(&mut self, now: SimTime, flow: Option<FlowId>, metric: &'static str, value: f64) {
        self.log.push(LogRow {
            time_s: secs(now),
            flow_id: flow,
            metric,
            value,
        });
    }

    fn handle(&mut self, s: &mut Scheduler<Event>, event: Event) {
        let now = s.now();
        match event {
            Event::FlowStart(f) => {
                self.trace(now, 0, f, 0);
                self.flows[f].started = true;
                self.try_send(s, f);
            }
            Event::Wake(f) => {
                if self.flows[f].wake_at == Some(now) {
                    self.flows[f].wake_at = None;
                    self.trace(now, 1, f, 0);
                    self.try_send(s, f);
                }
            }
            Event::Departure => {
                let (pkt, next) = self.queue.complete(now);
                self.trace(now, 2, pkt.flow, pkt.seq);
                if let Some(at) = next {
                    s.schedule(at, Event::Departure);
                }
                let arrive = self.forward.arrival(now);
                s.schedule(arrive, Event::Deliver(pkt));
            }
            Event::Deliver(pkt) => {
                self.trace(now, 3, pkt.flow, pkt.seq);
                let mut ack = self.flows[pkt.flow].receiver.on_data(&pkt, now);
                ack.arrival_time = self.reverse.arrival(now);
                s.schedule(ack.arrival_time, Event::Ack(ack));
            }
            Event::Ack(ack) => {
                self.trace(now, 4, ack.flow, ack.cum_ack);
                self.on_ack(s, ack, now);
            }
            Event::Grant { flow, generation } => {
                let Some(pad) = self.flows[flow].pad.as_mut() else {
                    return;
                };
                let out = pad.on_grant_timer(now, generation);
                if !out.forwarded.is_empty() {
                    self.trace(now, 5, flow, generation);
                }
                self.apply_pad(s, flow, out, now);
                self.try_send(s, flow);
            }
            Event::Rto(f) => {
                self.flows[f].rto_at = None;
                self.on_rto(s, f, now);
            }
            Event::WarmupEnd => {
                self.trace(now, 7, 0, 0);
                for flow in &mut self.flows {
                    flow.cum_at_warmup = flow.receiver.cum_ack();
                }
            }
            Event::Log => {
                self.sample_log(now);
                s.schedule(now + self.log_interval, Event::Log);
            }
        }
    }

    fn sample_log(&mut self, now: SimTime) {
        let queue = self.queue.occupancy() as f64;
        self.row(now, None, "queue_packets", queue);
        for f in 0..self.flows.len() {
            if !self.flows[f].started {
                continue;
            }
            let flow = &self.flows[f];
            let cwnd = flow.cca.cwnd() as f64;
            let pacing = flow.cca.pacing_rate();
            let inflight = flow.sender.in_flight() as f64;
            let pad = flow
                .pad
                .as_ref()
                .map(|p| (p.lambda().unwrap_or(0.0) * 8.0, p.queue_len() as f64, p.mode()));
            self.row(now, Some(f), "cwnd_bytes", cwnd);
            self.row(now, Some(f), "pacing_bps", pacing);
            self.row(now, Some(f), "inflight_bytes", inflight);
            if let Some((lambda, queued, mode)) = pad {
                self.row(now, Some(f), "pad_lambda_bps", lambda);
                self.row(now, Some(f), "pad_queue", queued);
                let positive = matches!(mode, crate::pad::Mode::Positive);
                self.row(now, Some(f), "pad_positive", positive as u8 as f64);
            }
        }
    }

    fn try_send(&mut self, s: &mut Scheduler<Event>, f: FlowId) {
        let now = s.now();
        if !self.flows[f].started {
            return;
        }
        loop {
            let flow = &mut self.flows[f];
            match flow.sender.poll_send(now, flow.cca.as_ref()) {
                SendPoll::Send(pkt) => {
                    let view = flow.sender.view(now);
                    flow.cca.on_packet_sent(&pkt, &view);
                    if let Some(pad) = flow.pad.as_mut() {
                        pad.on_packet_sent(&pkt, now, view.srtt);
                    }
                    self.trace(now, 8, f, pkt.seq);
                    match self.queue.offer(pkt, now) {
                        Admission::Transmitting { departs_at } => {
                            s.schedule(departs_at, Event::Departure);
                        }
                        Admission::Queued => {}
                        Admission::Dropped => self.flows[f].drops += 1,
                    }
                }
                SendPoll::WaitUntil(t) => {
                    if flow.wake_at.is_none_or(|w| t < w) {
                        flow.wake_at = Some(t);
                        s.schedule(t, Event::Wake(f));
                    }
                    break;
                }
                SendPoll::Blocked => break,
            }
        }
        self.arm_rto(s, f);
    }

    fn arm_rto(&mut self, s: &mut Scheduler<Event>, f: FlowId) {
        let flow = &mut self.flows[f];
        if let Some(deadline) = flow.sender.rto_deadline() {
            if flow.rto_at.is_none_or(|at| deadline < at) {
                flow.rto_at = Some(deadline);
                s.schedule(deadline, Event::Rto(f));
            }
        }
    }

    fn on_ack(&mut self, s: &mut Scheduler<Event>, ack: AckRecord, now: SimTime) {
        let f = ack.flow;
        let warm = now >= self.warmup;
        let flow = &mut self.flows[f];
        let Some(outcome) = flow.sender.on_ack(&ack, now) else {
            return;
        };
        if ack.acked_new_bytes > 0 {
            let rtt = now.saturating_since(ack.echo_send_time).as_secs_f64();
            if warm {
                flow.rtts.push(rtt);
            }
            self.row(now, Some(f), "rtt_s", rtt);
        }
        let flow = &mut self.flows[f];
        if let Some(lost) = outcome.loss_event {
            let view = flow.sender.view(now);
            flow.cca.on_loss_detected(lost, &view);
        }
        let srtt = flow.sender.rtt().srtt();
        match flow.pad.as_mut() {
            Some(pad) => {
                let out = pad.on_ack(outcome.sample, now, srtt);
                self.apply_pad(s, f, out, now);
            }
            None => self.deliver(f, outcome.sample, now),
        }
        self.try_send(s, f);
    }

    fn apply_pad(&mut self, s: &mut Scheduler<Event>, f: FlowId, out: PadOutput, now: SimTime) {
        for entry in out.forwarded {
            let delay = entry.added_delay(now);
            if !delay.is_zero() && !entry.probe {
                self.row(now, Some(f), "pad_added_delay_s", delay.as_secs_f64());
            }
            self.deliver(f, entry.sample, now);
        }
        if let Some(timer) = out.timer {
            s.schedule(
                timer.at,
                Event::Grant {
                    flow: f,
                    generation: timer.generation,
                },
            );
        }
    }

    /// Hands a sample to the controller at `now`.
    fn deliver(&mut self, f: FlowId, mut sample: RateSample, now: SimTime) {
        let flow = &mut self.flows[f];
        flow.sender.complete_sample(&mut sample, now);
        let view: SenderView = flow.sender.view(now);
        flow.cca.on_ack(&sample, &view);
        if let Some(rate) = sample.delivery_rate_bps() {
            if now >= self.warmup {
                flow.rates.push((secs(now), rate));
            }
            self.row(now, Some(f), "delivery_rate_bps", rate);
        }
    }

    fn on_rto(&mut self, s: &mut Scheduler<Event>, f: FlowId, now: SimTime) {
        if self.flows[f].sender.on_rto(now) {
            self.trace(now, 6, f, 0);
            self.row(now, Some(f), "rto", 1.0);
            if let Some(pad) = self.flows[f].pad.as_mut() {
                let flushed = pad.on_rto(now);
                for entry in flushed {
                    self.deliver(f, entry.sample, now);
                }
            }
            let flow = &mut self.flows[f];
            let view = flow.sender.view(now);
            flow.cca.on_rto(&view);
            self.try_send(s, f);
        } else {
            self.arm_rto(s, f);
        }
    }

    fn finish(mut self, end: SimTime, events: u64) -> RunOutput {
        let config = &self.config;
        let span = (end - self.warmup).as_secs_f64();
        let from = self.warmup;
        let one_way_mean = self.forward.mean_over(from, end) + self.reverse.mean_over(from, end);
        let rtprop_mean = one_way_mean.as_secs_f64();
        let window_s = 10.0 * config.rtprop_ms / 1e3;

        let mut flows = Vec::new();
        let mut all_rtts = Vec::new();
        for (i, flow) in self.flows.iter().enumerate() {
            let delivered = flow.receiver.cum_ack() - flow.cum_at_warmup;
            let goodput = delivered as f64 * 8.0 / span;
            let mean_rtt = mean(&flow.rtts).unwrap_or(0.0);
            let stats = flow.sender.stats();
            flows.push(FlowSummary {
                flow_id: i,
                cca: flow.plan.spec.to_string(),
                goodput_bps: goodput,
                delivered_bytes: delivered,
                mean_rtt_s: mean_rtt,
                median_rtt_s: percentile(&flow.rtts, 50.0).unwrap_or(0.0),
                p95_rtt_s: percentile(&flow.rtts, 95.0).unwrap_or(0.0),
                extra_latency_fraction: if flow.rtts.is_empty() {
                    0.0
                } else {
                    (mean_rtt - rtprop_mean) / rtprop_mean
                },
                losses: flow.drops,
                retransmissions: stats.retransmissions,
                timeouts: stats.timeouts,
                delivery_rate: RatePercentiles::compute(&flow.rates, window_s),
                pad: flow.pad.as_ref().map(|p| p.stats()),
            });
            all_rtts.extend_from_slice(&flow.rtts);
        }
        let goodputs: Vec<f64> = flows.iter().map(|f| f.goodput_bps).collect();
        let mean_rtt = mean(&all_rtts).unwrap_or(0.0);
        let summary = RunSummary {
            seed: config.seed,
            duration_s: config.duration_s,
            warmup_s: config.warmup_s,
            bottleneck_bps: config.bottleneck_bps,
            rtprop_s: rtprop_mean,
            delay_stddev_ms: config.delay_stddev_ms,
            aggregate_goodput_bps: goodputs.iter().sum(),
            mean_rtt_s: mean_rtt,
            extra_latency_fraction: if all_rtts.is_empty() {
                0.0
            } else {
                (mean_rtt - rtprop_mean) / rtprop_mean
            },
            queue_drops: self.queue.drops(),
            fairness: fairness(&goodputs).ok(),
            flows,
            events,
            trace_digest: hex::encode(std::mem::take(&mut self.trace).finalize()),
        };
        RunOutput {
            summary,
            log: self.log,
        }
    }
}
