use std::collections::VecDeque;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::calendar::EventCalendar;
use super::staleness::{StalenessEvent, StalenessTracker};
use super::SimError;
use crate::data::load_partitions;
use crate::metrics::{ExperimentConfig, F1Mode, MetricsRecord};
use crate::node::{GossipMessage, NodeId, NodeState, Outgoing};
use crate::prototype::Sample;

#[derive(Debug, Clone)]
enum Event {
    SensorArrival(NodeId),
    MessageDelivery { to: NodeId, msg: GossipMessage },
    IdleTick(NodeId),
    ServiceComplete(NodeId),
    MetricsSample,
}

/// End-of-run aggregates for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    pub seed: u64,
    /// First source row used by the partition.
    pub start_index: usize,
    /// Mean over nodes of each node's prequential F1.
    pub final_f1: f64,
    pub bytes_sent: u64,
    pub messages_sent: u64,
    pub max_message_bytes: u64,
    pub prototypes_trained: u64,
    pub sensor_samples: u64,
    /// Time-averaged staleness over all ordered node pairs.
    pub mean_staleness: f64,
    pub mean_batch_len: Option<f64>,
    pub max_batch_len: usize,
    /// Largest model size seen right before any compression.
    pub max_pre_compression: usize,
    pub compressions: u64,
    /// Peak of total waiting work (queued peer prototypes plus sensor
    /// backlog) over the second half of the run.
    pub max_occupancy_second_half: usize,
    pub final_occupancy: usize,
    pub final_model_sizes: Vec<usize>,
    pub events: u64,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub records: Vec<MetricsRecord>,
    pub summary: SimSummary,
}

struct NodeSim {
    state: NodeState,
    stream: Vec<Sample>,
    next_sample: usize,
    backlog: VecDeque<Sample>,
    busy: bool,
    rng_arrivals: ChaCha8Rng,
    rng_service: ChaCha8Rng,
    rng_ops: ChaCha8Rng,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn run_simulation(cfg: &ExperimentConfig, seed: u64) -> Result<SimOutcome, SimError> {
    Sim::new(cfg, seed)?.run(None)
}

/// Like [`run_simulation`], also writing one tab-separated line per
/// processed event.
pub fn run_simulation_traced(
    cfg: &ExperimentConfig,
    seed: u64,
    trace: &mut dyn Write,
) -> Result<SimOutcome, SimError> {
    writeln!(trace, "time\tevent\tnode\tdetail")?;
    Sim::new(cfg, seed)?.run(Some(trace))
}

struct Sim<'a> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    start_index: usize,
    nodes: Vec<NodeSim>,
    calendar: EventCalendar<Event>,
    tracker: StalenessTracker,
    arrival_gap: Exp<f64>,
    service_time: Exp<f64>,
    sample_times: Vec<f64>,
    next_sample_time: usize,
    records: Vec<MetricsRecord>,
    max_message_bytes: u64,
    sensor_samples: u64,
    max_occupancy_second_half: usize,
    events: u64,
    /// Service starts awaiting the trace writer, when tracing.
    serves: Option<Vec<Serve>>,
}

struct Serve {
    time: f64,
    node: usize,
    sensor: bool,
    backlog: usize,
    queued: usize,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ExperimentConfig, seed: u64) -> Result<Self, SimError> {
        cfg.validate()?;
        let n = cfg.n_nodes;
        let mut data_rng = stream_rng(seed, 0);
        let (streams, start_index) = load_partitions(&cfg.dataset, n, &mut data_rng)?;
        let mode = F1Mode::for_labels(streams.iter().flatten().map(|s| s.label));
        let node_cfg = cfg.node_config(mode);
        let nodes = streams
            .into_iter()
            .enumerate()
            .map(|(i, stream)| {
                let k = 1 + 3 * i as u64;
                Ok(NodeSim {
                    state: NodeState::new(i as NodeId, node_cfg.clone())?,
                    stream,
                    next_sample: 0,
                    backlog: VecDeque::new(),
                    busy: false,
                    rng_arrivals: stream_rng(seed, k),
                    rng_service: stream_rng(seed, k + 1),
                    rng_ops: stream_rng(seed, k + 2),
                })
            })
            .collect::<Result<Vec<_>, SimError>>()?;

        let period = cfg.metrics_period;
        let mut sample_times: Vec<f64> = (1..)
            .map(|k| k as f64 * period)
            .take_while(|&t| t <= cfg.horizon * (1.0 + 1e-12))
            .collect();
        if sample_times.last().is_none_or(|&t| t < cfg.horizon) {
            sample_times.push(cfg.horizon);
        }

        Ok(Self {
            cfg,
            seed,
            start_index,
            nodes,
            calendar: EventCalendar::new(),
            tracker: StalenessTracker::new(n, 0.0),
            arrival_gap: Exp::new(cfg.lambda_s).expect("validated rate"),
            service_time: Exp::new(cfg.mu).expect("validated rate"),
            sample_times,
            next_sample_time: 0,
            records: Vec::new(),
            max_message_bytes: 0,
            sensor_samples: 0,
            max_occupancy_second_half: 0,
            serves: None,
            events: 0,
        })
    }

    fn occupancy(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| n.state.queued_prototypes() + n.backlog.len())
            .sum()
    }

    fn run(mut self, mut trace: Option<&mut dyn Write>) -> Result<SimOutcome, SimError> {
        if trace.is_some() {
            self.serves = Some(Vec::new());
        }
        for i in 0..self.nodes.len() {
            self.schedule_arrival(i, 0.0);
        }
        self.calendar
            .schedule(self.sample_times[0], Event::MetricsSample);

        let horizon = self.cfg.horizon;
        let half = horizon / 2.0;
        while let Some((t, ev)) = self.calendar.pop() {
            if t > horizon {
                break;
            }
            self.events += 1;
            if let Some(w) = trace.as_deref_mut() {
                trace_line(w, t, &ev)?;
            }
            match ev {
                Event::SensorArrival(i) => self.on_arrival(i as usize, t),
                Event::MessageDelivery { to, msg } => self.on_delivery(to as usize, msg, t),
                Event::IdleTick(i) => {
                    if !self.nodes[i as usize].busy {
                        self.start_service(i as usize, t);
                    }
                }
                Event::ServiceComplete(i) => {
                    let i = i as usize;
                    self.nodes[i].busy = false;
                    if !self.nodes[i].backlog.is_empty() {
                        self.start_service(i, t);
                    } else if self.nodes[i].state.has_peer_work() {
                        self.calendar.schedule(t, Event::IdleTick(i as NodeId));
                    }
                }
                Event::MetricsSample => {
                    self.sample_metrics(t);
                    self.next_sample_time += 1;
                    if let Some(&next) = self.sample_times.get(self.next_sample_time) {
                        self.calendar.schedule(next, Event::MetricsSample);
                    }
                }
            }
            if let (Some(w), Some(serves)) = (trace.as_deref_mut(), self.serves.as_mut()) {
                for s in serves.drain(..) {
                    serve_line(w, &s)?;
                }
            }
            if t >= half {
                self.max_occupancy_second_half =
                    self.max_occupancy_second_half.max(self.occupancy());
            }
        }
        self.tracker.advance(horizon);
        Ok(self.finish())
    }

    fn schedule_arrival(&mut self, i: usize, now: f64) {
        let node = &mut self.nodes[i];
        if node.next_sample < node.stream.len() {
            let gap = self.arrival_gap.sample(&mut node.rng_arrivals);
            self.calendar
                .schedule(now + gap, Event::SensorArrival(i as NodeId));
        }
    }

    fn on_arrival(&mut self, i: usize, t: f64) {
        let node = &mut self.nodes[i];
        let sample = node.stream[node.next_sample].clone();
        node.next_sample += 1;
        node.backlog.push_back(sample);
        self.sensor_samples += 1;
        self.schedule_arrival(i, t);
        if !self.nodes[i].busy {
            self.start_service(i, t);
        }
    }

    fn on_delivery(&mut self, to: usize, msg: GossipMessage, t: f64) {
        self.tracker.track(
            t,
            StalenessEvent::Delivery {
                at: to as NodeId,
                from: msg.sender,
                version: msg.version,
            },
        );
        if let Err(e) = self.nodes[to].state.enqueue_peer_model(&msg) {
            log::warn!("dropping message: {e}");
            return;
        }
        if !self.nodes[to].busy {
            self.start_service(to, t);
        }
    }

    /// Sensor backlog first, otherwise one peer prototype.
    fn start_service(&mut self, i: usize, t: f64) {
        let node = &mut self.nodes[i];
        let before = node.state.logical_clock();
        let mut outgoing: Vec<Outgoing> = Vec::new();
        let (backlog, queued) = (node.backlog.len(), node.state.queued_prototypes());
        let served = if let Some(sample) = node.backlog.pop_front() {
            outgoing = node
                .state
                .on_sensor_sample(sample, t, &mut node.rng_ops)
                .messages;
            true
        } else {
            node.state.idle_step(t, &mut node.rng_ops)
        };
        if !served {
            return;
        }
        node.busy = true;
        if let Some(serves) = self.serves.as_mut() {
            serves.push(Serve {
                time: t,
                node: i,
                sensor: backlog > 0,
                backlog,
                queued,
            });
        }
        let done = t + self.service_time.sample(&mut node.rng_service);
        let after = node.state.logical_clock();
        self.calendar
            .schedule(done, Event::ServiceComplete(i as NodeId));
        if after != before {
            self.tracker.track(
                t,
                StalenessEvent::ModelUpdate {
                    node: i as NodeId,
                    version: after,
                },
            );
        }
        for (to, msg) in outgoing {
            self.tracker.record_batch(msg.prototypes.len());
            self.max_message_bytes = self.max_message_bytes.max(msg.encoded_len() as u64);
            self.calendar
                .schedule(t + self.cfg.latency, Event::MessageDelivery { to, msg });
        }
    }

    fn sample_metrics(&mut self, t: f64) {
        self.tracker.advance(t);
        for (i, node) in self.nodes.iter().enumerate() {
            let pq = node.state.prequential();
            let counts = pq.headline_counts();
            let c = node.state.counters();
            self.records.push(MetricsRecord {
                time: t,
                node: i as NodeId,
                tp: counts.tp,
                fp: counts.fp,
                fn_: counts.fn_,
                f1: pq.f1(),
                prototypes_trained: c.prototypes_trained,
                bytes_sent: c.bytes_sent,
                model_size: node.state.model().map_or(0, |m| m.len()),
                mean_staleness: self.tracker.node_mean(i as NodeId),
            });
        }
    }

    fn finish(self) -> SimOutcome {
        let n = self.nodes.len() as f64;
        let sum = |f: &dyn Fn(&NodeSim) -> u64| self.nodes.iter().map(f).sum::<u64>();
        let summary = SimSummary {
            seed: self.seed,
            start_index: self.start_index,
            final_f1: self
                .nodes
                .iter()
                .map(|x| x.state.prequential().f1())
                .sum::<f64>()
                / n,
            bytes_sent: sum(&|x| x.state.counters().bytes_sent),
            messages_sent: sum(&|x| x.state.counters().messages_sent),
            max_message_bytes: self.max_message_bytes,
            prototypes_trained: sum(&|x| x.state.counters().prototypes_trained),
            sensor_samples: self.sensor_samples,
            mean_staleness: self.tracker.mean(),
            mean_batch_len: self.tracker.mean_batch_len(),
            max_batch_len: self.tracker.max_batch_len(),
            max_pre_compression: self
                .nodes
                .iter()
                .map(|x| x.state.counters().max_pre_compression)
                .max()
                .unwrap_or(0),
            compressions: sum(&|x| x.state.counters().compressions),
            max_occupancy_second_half: self.max_occupancy_second_half,
            final_occupancy: self.occupancy(),
            final_model_sizes: self
                .nodes
                .iter()
                .map(|x| x.state.model().map_or(0, |m| m.len()))
                .collect(),
            events: self.events,
        };
        SimOutcome {
            records: self.records,
            summary,
        }
    }
}

fn trace_line(w: &mut dyn Write, t: f64, ev: &Event) -> std::io::Result<()> {
    match ev {
        Event::SensorArrival(i) => writeln!(w, "{t:.9}\tarrival\t{i}\t-"),
        Event::MessageDelivery { to, msg } => writeln!(
            w,
            "{t:.9}\tdelivery\t{to}\tfrom={} version={} prototypes={}",
            msg.sender,
            msg.version,
            msg.prototypes.len()
        ),
        Event::IdleTick(i) => writeln!(w, "{t:.9}\tidle\t{i}\t-"),
        Event::ServiceComplete(i) => writeln!(w, "{t:.9}\tdone\t{i}\t-"),
        Event::MetricsSample => writeln!(w, "{t:.9}\tmetrics\t-\t-"),
    }
}

fn serve_line(w: &mut dyn Write, s: &Serve) -> std::io::Result<()> {
    writeln!(
        w,
        "{:.9}\tserve\t{}\twork={} backlog={} queued={}",
        s.time,
        s.node,
        if s.sensor { "sensor" } else { "peer" },
        s.backlog,
        s.queued
    )
}
