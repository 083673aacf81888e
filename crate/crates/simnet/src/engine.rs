//! The deterministic event loop.
//!
//! Time is integer microseconds. Events are processed in nondecreasing time
//! with ties broken by (kind order, node id, sequence number), so a run is a
//! pure function of (scenario, seed). The protocol per broadcast tick:
//!
//! 1. the coordinator broadcasts the current stream position as a query;
//!    each node receives it after its downlink delay;
//! 2. a node notices pending work at its next listen tick; if it is already
//!    computing, the waiting query is superseded by the newest arrival;
//! 3. a finished prediction travels back over the uplink and joins the
//!    coordinator's arrival buffer;
//! 4. at every broadcast tick the coordinator re-manages the information set
//!    against the current query and runs the selected aggregator.
//!
//! Nodes apply delivered training samples at their listen ticks, before
//! picking up queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use asyncgp_core::{
    asyncdgp_aggregate, baseline_aggregate, f_lipschitz, lipschitz_closed_form,
    manage_information_set, AggregationResult, AggregatorKind, GPState, InformationSet,
    PredictionRecord,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};
use crate::scenario::{
    Mode, PretrainAssign, PretrainConfig, PretrainPlacement, SampleDispatch, ScenarioConfig,
};
use crate::stream::{materialize, MaterializedStream, StreamSource};

const US_PER_S: f64 = 1e6;

// Saturating conversion: absurd but finite delays collapse to "never
// delivered within any horizon" instead of overflowing the clock.
fn to_us(seconds: f64) -> u64 {
    (seconds * US_PER_S).round() as u64
}

fn after(at_us: u64, delay_s: f64) -> u64 {
    at_us.saturating_add(to_us(delay_s))
}

fn to_s(us: u64) -> f64 {
    us as f64 / US_PER_S
}

/// Event kinds in tie-break order.
#[derive(Debug, Clone)]
enum EventKind {
    Broadcast { tick: u64 },
    NodeListenTick,
    /// Carries the posterior evaluated from the expert's state at compute
    /// start; samples landing mid-computation do not leak into the reply.
    ComputeDone { query: Vec<f64>, mean: f64, std: f64 },
    ReplyDelivered { record: PredictionRecord },
    StreamSample { index: usize },
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::Broadcast { .. } => 0,
            EventKind::NodeListenTick => 1,
            EventKind::ComputeDone { .. } => 2,
            EventKind::ReplyDelivered { .. } => 3,
            EventKind::StreamSample { .. } => 4,
        }
    }
}

/// A scheduled event; ordering key is (time, kind rank, node, seq).
#[derive(Debug)]
struct SimEvent {
    at_us: u64,
    node: u32,
    seq: u64,
    kind: EventKind,
}

impl SimEvent {
    fn key(&self) -> (u64, u8, u32, u64) {
        (self.at_us, self.kind.rank(), self.node, self.seq)
    }
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for SimEvent {}
impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so BinaryHeap pops the earliest event first.
        other.key().cmp(&self.key())
    }
}

#[derive(Debug, Clone)]
struct WaitingQuery {
    arrival_us: u64,
    tick: u64,
    query: Vec<f64>,
}

struct NodeRuntime {
    gp: GPState,
    listen_period_us: u64,
    /// Queries in flight or arrived but not yet noticed.
    waiting: Vec<WaitingQuery>,
    /// Newest noticed query, not yet started.
    pending: Option<WaitingQuery>,
    computing: bool,
    /// Training samples delivered but not yet applied.
    train_inbox: Vec<(u64, u64, Vec<f64>, f64)>,
    /// Per-node reply counter (the record iteration k).
    iteration: u64,
    compute_count: u64,
    queries_scheduled: u64,
    queries_started: u64,
    queries_superseded: u64,
    replies_delivered: u64,
    training_scheduled: u64,
    training_applied: u64,
    /// Newest delivered reply: (iteration, produced_at).
    last_delivery: Option<(u64, f64)>,
}

/// Snapshot of one record retained in the managed set at a tick.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetRecordSnap {
    pub node_id: u32,
    pub iteration: u64,
    pub produced_at: f64,
    /// Age relative to the tick time: tick_t − produced_at.
    pub delta_t: f64,
}

/// Everything logged at one broadcast tick.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TickLog {
    pub tick: u64,
    pub t: f64,
    pub query: Vec<f64>,
    /// Noiseless ground truth for synthetic streams, dataset target for CSV.
    pub truth: f64,
    pub result: AggregationResult,
    /// True when the aggregator has no prior term and the set was empty, so
    /// the coordinator fell back to the prior mean.
    pub prior_fallback: bool,
    /// Managed-set contents after this tick's management pass.
    pub set_records: Vec<SetRecordSnap>,
    /// Per node: age of its newest *delivered* reply at this tick.
    pub node_delays: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub node_id: u32,
    pub queries_scheduled: u64,
    pub queries_started: u64,
    pub queries_superseded: u64,
    pub queries_outstanding: u64,
    pub replies_delivered: u64,
    pub training_scheduled: u64,
    pub training_applied: u64,
    pub training_outstanding: u64,
    /// queries_scheduled == started + superseded + outstanding.
    pub conservation_ok: bool,
    pub mean_delta_t: Option<f64>,
    pub max_delta_t: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub seed: u64,
    pub aggregator: String,
    pub duration_s: f64,
    pub ticks: u64,
    pub events_processed: u64,
    pub empty_set_ticks: u64,
    pub prior_fallback_ticks: u64,
    /// SHA-256 of the delivered prediction-record stream (JSONL bytes).
    pub stream_hash: String,
    /// SHA-256 of the delays.csv content.
    pub delay_trace_hash: String,
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    pub mean_omega: Option<f64>,
    pub max_omega: Option<f64>,
    /// Ticks where |truth − fused| > ω(t); only counted for AsyncDGP on
    /// synthetic streams (the only case with a noiseless truth and a bound).
    pub bound_violations: Option<u64>,
    pub conservation_ok: bool,
    pub per_node: Vec<NodeMetrics>,
}

/// Full in-memory result of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ticks: Vec<TickLog>,
    pub deliveries: Vec<PredictionRecord>,
    pub metrics: Metrics,
}

/// Per-tick ascending record ages of the managed set (𝔍̄ or fewer entries).
pub fn sorted_delay_view(ticks: &[TickLog]) -> Vec<(u64, Vec<f64>)> {
    ticks
        .iter()
        .map(|t| {
            let mut d: Vec<f64> = t.set_records.iter().map(|r| r.delta_t).collect();
            d.sort_by(f64::total_cmp);
            (t.tick, d)
        })
        .collect()
}

/// Lengths of maximal strictly-increasing runs in a series; the sawtooth
/// backlog signature shows up as repeated long runs.
pub fn monotone_growth_segments(series: &[f64]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut len = 1usize;
    for w in series.windows(2) {
        if w[1] > w[0] {
            len += 1;
        } else {
            if len > 1 {
                runs.push(len);
            }
            len = 1;
        }
    }
    if len > 1 {
        runs.push(len);
    }
    runs
}

/// Run a regression-mode scenario to completion.
pub fn run_simulation(scenario: &ScenarioConfig) -> Result<RunOutput> {
    scenario.validate()?;
    if scenario.mode != Mode::Regression {
        return Err(SimError::Validation(
            "run_simulation handles regression mode; control mode runs through the tracking layer"
                .into(),
        ));
    }

    let synthetic_truth = matches!(scenario.stream, StreamSource::Synthetic(_));
    let (stream, pretrain) = materialize_with_pretrain(scenario)?;

    let gp_cfg = scenario.coordinator_gp().clone();
    let l_f = f_lipschitz(gp_cfg.gamma, lipschitz_closed_form(&gp_cfg.kernel))
        .map_err(SimError::Core)?;

    let mut nodes: Vec<NodeRuntime> = Vec::with_capacity(scenario.nodes.len());
    for (i, node_cfg) in scenario.nodes.iter().enumerate() {
        let mut gp = GPState::new(node_cfg.gp.clone()).map_err(SimError::Core)?;
        for (x, y) in &pretrain[i] {
            gp.update(x, *y).map_err(SimError::Core)?;
        }
        nodes.push(NodeRuntime {
            gp,
            listen_period_us: to_us(1.0 / node_cfg.listen_hz).max(1),
            waiting: Vec::new(),
            pending: None,
            computing: false,
            train_inbox: Vec::new(),
            iteration: 0,
            compute_count: 0,
            queries_scheduled: 0,
            queries_started: 0,
            queries_superseded: 0,
            replies_delivered: 0,
            training_scheduled: 0,
            training_applied: 0,
            last_delivery: None,
        });
    }

    let end_us = to_us(scenario.duration_s);
    let interval_us = to_us(scenario.broadcast_interval_s);
    let mut heap: BinaryHeap<SimEvent> = BinaryHeap::new();
    let mut seq = 0u64;

    push_event(&mut heap, &mut seq, 0, u32::MAX, EventKind::Broadcast { tick: 0 });
    for node_id in 0..nodes.len() {
        push_event(&mut heap, &mut seq, 0, node_id as u32, EventKind::NodeListenTick);
    }
    if scenario.dispatch != SampleDispatch::None && !stream.points.is_empty() {
        push_event(&mut heap, &mut seq, to_us(stream.points[0].t), u32::MAX, EventKind::StreamSample { index: 0 });
    }

    let mut iset = InformationSet::new(scenario.info_capacity).map_err(SimError::Core)?;
    let mut arrivals: Vec<PredictionRecord> = Vec::new();
    let mut deliveries: Vec<PredictionRecord> = Vec::new();
    let mut ticks: Vec<TickLog> = Vec::new();
    let mut events_processed = 0u64;

    while let Some(front) = heap.peek() {
        let now_us = front.at_us;
        if now_us > end_us {
            break;
        }
        let mut tick_due: Option<u64> = None;

        while heap.peek().map_or(false, |e| e.at_us == now_us) {
            let ev = heap.pop().expect("peeked");
            events_processed += 1;
            if events_processed > scenario.max_events {
                return Err(SimError::EventOverflow {
                    processed: events_processed,
                    limit: scenario.max_events,
                });
            }
            match ev.kind {
                EventKind::Broadcast { tick } => {
                    let t = to_s(now_us);
                    let idx = stream
                        .index_at(t)
                        .ok_or_else(|| SimError::Stream("no stream point at broadcast".into()))?;
                    let query = stream.points[idx].x.clone();
                    for (node_id, node_cfg) in scenario.nodes.iter().enumerate() {
                        let delay = node_cfg.downlink.sample(tick);
                        let arrival_us = after(now_us, delay);
                        nodes[node_id].queries_scheduled += 1;
                        nodes[node_id].waiting.push(WaitingQuery {
                            arrival_us,
                            tick,
                            query: query.clone(),
                        });
                    }
                    tick_due = Some(tick);
                    let next = now_us.saturating_add(interval_us);
                    if next <= end_us {
                        push_event(&mut heap, &mut seq, next, u32::MAX, EventKind::Broadcast { tick: tick + 1 });
                    }
                }
                EventKind::NodeListenTick => {
                    let node_id = ev.node as usize;
                    listen_tick(&mut nodes[node_id], node_id, now_us, scenario, &mut heap, &mut seq)?;
                    let next = now_us.saturating_add(nodes[node_id].listen_period_us);
                    if next <= end_us {
                        push_event(&mut heap, &mut seq, next, ev.node, EventKind::NodeListenTick);
                    }
                }
                EventKind::ComputeDone { query, mean, std } => {
                    let node_id = ev.node as usize;
                    let node = &mut nodes[node_id];
                    node.computing = false;
                    let produced_at = to_s(now_us);
                    let record = PredictionRecord {
                        node_id: ev.node,
                        iteration: node.iteration,
                        query_point: query,
                        mean,
                        std,
                        produced_at,
                        received_at: 0.0, // stamped at delivery
                    };
                    node.iteration += 1;
                    let uplink = scenario.nodes[node_id].uplink.sample(record.iteration);
                    let deliver_us = after(now_us, uplink);
                    push_event(&mut heap, &mut seq, deliver_us, ev.node, EventKind::ReplyDelivered { record });
                }
                EventKind::ReplyDelivered { mut record } => {
                    let node_id = ev.node as usize;
                    record.received_at = to_s(now_us);
                    nodes[node_id].replies_delivered += 1;
                    nodes[node_id].last_delivery = Some((record.iteration, record.produced_at));
                    deliveries.push(record.clone());
                    arrivals.push(record);
                }
                EventKind::StreamSample { index } => {
                    let point = &stream.points[index];
                    let targets: Vec<usize> = match scenario.dispatch {
                        SampleDispatch::None => Vec::new(),
                        SampleDispatch::RoundRobin => vec![index % nodes.len()],
                        SampleDispatch::All => (0..nodes.len()).collect(),
                    };
                    for node_id in targets {
                        let delay = scenario.nodes[node_id].downlink.sample((1 << 32) + index as u64);
                        let arrival_us = after(now_us, delay);
                        nodes[node_id].training_scheduled += 1;
                        seq += 1;
                        nodes[node_id].train_inbox.push((arrival_us, seq, point.x.clone(), point.y));
                    }
                    if index + 1 < stream.points.len() {
                        let at = to_us(stream.points[index + 1].t);
                        if at <= end_us {
                            push_event(&mut heap, &mut seq, at, u32::MAX, EventKind::StreamSample { index: index + 1 });
                        }
                    }
                }
            }
        }

        if let Some(tick) = tick_due {
            let t = to_s(now_us);
            let idx = stream.index_at(t).expect("checked at broadcast");
            let query = stream.points[idx].x.clone();
            let truth = stream.points[idx].truth;
            let incoming = std::mem::take(&mut arrivals);
            iset = manage_information_set(&iset, &incoming, &query, &gp_cfg, l_f)
                .map_err(SimError::Core)?;

            let (result, prior_fallback) = if iset.is_empty() && !scenario.aggregator.has_prior_term() {
                (
                    AggregationResult {
                        fused_mean: gp_cfg.prior_mean_const,
                        weights: Vec::new(),
                        prior_weight: 1.0,
                        rho: 0.0,
                        omega: None,
                        etas: Vec::new(),
                    },
                    true,
                )
            } else if scenario.aggregator == AggregatorKind::AsyncDgp {
                (
                    asyncdgp_aggregate(&iset, &query, &gp_cfg, l_f, scenario.responsibility)
                        .map_err(SimError::Core)?,
                    false,
                )
            } else {
                (
                    baseline_aggregate(scenario.aggregator, &iset, &query, &gp_cfg)
                        .map_err(SimError::Core)?,
                    false,
                )
            };

            let set_records: Vec<SetRecordSnap> = iset
                .records()
                .iter()
                .map(|r| SetRecordSnap {
                    node_id: r.node_id,
                    iteration: r.iteration,
                    produced_at: r.produced_at,
                    delta_t: t - r.produced_at,
                })
                .collect();
            let node_delays: Vec<Option<f64>> = nodes
                .iter()
                .map(|n| n.last_delivery.map(|(_, produced)| t - produced))
                .collect();

            ticks.push(TickLog {
                tick,
                t,
                query,
                truth,
                result,
                prior_fallback,
                set_records,
                node_delays,
            });
        }
    }

    let metrics = build_metrics(scenario, &ticks, &deliveries, &nodes, events_processed, synthetic_truth);
    Ok(RunOutput { ticks, deliveries, metrics })
}

fn push_event(heap: &mut BinaryHeap<SimEvent>, seq: &mut u64, at_us: u64, node: u32, kind: EventKind) {
    *seq += 1;
    heap.push(SimEvent { at_us, node, seq: *seq, kind });
}

fn listen_tick(
    node: &mut NodeRuntime,
    node_id: usize,
    now_us: u64,
    scenario: &ScenarioConfig,
    heap: &mut BinaryHeap<SimEvent>,
    seq: &mut u64,
) -> Result<()> {
    // Training first: data precedes the next prediction.
    if !node.train_inbox.is_empty() {
        let mut arrived: Vec<(u64, u64, Vec<f64>, f64)> = Vec::new();
        node.train_inbox.retain(|item| {
            if item.0 <= now_us {
                arrived.push(item.clone());
                false
            } else {
                true
            }
        });
        arrived.sort_by_key(|item| (item.0, item.1));
        for (_, _, x, y) in arrived {
            node.gp.update(&x, y).map_err(SimError::Core)?;
            node.training_applied += 1;
        }
    }

    // Notice arrived queries; a single-query worker keeps only the newest,
    // displaced ones count as superseded.
    let mut arrived: Vec<WaitingQuery> = Vec::new();
    node.waiting.retain(|q| {
        if q.arrival_us <= now_us {
            arrived.push(q.clone());
            false
        } else {
            true
        }
    });
    if !arrived.is_empty() {
        arrived.sort_by_key(|q| q.tick);
        let newest = arrived.pop().expect("non-empty");
        node.queries_superseded += arrived.len() as u64;
        match &node.pending {
            Some(held) if held.tick >= newest.tick => {
                node.queries_superseded += 1; // arrival is older than held work
            }
            Some(_) => {
                node.queries_superseded += 1; // held work displaced
                node.pending = Some(newest);
            }
            None => node.pending = Some(newest),
        }
    }

    if !node.computing {
        if let Some(job) = node.pending.take() {
            node.computing = true;
            node.queries_started += 1;
            let post = node.gp.predict(&job.query).map_err(SimError::Core)?;
            let latency = scenario.nodes[node_id]
                .compute
                .latency(node.compute_count, node.gp.len());
            node.compute_count += 1;
            let done_us = after(now_us, latency);
            push_event(heap, seq, done_us, node_id as u32, EventKind::ComputeDone {
                query: job.query,
                mean: post.mean,
                std: post.std,
            });
        }
    }
    Ok(())
}

fn build_metrics(
    scenario: &ScenarioConfig,
    ticks: &[TickLog],
    deliveries: &[PredictionRecord],
    nodes: &[NodeRuntime],
    events_processed: u64,
    synthetic_truth: bool,
) -> Metrics {
    let mut stream_hasher = Sha256::new();
    for rec in deliveries {
        stream_hasher.update(rec.to_json_line().as_bytes());
        stream_hasher.update(b"\n");
    }
    let stream_hash = hex_digest(stream_hasher);

    let delays_csv = crate::output::delays_csv_string(ticks);
    let mut delay_hasher = Sha256::new();
    delay_hasher.update(delays_csv.as_bytes());
    let delay_trace_hash = hex_digest(delay_hasher);

    let n = ticks.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for t in ticks {
        let e = t.result.fused_mean - t.truth;
        se += e * e;
        ae += e.abs();
    }
    let (mse, mae) = if ticks.is_empty() { (None, None) } else { (Some(se / n), Some(ae / n)) };

    let omegas: Vec<f64> = ticks.iter().filter_map(|t| t.result.omega).collect();
    let mean_omega = if omegas.is_empty() {
        None
    } else {
        Some(omegas.iter().sum::<f64>() / omegas.len() as f64)
    };
    let max_omega = omegas.iter().copied().reduce(f64::max);

    let bound_violations = if scenario.aggregator == AggregatorKind::AsyncDgp && synthetic_truth {
        Some(
            ticks
                .iter()
                .filter(|t| {
                    t.result
                        .omega
                        .map(|w| (t.result.fused_mean - t.truth).abs() > w)
                        .unwrap_or(false)
                })
                .count() as u64,
        )
    } else {
        None
    };

    let per_node: Vec<NodeMetrics> = nodes
        .iter()
        .enumerate()
        .map(|(i, node)| {
            let outstanding = node.waiting.len() as u64 + node.pending.is_some() as u64;
            let conservation_ok = node.queries_scheduled
                == node.queries_started + node.queries_superseded + outstanding;
            let deltas: Vec<f64> = ticks
                .iter()
                .filter_map(|t| t.node_delays.get(i).copied().flatten())
                .collect();
            NodeMetrics {
                node_id: i as u32,
                queries_scheduled: node.queries_scheduled,
                queries_started: node.queries_started,
                queries_superseded: node.queries_superseded,
                queries_outstanding: outstanding,
                replies_delivered: node.replies_delivered,
                training_scheduled: node.training_scheduled,
                training_applied: node.training_applied,
                training_outstanding: node.train_inbox.len() as u64,
                conservation_ok,
                mean_delta_t: if deltas.is_empty() {
                    None
                } else {
                    Some(deltas.iter().sum::<f64>() / deltas.len() as f64)
                },
                max_delta_t: deltas.iter().copied().reduce(f64::max),
            }
        })
        .collect();

    Metrics {
        seed: scenario.seed,
        aggregator: scenario.aggregator.name().to_string(),
        duration_s: scenario.duration_s,
        ticks: ticks.len() as u64,
        events_processed,
        empty_set_ticks: ticks.iter().filter(|t| t.set_records.is_empty()).count() as u64,
        prior_fallback_ticks: ticks.iter().filter(|t| t.prior_fallback).count() as u64,
        stream_hash,
        delay_trace_hash,
        mse,
        mae,
        mean_omega,
        max_omega,
        bound_violations,
        conservation_ok: per_node.iter().all(|m| m.conservation_ok),
        per_node,
    }
}

fn hex_digest(hasher: Sha256) -> String {
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Materialize the stream and build per-node pretraining sets.
fn materialize_with_pretrain(
    scenario: &ScenarioConfig,
) -> Result<(MaterializedStream, Vec<Vec<(Vec<f64>, f64)>>)> {
    let n_nodes = scenario.nodes.len();
    let mut pretrain: Vec<Vec<(Vec<f64>, f64)>> = vec![Vec::new(); n_nodes];

    match (&scenario.stream, &scenario.pretrain) {
        (StreamSource::Synthetic(_), Some(p)) => {
            let stream = materialize(&scenario.stream, scenario.duration_s, scenario.seed)?;
            let expansion = stream.truth_fn.as_ref().expect("synthetic stream has truth");
            let points = pretrain_inputs_synthetic(scenario, p)?;
            assign_pretrain(scenario, p, &points, expansion, &mut pretrain);
            Ok((stream, pretrain))
        }
        (StreamSource::Synthetic(_), None) => {
            let stream = materialize(&scenario.stream, scenario.duration_s, scenario.seed)?;
            Ok((stream, pretrain))
        }
        (
            StreamSource::CsvDataset { path, input_cols, target_col, sample_rate_hz, shuffle },
            maybe_pre,
        ) => {
            let rows = crate::stream::read_csv_rows(path, input_cols, *target_col)?;
            if rows.is_empty() {
                return Err(SimError::Stream(format!("{path}: no usable rows")));
            }
            let mut order: Vec<usize> = (0..rows.len()).collect();
            if *shuffle {
                let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
                for i in (1..order.len()).rev() {
                    let j = rng.random_range(0..=i);
                    order.swap(i, j);
                }
            }
            let skip = if let Some(p) = maybe_pre {
                if rows.len() <= p.n_points {
                    return Err(SimError::Validation(format!(
                        "csv has {} rows, pretraining wants {} plus a stream",
                        rows.len(),
                        p.n_points
                    )));
                }
                for (i, &row) in order[..p.n_points].iter().enumerate() {
                    let (x, y) = rows[row].clone();
                    match p.assign {
                        PretrainAssign::Shared => {
                            for node in pretrain.iter_mut() {
                                node.push((x.clone(), y));
                            }
                        }
                        PretrainAssign::RoundRobin => pretrain[i % n_nodes].push((x, y)),
                    }
                }
                p.n_points
            } else {
                0
            };
            let n = (((scenario.duration_s * sample_rate_hz).floor() as usize) + 1)
                .min(rows.len() - skip);
            let points = (0..n)
                .map(|i| {
                    let (x, y) = rows[order[skip + i]].clone();
                    crate::stream::StreamPoint { t: i as f64 / sample_rate_hz, x, truth: y, y }
                })
                .collect();
            Ok((
                MaterializedStream { points, dim: input_cols.len(), truth_fn: None },
                pretrain,
            ))
        }
    }
}

fn pretrain_inputs_synthetic(scenario: &ScenarioConfig, p: &PretrainConfig) -> Result<Vec<Vec<f64>>> {
    let StreamSource::Synthetic(s) = &scenario.stream else { unreachable!("checked by caller") };
    match p.placement {
        PretrainPlacement::Path => {
            // Evenly spaced along the query path over the run horizon.
            let n = p.n_points;
            Ok((0..n)
                .map(|i| s.path.position(i as f64 * scenario.duration_s / n as f64))
                .collect())
        }
        PretrainPlacement::Domain => {
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ 0x9E3779B97F4A7C15);
            Ok((0..p.n_points)
                .map(|_| s.domain.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect())
                .collect())
        }
    }
}

fn assign_pretrain(
    scenario: &ScenarioConfig,
    p: &PretrainConfig,
    points: &[Vec<f64>],
    expansion: &crate::stream::KernelExpansion,
    pretrain: &mut [Vec<(Vec<f64>, f64)>],
) {
    let n_nodes = pretrain.len();
    for (i, x) in points.iter().enumerate() {
        let truth = expansion.eval(x);
        match p.assign {
            PretrainAssign::Shared => {
                for (node_id, node) in pretrain.iter_mut().enumerate() {
                    let y = truth + pretrain_noise(scenario.seed, node_id as u64, i as u64, p.noise_std);
                    node.push((x.clone(), y));
                }
            }
            PretrainAssign::RoundRobin => {
                let node_id = i % n_nodes;
                let y = truth + pretrain_noise(scenario.seed, node_id as u64, i as u64, p.noise_std);
                pretrain[node_id].push((x.clone(), y));
            }
        }
    }
}

fn pretrain_noise(seed: u64, node: u64, index: u64, noise_std: f64) -> f64 {
    if noise_std == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed ^ node.wrapping_mul(0xD6E8_FEB8_6659_FD93) ^ index.wrapping_mul(0x2545_F491_4F6C_DD1D),
    );
    let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
    noise_std * z
}
