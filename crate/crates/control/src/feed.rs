//! Delayed expert-prediction feed for the control loop.
//!
//! A tick-driven counterpart of the event simulator's node model: every
//! broadcast interval the plant state is sent to the expert pool, each node
//! answers after its listen-granularity pickup, compute latency and link
//! delays, and the coordinator manages/aggregates whatever has arrived. A
//! node is a single-query worker; a query that is still waiting when a newer
//! one arrives is superseded.

use asyncgp_core::{
    asyncdgp_aggregate, f_lipschitz, lipschitz_closed_form, manage_information_set,
    AggregationResult, GPConfig, GPState, InformationSet, PredictionRecord, ResponsibilityRule,
};
use asyncgp_simnet::NodeConfig;

use crate::error::{ControlError, Result};

/// Tick-driven pool of delayed GP experts plus the coordinator state.
#[derive(Clone)]
pub struct ExpertPool {
    nodes: Vec<NodeState>,
    iset: InformationSet,
    arrivals: Vec<PredictionRecord>,
    in_flight: Vec<(f64, PredictionRecord)>,
    gp_cfg: GPConfig,
    l_f: f64,
    rule: ResponsibilityRule,
    tick_counter: u64,
}

#[derive(Clone)]
struct NodeState {
    gp: GPState,
    cfg: NodeConfig,
    /// Time the node finishes its current computation.
    busy_until: f64,
    /// Arrived (or arriving) query not yet started: (arrival time, query).
    pending: Option<(f64, Vec<f64>)>,
    iteration: u64,
    compute_count: u64,
    superseded: u64,
}

impl ExpertPool {
    /// Build a pool from node configs and pretraining samples distributed
    /// round-robin (each node keeps its newest `max_data`).
    pub fn new(
        nodes: &[NodeConfig],
        info_capacity: usize,
        rule: ResponsibilityRule,
        pretrain: &[(Vec<f64>, f64)],
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(ControlError::Validation("expert pool needs at least one node".into()));
        }
        let gp_cfg = nodes[0].gp.clone();
        let l_f = f_lipschitz(gp_cfg.gamma, lipschitz_closed_form(&gp_cfg.kernel))?;
        let mut states = Vec::with_capacity(nodes.len());
        for (i, cfg) in nodes.iter().enumerate() {
            let mut gp = GPState::new(cfg.gp.clone())?;
            for (j, (x, y)) in pretrain.iter().enumerate() {
                if j % nodes.len() == i {
                    gp.update(x, *y)?;
                }
            }
            states.push(NodeState {
                gp,
                cfg: cfg.clone(),
                busy_until: 0.0,
                pending: None,
                iteration: 0,
                compute_count: 0,
                superseded: 0,
            });
        }
        Ok(Self {
            nodes: states,
            iset: InformationSet::new(info_capacity)?,
            arrivals: Vec::new(),
            in_flight: Vec::new(),
            gp_cfg,
            l_f,
            rule,
            tick_counter: 0,
        })
    }

    pub fn gp_config(&self) -> &GPConfig {
        &self.gp_cfg
    }

    pub fn l_f(&self) -> f64 {
        self.l_f
    }

    pub fn records_retained(&self) -> usize {
        self.iset.len()
    }

    pub fn total_superseded(&self) -> u64 {
        self.nodes.iter().map(|n| n.superseded).sum()
    }

    /// One coordinator tick at time `t` with plant state `x`: deliver due
    /// replies, manage the information set against `x`, aggregate, then
    /// broadcast `x` as the next query.
    pub fn tick(&mut self, t: f64, x: &[f64]) -> Result<AggregationResult> {
        self.advance(t)?;

        let incoming = std::mem::take(&mut self.arrivals);
        self.iset = manage_information_set(&self.iset, &incoming, x, &self.gp_cfg, self.l_f)?;
        let result = asyncdgp_aggregate(&self.iset, x, &self.gp_cfg, self.l_f, self.rule)?;

        self.broadcast(t, x)?;
        self.tick_counter += 1;
        Ok(result)
    }

    /// Start any pending work whose start time has passed and collect replies
    /// delivered by `t`.
    fn advance(&mut self, t: f64) -> Result<()> {
        for node_id in 0..self.nodes.len() {
            let start_due = {
                let node = &self.nodes[node_id];
                node.pending
                    .as_ref()
                    .map(|(arrival, _)| pending_start(node, *arrival))
                    .filter(|s| *s <= t)
            };
            if start_due.is_some() {
                self.start_pending(node_id)?;
            }
        }
        self.in_flight.sort_by(|a, b| {
            a.0.total_cmp(&b.0).then_with(|| (a.1.node_id, a.1.iteration).cmp(&(b.1.node_id, b.1.iteration)))
        });
        let mut keep = Vec::new();
        for (deliver_t, mut rec) in self.in_flight.drain(..) {
            if deliver_t <= t {
                rec.received_at = deliver_t;
                self.arrivals.push(rec);
            } else {
                keep.push((deliver_t, rec));
            }
        }
        self.in_flight = keep;
        Ok(())
    }

    fn broadcast(&mut self, t: f64, x: &[f64]) -> Result<()> {
        let tick = self.tick_counter;
        for node_id in 0..self.nodes.len() {
            let arrival = t + self.nodes[node_id].cfg.downlink.sample(tick);
            let displaced = {
                let node = &self.nodes[node_id];
                match &node.pending {
                    // The held query starts before the new one arrives: run it.
                    Some((held_arrival, _)) if pending_start(node, *held_arrival) <= arrival => {
                        Some(true)
                    }
                    Some(_) => Some(false),
                    None => None,
                }
            };
            match displaced {
                Some(true) => self.start_pending(node_id)?,
                Some(false) => {
                    self.nodes[node_id].pending = None;
                    self.nodes[node_id].superseded += 1;
                }
                None => {}
            }
            self.nodes[node_id].pending = Some((arrival, x.to_vec()));
        }
        Ok(())
    }

    fn start_pending(&mut self, node_id: usize) -> Result<()> {
        let node = &mut self.nodes[node_id];
        let Some((arrival, query)) = node.pending.take() else {
            return Ok(());
        };
        let start = pending_start(node, arrival);
        let latency = node.cfg.compute.latency(node.compute_count, node.gp.len());
        node.compute_count += 1;
        let produced_at = start + latency;
        node.busy_until = produced_at;
        let post = node.gp.predict(&query)?;
        let record = PredictionRecord {
            node_id: node_id as u32,
            iteration: node.iteration,
            query_point: query,
            mean: post.mean,
            std: post.std,
            produced_at,
            received_at: produced_at, // stamped at delivery
        };
        node.iteration += 1;
        let deliver_t = produced_at + node.cfg.uplink.sample(record.iteration);
        self.in_flight.push((deliver_t, record));
        Ok(())
    }
}

fn pending_start(node: &NodeState, arrival: f64) -> f64 {
    let period = 1.0 / node.cfg.listen_hz;
    ((arrival.max(node.busy_until)) / period - 1e-9).ceil() * period
}
