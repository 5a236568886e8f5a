//! Discrete-event loop tying traffic, base stations, CR nodes and metrics
//! together, plus parameter sweeps.

pub mod event;
pub mod scenario;
mod sweep;

pub use sweep::{apply_axis, sweep, SweepAxis, SweepRow};

use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::{MetricsAccumulator, MetricsReport, ProviderSetup};
use crate::protocol::{
    build_candidates, grant_order, Action, BsState, CandidateParams, CrNodeState, Message, MessageKind, NodeId,
    Placement, ProtocolConfig, RequestId, SensingErrors, Timer,
};
use crate::traffic::{draw_holding, next_arrival, stream_rng, Call, SimRng, Stream, TrafficModel};
use crate::world::{CellId, ChannelId, Occupancy, ProviderId, World};
use event::{EventKind, EventQueue, Payload};
use scenario::Scenario;

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Keep one line per protocol message.
    pub trace: bool,
    /// Keep one record per decided call.
    pub call_log: bool,
    /// Keep every change of a provider's busy channel count.
    pub occupancy_trace: bool,
    /// Check conservation and occupancy consistency after every event.
    pub check_invariants: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { trace: false, call_log: false, occupancy_trace: false, check_invariants: true }
    }
}

impl RunOptions {
    pub fn everything() -> Self {
        RunOptions { trace: true, call_log: true, occupancy_trace: true, check_invariants: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceLine {
    pub time: f64,
    pub kind: MessageKind,
    pub src: NodeId,
    pub dst: NodeId,
    pub summary: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallRecord {
    pub id: u64,
    pub provider: ProviderId,
    pub cell: CellId,
    pub arrival: f64,
    pub decided_at: f64,
    pub blocked: bool,
    pub channel: Option<ChannelId>,
    pub borrowed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancySample {
    pub time: f64,
    pub provider: ProviderId,
    pub n_busy: usize,
}

/// Message accounting for one borrowing round of a base station.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub request: RequestId,
    pub cell: CellId,
    pub started: f64,
    pub channel_requests: usize,
    pub broadcasts: usize,
    /// (responding CR node, delivery time at the base station)
    pub responses: Vec<(usize, f64)>,
    pub partial_responses: usize,
}

/// Final per-provider call counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CallCounts {
    pub arrivals: Vec<u64>,
    pub blocked: Vec<u64>,
    pub completed: Vec<u64>,
    pub active: Vec<u64>,
    pub waiting: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub trace: Vec<TraceLine>,
    pub call_log: Vec<CallRecord>,
    pub occupancy_trace: Vec<OccupancySample>,
    pub episodes: Vec<EpisodeRecord>,
    pub counts: CallCounts,
    pub window_start: f64,
    pub end_time: f64,
    pub events_processed: u64,
}

struct Rngs {
    rates: SimRng,
    arrivals: Vec<SimRng>,
    holding: Vec<SimRng>,
    cells: Vec<SimRng>,
}

struct Sim<'a> {
    scenario: &'a Scenario,
    opts: RunOptions,
    cfg: ProtocolConfig,
    world: World,
    model: TrafficModel,
    owners: Vec<ProviderId>,
    occ: Occupancy,
    bs: Vec<BsState>,
    cr: Vec<CrNodeState>,
    sensing_errors: Option<SensingErrors>,
    queue: EventQueue,
    metrics: MetricsAccumulator,
    rngs: Rngs,
    rates: Vec<f64>,
    generation: Vec<u64>,
    counts: CallCounts,
    calls: std::collections::HashMap<u64, Call>,
    next_call: u64,
    next_request: RequestId,
    now: f64,
    end: f64,
    out_trace: Vec<TraceLine>,
    out_calls: Vec<CallRecord>,
    out_occ: Vec<OccupancySample>,
    episodes: Vec<EpisodeRecord>,
    events: u64,
}

/// Runs one scenario to completion. Same scenario and seed give the same
/// output bit for bit.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    scenario.validate()?;
    Sim::new(scenario, *opts)?.run()
}

impl<'a> Sim<'a> {
    fn new(scenario: &'a Scenario, opts: RunOptions) -> Result<Self> {
        let world = scenario.build_world()?;
        let model = scenario.traffic_model()?;
        let cfg = scenario.protocol_config();
        let n = scenario.n_providers;
        let seed = scenario.seed;
        let owners = world.channels.iter().map(|c| c.owner).collect();
        let occ = world.empty_occupancy();
        let bs = world.topology.cells.iter().map(|c| BsState::new(&world, c.id)).collect();
        let cr = world
            .topology
            .cr_nodes
            .iter()
            .map(|node| CrNodeState::new(node, world.channels.len(), cfg.history_window))
            .collect();
        let p = &scenario.protocol;
        let sensing_errors = (p.false_free_prob > 0.0 || p.false_busy_prob > 0.0).then(|| SensingErrors {
            false_free: p.false_free_prob,
            false_busy: p.false_busy_prob,
            rng: stream_rng(seed, Stream::Sensing),
        });
        let n_sites = world.topology.sites.len() as u64;
        let setups = world
            .providers
            .iter()
            .map(|sp| ProviderSetup {
                n_channels: sp.licensed_channels.len(),
                user_slots: sp.licensed_channels.len() as u64 * scenario.channel_capacity as u64 * n_sites,
                alpha: sp.alpha,
            })
            .collect();
        let end = scenario.t_obs_s;
        let metrics = MetricsAccumulator::new(end * scenario.warmup_fraction, setups);
        let rngs = Rngs {
            rates: stream_rng(seed, Stream::Rates),
            arrivals: (0..n).map(|p| stream_rng(seed, Stream::Arrivals(ProviderId(p)))).collect(),
            holding: (0..n).map(|p| stream_rng(seed, Stream::Holding(ProviderId(p)))).collect(),
            cells: (0..n).map(|p| stream_rng(seed, Stream::CellChoice(ProviderId(p)))).collect(),
        };
        let zeros = vec![0u64; n];
        Ok(Sim {
            scenario,
            opts,
            cfg,
            world,
            model,
            owners,
            occ,
            bs,
            cr,
            sensing_errors,
            queue: EventQueue::new(),
            metrics,
            rngs,
            rates: vec![0.0; n],
            generation: vec![0; n],
            counts: CallCounts {
                arrivals: zeros.clone(),
                blocked: zeros.clone(),
                completed: zeros.clone(),
                active: zeros.clone(),
                waiting: zeros,
            },
            calls: Default::default(),
            next_call: 0,
            next_request: 0,
            now: 0.0,
            end,
            out_trace: Vec::new(),
            out_calls: Vec::new(),
            out_occ: Vec::new(),
            episodes: Vec::new(),
            events: 0,
        })
    }

    /// Events past the end of the run are never scheduled.
    fn schedule(&mut self, time: f64, payload: Payload) {
        if time <= self.end {
            self.queue.push(time, payload);
        }
    }

    fn run(mut self) -> Result<RunOutput> {
        self.schedule(0.0, Payload::RateRedraw);
        if self.scenario.sharing_enabled {
            self.schedule(0.0, Payload::SenseSweep);
        }
        self.queue.push(self.end, Payload::EndOfRun);

        while let Some(ev) = self.queue.pop() {
            if ev.time < self.now {
                return Err(Error::invariant(format!("event time regression: {} < {}", ev.time, self.now)));
            }
            self.now = ev.time;
            self.events += 1;
            let kind = ev.kind;
            if kind == EventKind::EndOfRun {
                break;
            }
            self.handle(ev.payload).map_err(|e| self.dump(kind, e))?;
            if self.opts.check_invariants {
                self.check_invariants().map_err(|e| self.dump(kind, e))?;
            }
        }
        if !self.queue.is_empty() {
            return Err(Error::invariant(format!("{} events left after end of run", self.queue.len())));
        }

        let report = self.metrics.finish(self.end)?;
        Ok(RunOutput {
            report,
            trace: self.out_trace,
            call_log: self.out_calls,
            occupancy_trace: self.out_occ,
            episodes: self.episodes,
            counts: self.counts,
            window_start: self.metrics.window_start(),
            end_time: self.end,
            events_processed: self.events,
        })
    }

    fn dump(&self, kind: EventKind, e: Error) -> Error {
        match e {
            Error::Invariant(msg) => Error::invariant(format!(
                "{msg}\n  at t={} while handling {kind:?}\n  counts={:?}\n  users={} rates={:?}",
                self.now,
                self.counts,
                self.occ.total_users(),
                self.rates
            )),
            other => other,
        }
    }

    fn handle(&mut self, payload: Payload) -> Result<()> {
        match payload {
            Payload::Arrival { provider, generation } => {
                if generation == self.generation[provider.0] {
                    self.on_arrival(provider)?;
                }
            }
            Payload::Departure { call, provider, site, channel } => self.on_departure(call, provider, site, channel)?,
            Payload::Deliver(msg) => self.on_message(msg)?,
            Payload::Protocol(Timer::ReplyTimeout { cr, request }) => {
                let acts = self.cr[cr.0].on_reply_timeout(request, self.now, &self.owners);
                self.perform(acts);
            }
            Payload::PendingTimeout { cell, call } => {
                if let Some(w) = self.bs[cell.0].remove_waiting(call) {
                    self.counts.waiting[w.call.provider.0] -= 1;
                    self.block(w.call);
                }
            }
            Payload::SenseSweep => self.on_sense_sweep(),
            Payload::RateRedraw => self.on_rate_redraw()?,
            Payload::EndOfRun => unreachable!("handled by the loop"),
        }
        Ok(())
    }

    fn on_rate_redraw(&mut self) -> Result<()> {
        self.rates = self.model.sample_rates(&mut self.rngs.rates);
        for p in 0..self.rates.len() {
            self.generation[p] += 1;
            let erlangs = self.rates[p] * self.model.mean_holding;
            self.metrics.record_offered_load(ProviderId(p), erlangs, self.now)?;
            self.schedule_arrival(ProviderId(p));
        }
        if let Some(epoch) = self.model.epoch_length {
            self.schedule(self.now + epoch, Payload::RateRedraw);
        }
        Ok(())
    }

    fn schedule_arrival(&mut self, p: ProviderId) {
        let t = next_arrival(self.rates[p.0], self.now, &mut self.rngs.arrivals[p.0]);
        self.schedule(t, Payload::Arrival { provider: p, generation: self.generation[p.0] });
    }

    fn on_arrival(&mut self, provider: ProviderId) -> Result<()> {
        let p = provider.0;
        // every stream is consumed whatever the decision, so runs that differ
        // only in policy see the same offered traffic
        let holding = draw_holding(self.model.mean_holding, &mut self.rngs.holding[p]);
        let site = self.rngs.cells[p].random_range(0..self.world.topology.cells_per_provider);
        let cell = self.world.topology.cell_id(provider, site);
        self.schedule_arrival(provider);

        let call = Call { id: self.next_call, provider, cell, arrival_time: self.now, holding_time: holding };
        self.next_call += 1;
        self.counts.arrivals[p] += 1;
        self.trace_msg(MessageKind::ServiceRequest, NodeId::Mobile(call.id), NodeId::Bs(cell), format!("sp={p}"));

        if let Some(placement) = self.bs[cell.0].admit_local(&self.occ) {
            return self.admit(call, placement);
        }
        if !self.scenario.sharing_enabled {
            self.block(call);
            return Ok(());
        }
        let deadline = self.now + self.cfg.pending_timeout;
        self.bs[cell.0].enqueue(call, deadline);
        self.counts.waiting[p] += 1;
        self.schedule(deadline, Payload::PendingTimeout { cell, call: call.id });
        if !self.bs[cell.0].has_pending_request() {
            let request = self.next_request;
            let acts = self.bs[cell.0].handle_overload(&self.occ, request, self.now);
            if !acts.is_empty() {
                self.next_request += 1;
                self.episodes.push(EpisodeRecord {
                    request,
                    cell,
                    started: self.now,
                    channel_requests: 0,
                    broadcasts: 0,
                    responses: Vec::new(),
                    partial_responses: 0,
                });
                self.perform(acts);
            }
        }
        Ok(())
    }

    fn admit(&mut self, call: Call, placement: Placement) -> Result<()> {
        let p = call.provider;
        let site = self.world.topology.cell(call.cell).site;
        let ch = placement.channel;
        let owner = self.world.owner(ch);
        if !self.scenario.sharing_enabled && owner != p {
            return Err(Error::invariant(format!("provider {} used channel {} of provider {} with sharing off", p.0, ch.0, owner.0)));
        }
        self.occ.occupy(site, ch)?;
        if placement.borrowed {
            self.bs[call.cell.0].record_borrow(ch);
        }
        self.counts.active[p.0] += 1;
        self.metrics.record_decision(p, false, call.arrival_time);
        self.metrics.record_active_calls(p, self.counts.active[p.0], self.now)?;
        self.owner_levels_changed(owner)?;
        self.calls.insert(call.id, call);
        self.schedule(
            self.now + call.holding_time,
            Payload::Departure { call: call.id, provider: p, site, channel: ch },
        );
        self.trace_msg(
            MessageKind::ServiceReply,
            NodeId::Bs(call.cell),
            NodeId::Mobile(call.id),
            format!("sp={} ch={}{}", p.0, ch.0, if placement.borrowed { " borrowed" } else { "" }),
        );
        if self.opts.call_log {
            self.out_calls.push(CallRecord {
                id: call.id,
                provider: p,
                cell: call.cell,
                arrival: call.arrival_time,
                decided_at: self.now,
                blocked: false,
                channel: Some(ch),
                borrowed: placement.borrowed,
            });
        }
        Ok(())
    }

    fn block(&mut self, call: Call) {
        self.counts.blocked[call.provider.0] += 1;
        self.metrics.record_decision(call.provider, true, call.arrival_time);
        if self.opts.call_log {
            self.out_calls.push(CallRecord {
                id: call.id,
                provider: call.provider,
                cell: call.cell,
                arrival: call.arrival_time,
                decided_at: self.now,
                blocked: true,
                channel: None,
                borrowed: false,
            });
        }
    }

    fn on_departure(&mut self, call: u64, p: ProviderId, site: usize, ch: ChannelId) -> Result<()> {
        self.calls.remove(&call).ok_or_else(|| Error::invariant(format!("departure of unknown call {call}")))?;
        self.occ.release(site, ch)?;
        self.counts.active[p.0] -= 1;
        self.counts.completed[p.0] += 1;
        self.metrics.record_active_calls(p, self.counts.active[p.0], self.now)?;
        self.owner_levels_changed(self.world.owner(ch))
    }

    fn owner_levels_changed(&mut self, owner: ProviderId) -> Result<()> {
        let busy = self.occ.busy_owned(owner);
        self.metrics.record_occupancy_change(owner, busy, self.now)?;
        self.metrics.record_users_on_owned(owner, self.occ.users_on_owned(owner), self.now)?;
        if self.opts.occupancy_trace {
            self.out_occ.push(OccupancySample { time: self.now, provider: owner, n_busy: busy });
        }
        Ok(())
    }

    fn on_sense_sweep(&mut self) {
        for node in self.cr.iter_mut() {
            node.sense_sweep(&self.occ, self.sensing_errors.as_mut());
        }
        for bs in self.bs.iter_mut() {
            bs.release_borrowed(&self.occ);
        }
        self.schedule(self.now + self.cfg.sensing_period, Payload::SenseSweep);
    }

    fn perform(&mut self, actions: Vec<Action>) {
        for a in actions {
            match a {
                Action::Send(msg) => {
                    if let Some(ep) = self.episodes.iter_mut().rev().find(|e| e.request == msg.request) {
                        match msg.kind {
                            MessageKind::ChannelRequest => ep.channel_requests += 1,
                            MessageKind::NeighborBroadcast => ep.broadcasts += 1,
                            _ => {}
                        }
                    }
                    self.trace_msg(msg.kind, msg.src, msg.dst, msg.summary());
                    self.schedule(self.now + self.cfg.message_latency, Payload::Deliver(msg));
                }
                Action::Arm { at, timer } => self.schedule(at, Payload::Protocol(timer)),
            }
        }
    }

    fn on_message(&mut self, msg: Message) -> Result<()> {
        let acts = match (msg.kind, msg.dst) {
            (MessageKind::ChannelRequest, NodeId::Cr(n)) => {
                self.cr[n.0].on_channel_request(&msg, self.now, &self.cfg, &self.owners)
            }
            (MessageKind::NeighborBroadcast, NodeId::Cr(n)) => self.cr[n.0].on_neighbor_broadcast(&msg, self.now),
            (MessageKind::NeighborReply, NodeId::Cr(n)) => self.cr[n.0].on_neighbor_reply(&msg, self.now, &self.owners),
            (MessageKind::AvailabilityResponse, NodeId::Bs(cell)) => {
                if let Some(ep) = self.episodes.iter_mut().rev().find(|e| e.request == msg.request) {
                    if let NodeId::Cr(n) = msg.src {
                        ep.responses.push((n.0, self.now));
                    }
                    ep.partial_responses += msg.partial as usize;
                }
                if let Some(responses) = self.bs[cell.0].on_availability_response(&msg) {
                    self.resolve_waiting(cell, &responses)?;
                }
                Vec::new()
            }
            (kind, dst) => return Err(Error::invariant(format!("{kind} delivered to {dst}"))),
        };
        self.perform(acts);
        Ok(())
    }

    /// All corner nodes answered: place every waiting call on an owned or
    /// registered channel, else on the SBAC choice, else block it.
    fn resolve_waiting(&mut self, cell: CellId, responses: &[Message]) -> Result<()> {
        let provider = self.bs[cell.0].provider;
        let params = CandidateParams { prob_mode: self.scenario.sbac.prob_mode, cost: self.scenario.cost_params() };
        let candidates = build_candidates(responses, &self.world, provider, &params);
        let ranked = grant_order(&candidates, &self.scenario.sbac.weights, self.scenario.channel_spacing_hz);
        for w in self.bs[cell.0].take_waiting() {
            self.counts.waiting[w.call.provider.0] -= 1;
            let bs = &self.bs[cell.0];
            let placement = bs.admit_local(&self.occ).or_else(|| {
                bs.choose_grant(&self.occ, &ranked).map(|channel| Placement { channel, borrowed: true })
            });
            match placement {
                Some(pl) => self.admit(w.call, pl)?,
                None => self.block(w.call),
            }
        }
        Ok(())
    }

    fn trace_msg(&mut self, kind: MessageKind, src: NodeId, dst: NodeId, summary: String) {
        if self.opts.trace {
            self.out_trace.push(TraceLine { time: self.now, kind, src, dst, summary });
        }
    }

    fn check_invariants(&self) -> Result<()> {
        let c = &self.counts;
        for p in 0..c.arrivals.len() {
            if c.arrivals[p] != c.blocked[p] + c.completed[p] + c.active[p] + c.waiting[p] {
                return Err(Error::invariant(format!("conservation broken for provider {p}")));
            }
        }
        let active: u64 = c.active.iter().sum();
        if active != self.occ.total_users() || active != self.calls.len() as u64 {
            return Err(Error::invariant(format!(
                "{} active calls but {} users in occupancy",
                active,
                self.occ.total_users()
            )));
        }
        self.occ.check_consistency()
    }
}
