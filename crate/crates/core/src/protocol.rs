//! Message-level behaviour of CR sensor nodes and base stations.
//!
//! Both sides are plain state machines: handlers take an incoming message
//! and return the [`Action`]s to perform (messages to send, timers to arm).
//! The engine owns delivery and timing.
//!
//! An overloaded base station sends a `ChannelRequest` to the CR nodes on
//! its cell corners. Each node broadcasts to its neighbour nodes, merges
//! their replies with its own sensing (a channel is free only if everyone
//! saw it free) and answers with an `AvailabilityResponse`. Once all
//! responses are in, the base station scores the union with SBAC.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sbac::{self, ChannelCandidate, CostParams, SbacWeights};
use crate::traffic::{Call, SimRng};
use crate::world::{CellId, ChannelId, CrNodeId, Occupancy, ProviderId, World};

pub type RequestId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeId {
    Mobile(u64),
    Bs(CellId),
    Cr(CrNodeId),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Mobile(c) => write!(f, "MN{c}"),
            NodeId::Bs(c) => write!(f, "BS{}", c.0),
            NodeId::Cr(n) => write!(f, "CR{}", n.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    ServiceRequest,
    ChannelRequest,
    NeighborBroadcast,
    NeighborReply,
    AvailabilityResponse,
    ServiceReply,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MessageKind::ServiceRequest => "ServiceRequest",
            MessageKind::ChannelRequest => "ChannelRequest",
            MessageKind::NeighborBroadcast => "NeighborBroadcast",
            MessageKind::NeighborReply => "NeighborReply",
            MessageKind::AvailabilityResponse => "AvailabilityResponse",
            MessageKind::ServiceReply => "ServiceReply",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvailabilityEntry {
    pub channel: ChannelId,
    pub available: bool,
    /// Fraction of recent sweeps in which the channel was free.
    pub free_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub kind: MessageKind,
    pub src: NodeId,
    pub dst: NodeId,
    pub request: RequestId,
    /// Provider whose base station started the exchange.
    pub requester: ProviderId,
    pub payload: Vec<AvailabilityEntry>,
    pub partial: bool,
    pub timestamp: f64,
}

impl Message {
    /// Short payload description for traces.
    pub fn summary(&self) -> String {
        let free: Vec<String> =
            self.payload.iter().filter(|e| e.available).map(|e| e.channel.0.to_string()).collect();
        let mut s = format!("req={} sp={}", self.request, self.requester.0);
        if !self.payload.is_empty() || self.kind == MessageKind::AvailabilityResponse {
            s.push_str(&format!(" free=[{}]", free.join(",")));
        }
        if self.partial {
            s.push_str(" partial");
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timer {
    ReplyTimeout { cr: CrNodeId, request: RequestId },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Deliver after the configured message latency.
    Send(Message),
    Arm { at: f64, timer: Timer },
}

/// How SBAC's availability probability is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProbMode {
    /// One ratio for the whole list: free candidates over foreign channels.
    #[default]
    Global,
    /// Per channel: fraction of recent sweeps in which it was free.
    History,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub message_latency: f64,
    pub reply_timeout: f64,
    pub sensing_period: f64,
    pub pending_timeout: f64,
    pub history_window: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            message_latency: 0.005,
            reply_timeout: 0.05,
            sensing_period: 1.0,
            pending_timeout: 0.2,
            history_window: 10,
        }
    }
}

/// Optional detector errors applied on top of ground truth.
#[derive(Debug, Clone)]
pub struct SensingErrors {
    pub false_free: f64,
    pub false_busy: f64,
    pub rng: SimRng,
}

impl SensingErrors {
    fn apply(&mut self, truly_free: bool) -> bool {
        if truly_free {
            !(self.false_busy > 0.0 && self.rng.random::<f64>() < self.false_busy)
        } else {
            self.false_free > 0.0 && self.rng.random::<f64>() < self.false_free
        }
    }
}

#[derive(Debug, Clone, Default)]
struct FreeHistory {
    window: VecDeque<bool>,
    free: usize,
}

impl FreeHistory {
    fn push(&mut self, free: bool, cap: usize) {
        self.window.push_back(free);
        self.free += free as usize;
        while self.window.len() > cap {
            if self.window.pop_front() == Some(true) {
                self.free -= 1;
            }
        }
    }

    fn fraction(&self) -> f64 {
        if self.window.is_empty() {
            1.0
        } else {
            self.free as f64 / self.window.len() as f64
        }
    }
}

#[derive(Debug, Clone)]
struct Gather {
    bs: CellId,
    requester: ProviderId,
    expected: usize,
    replies: Vec<Vec<AvailabilityEntry>>,
}

#[derive(Debug, Clone)]
pub struct CrNodeState {
    pub id: CrNodeId,
    pub covered_sites: Vec<usize>,
    pub neighbors: Vec<CrNodeId>,
    available: Vec<bool>,
    history: Vec<FreeHistory>,
    history_window: usize,
    pending: BTreeMap<RequestId, Gather>,
}

/// Ground-truth availability of `ch` for a node covering `sites`.
pub fn free_at_sites(occ: &Occupancy, sites: &[usize], ch: ChannelId) -> bool {
    sites.iter().all(|&s| occ.is_admissible(s, ch))
}

impl CrNodeState {
    /// Before the first sweep every channel is assumed free.
    pub fn new(node: &crate::world::CrNode, n_channels: usize, history_window: usize) -> Self {
        CrNodeState {
            id: node.id,
            covered_sites: node.covered_sites.clone(),
            neighbors: node.neighbors.clone(),
            available: vec![true; n_channels],
            history: vec![FreeHistory::default(); n_channels],
            history_window: history_window.max(1),
            pending: BTreeMap::new(),
        }
    }

    pub fn available(&self) -> &[bool] {
        &self.available
    }

    pub fn free_fraction(&self, ch: ChannelId) -> f64 {
        self.history[ch.0].fraction()
    }

    pub fn pending_requests(&self) -> usize {
        self.pending.len()
    }

    /// Re-reads every channel: free iff admissible in every covered site.
    pub fn sense_sweep(&mut self, occ: &Occupancy, mut errors: Option<&mut SensingErrors>) {
        for c in 0..self.available.len() {
            let truth = free_at_sites(occ, &self.covered_sites, ChannelId(c));
            let seen = match errors.as_deref_mut() {
                Some(e) => e.apply(truth),
                None => truth,
            };
            self.available[c] = seen;
            self.history[c].push(seen, self.history_window);
        }
    }

    pub fn local_entries(&self) -> Vec<AvailabilityEntry> {
        self.available
            .iter()
            .enumerate()
            .map(|(c, &available)| AvailabilityEntry {
                channel: ChannelId(c),
                available,
                free_fraction: self.history[c].fraction(),
            })
            .collect()
    }

    fn msg(&self, kind: MessageKind, dst: NodeId, request: RequestId, requester: ProviderId, now: f64) -> Message {
        Message {
            kind,
            src: NodeId::Cr(self.id),
            dst,
            request,
            requester,
            payload: Vec::new(),
            partial: false,
            timestamp: now,
        }
    }

    /// Broadcast to neighbours and arm the reply timer; a node without
    /// neighbours answers straight away from its own map.
    pub fn on_channel_request(
        &mut self,
        req: &Message,
        now: f64,
        cfg: &ProtocolConfig,
        owners: &[ProviderId],
    ) -> Vec<Action> {
        let NodeId::Bs(bs) = req.src else {
            return Vec::new();
        };
        let gather = Gather { bs, requester: req.requester, expected: self.neighbors.len(), replies: Vec::new() };
        if gather.expected == 0 {
            return vec![self.respond(req.request, gather, false, now, owners)];
        }
        let mut out: Vec<Action> = self
            .neighbors
            .iter()
            .map(|n| Action::Send(self.msg(MessageKind::NeighborBroadcast, NodeId::Cr(*n), req.request, req.requester, now)))
            .collect();
        out.push(Action::Arm {
            at: now + cfg.reply_timeout,
            timer: Timer::ReplyTimeout { cr: self.id, request: req.request },
        });
        self.pending.insert(req.request, gather);
        out
    }

    pub fn on_neighbor_broadcast(&self, msg: &Message, now: f64) -> Vec<Action> {
        let mut reply = self.msg(MessageKind::NeighborReply, msg.src, msg.request, msg.requester, now);
        reply.payload = self.local_entries();
        vec![Action::Send(reply)]
    }

    pub fn on_neighbor_reply(&mut self, msg: &Message, now: f64, owners: &[ProviderId]) -> Vec<Action> {
        let Some(g) = self.pending.get_mut(&msg.request) else {
            // late reply after timeout
            return Vec::new();
        };
        g.replies.push(msg.payload.clone());
        if g.replies.len() < g.expected {
            return Vec::new();
        }
        let g = self.pending.remove(&msg.request).expect("pending gather");
        vec![self.respond(msg.request, g, false, now, owners)]
    }

    pub fn on_reply_timeout(&mut self, request: RequestId, now: f64, owners: &[ProviderId]) -> Vec<Action> {
        match self.pending.remove(&request) {
            Some(g) => vec![self.respond(request, g, true, now, owners)],
            None => Vec::new(),
        }
    }

    /// Intersection of this node's map with every neighbour reply, limited
    /// to channels the requester does not own.
    fn respond(&self, request: RequestId, g: Gather, partial: bool, now: f64, owners: &[ProviderId]) -> Action {
        let payload = self
            .local_entries()
            .into_iter()
            .filter(|e| owners[e.channel.0] != g.requester)
            .map(|mut e| {
                for reply in &g.replies {
                    if let Some(r) = reply.get(e.channel.0).filter(|r| r.channel == e.channel) {
                        e.available &= r.available;
                        e.free_fraction = e.free_fraction.min(r.free_fraction);
                    }
                }
                e
            })
            .collect();
        let mut m = self.msg(MessageKind::AvailabilityResponse, NodeId::Bs(g.bs), request, g.requester, now);
        m.payload = payload;
        m.partial = partial;
        Action::Send(m)
    }
}

#[derive(Debug, Clone)]
pub struct WaitingCall {
    pub call: Call,
    pub deadline: f64,
}

#[derive(Debug, Clone)]
struct Episode {
    request: RequestId,
    expected: usize,
    responses: Vec<Message>,
}

/// Base station of one cell.
#[derive(Debug, Clone)]
pub struct BsState {
    pub cell: CellId,
    pub provider: ProviderId,
    pub site: usize,
    pub vertex_nodes: Vec<CrNodeId>,
    pub owned: Vec<ChannelId>,
    pending: Option<Episode>,
    waiting: VecDeque<WaitingCall>,
    borrowed: BTreeSet<ChannelId>,
}

/// Where a call was placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub channel: ChannelId,
    pub borrowed: bool,
}

impl BsState {
    pub fn new(world: &World, cell: CellId) -> Self {
        let c = world.topology.cell(cell);
        BsState {
            cell,
            provider: c.provider,
            site: c.site,
            vertex_nodes: world.topology.sites[c.site].vertex_nodes.to_vec(),
            owned: world.providers[c.provider.0].licensed_channels.clone(),
            pending: None,
            waiting: VecDeque::new(),
            borrowed: BTreeSet::new(),
        }
    }

    /// True iff no owned channel is admissible here.
    pub fn is_overloaded(&self, occ: &Occupancy) -> bool {
        !self.owned.iter().any(|&ch| occ.is_admissible(self.site, ch))
    }

    /// First admissible owned channel, else first admissible channel already
    /// in the borrowed registry.
    pub fn admit_local(&self, occ: &Occupancy) -> Option<Placement> {
        if let Some(&ch) = self.owned.iter().find(|&&ch| occ.is_admissible(self.site, ch)) {
            return Some(Placement { channel: ch, borrowed: false });
        }
        self.borrowed
            .iter()
            .find(|&&ch| occ.is_admissible(self.site, ch))
            .map(|&ch| Placement { channel: ch, borrowed: true })
    }

    pub fn has_pending_request(&self) -> bool {
        self.pending.is_some()
    }

    pub fn pending_request(&self) -> Option<RequestId> {
        self.pending.as_ref().map(|e| e.request)
    }

    /// Starts an availability request to the corner CR nodes. Nothing is
    /// sent when the cell is not overloaded or a request is in flight.
    pub fn handle_overload(&mut self, occ: &Occupancy, request: RequestId, now: f64) -> Vec<Action> {
        if self.pending.is_some() || !self.is_overloaded(occ) {
            return Vec::new();
        }
        self.pending = Some(Episode { request, expected: self.vertex_nodes.len(), responses: Vec::new() });
        self.vertex_nodes
            .iter()
            .map(|n| {
                Action::Send(Message {
                    kind: MessageKind::ChannelRequest,
                    src: NodeId::Bs(self.cell),
                    dst: NodeId::Cr(*n),
                    request,
                    requester: self.provider,
                    payload: Vec::new(),
                    partial: false,
                    timestamp: now,
                })
            })
            .collect()
    }

    /// Collects a response; returns all responses once the last one is in.
    pub fn on_availability_response(&mut self, msg: &Message) -> Option<Vec<Message>> {
        let ep = self.pending.as_mut().filter(|e| e.request == msg.request)?;
        ep.responses.push(msg.clone());
        if ep.responses.len() < ep.expected {
            return None;
        }
        self.pending.take().map(|e| e.responses)
    }

    pub fn enqueue(&mut self, call: Call, deadline: f64) {
        self.waiting.push_back(WaitingCall { call, deadline });
    }

    pub fn waiting_len(&self) -> usize {
        self.waiting.len()
    }

    pub fn take_waiting(&mut self) -> Vec<WaitingCall> {
        self.waiting.drain(..).collect()
    }

    pub fn remove_waiting(&mut self, call_id: u64) -> Option<WaitingCall> {
        let pos = self.waiting.iter().position(|w| w.call.id == call_id)?;
        self.waiting.remove(pos)
    }

    /// Tries the best ranked channel, then once more the next best.
    pub fn choose_grant(&self, occ: &Occupancy, ranked: &[ChannelId]) -> Option<ChannelId> {
        ranked.iter().take(2).copied().find(|&ch| occ.is_admissible(self.site, ch))
    }

    pub fn record_borrow(&mut self, ch: ChannelId) {
        self.borrowed.insert(ch);
    }

    pub fn borrowed(&self) -> impl Iterator<Item = ChannelId> + '_ {
        self.borrowed.iter().copied()
    }

    /// Drops borrowed channels that carry no user here once owned channels
    /// can take new calls again. Never preempts a call.
    pub fn release_borrowed(&mut self, occ: &Occupancy) -> Vec<ChannelId> {
        if self.borrowed.is_empty() || self.is_overloaded(occ) {
            return Vec::new();
        }
        let idle: Vec<ChannelId> =
            self.borrowed.iter().copied().filter(|&ch| occ.count(self.site, ch) == 0).collect();
        for ch in &idle {
            self.borrowed.remove(ch);
        }
        idle
    }
}

/// SBAC inputs for one request: everything reported free by at least one
/// corner node.
#[derive(Debug, Clone, Copy)]
pub struct CandidateParams {
    pub prob_mode: ProbMode,
    pub cost: CostParams,
}

pub fn build_candidates(
    responses: &[Message],
    world: &World,
    requester: ProviderId,
    params: &CandidateParams,
) -> Vec<ChannelCandidate> {
    // channel -> fractions reported by responders that saw it free
    let mut free: BTreeMap<ChannelId, Vec<f64>> = BTreeMap::new();
    for r in responses {
        for e in r.payload.iter().filter(|e| e.available) {
            free.entry(e.channel).or_default().push(e.free_fraction);
        }
    }
    let foreign = world.channels.iter().filter(|c| c.owner != requester).count();
    let global = sbac::availability_prob(free.len().min(foreign), foreign).unwrap_or(0.0);
    let cost = sbac::channel_cost(&params.cost);
    free.into_iter()
        .map(|(ch, fr)| ChannelCandidate {
            channel: ch,
            freq_hz: world.channels[ch.0].center_freq_hz,
            available_now: true,
            prob: match params.prob_mode {
                ProbMode::Global => global,
                ProbMode::History => fr.iter().sum::<f64>() / fr.len() as f64,
            },
            cost,
        })
        .collect()
}

/// Candidates in grant order.
pub fn grant_order(candidates: &[ChannelCandidate], w: &SbacWeights, inter_unit_hz: f64) -> Vec<ChannelId> {
    sbac::rank(&sbac::score_candidates(candidates, w, inter_unit_hz))
}
