//! The discrete-event simulator: sessions, hop-by-hop forwarding with turns
//! and acknowledgements, route discovery and breakage handling, controller
//! synchronisation, mobility and energy accounting.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::geometry::{distance, Point, Rect};
use crate::link::{
    available_levels, mark_reliability, power_threshold, should_drop, CommCacheEntry,
    EstimatorContext,
};
use crate::metrics::{
    compute_metrics, Amount, DebitKind, DropCause, MetricsLedger, MetricsReport, PacketFate,
    RewardWasteEntry,
};
use crate::model::{
    tile_arena, zone_of, ModelError, NodeId, NodeState, PowerLevels, SessionId, SessionRecord,
    TransmissionRecord, ZoneId, ZoneState,
};
use crate::policy::{
    baseline_decide, compute_sigma, select_power_level, BaselineKind, LinkView, PolicyKind,
    SigmaInputs,
};
use crate::rewards::{avg_hop_count, broadcast_cost, min_hop_count, NodeRewardState, RewardError};
use crate::sdn::{
    destination_lookup, zone_representative, ControllerRegistry, NetworkController, RegistryEntry,
};
use crate::sim::channel::{Channel, Reception};
use crate::sim::events::EventQueue;
use crate::sim::mobility::{Mobility, MobilityParams};
use crate::sim::routing::{route_discovery, route_select, FloodNode};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("invalid topology: {0}")]
    Topology(String),
}

/// One node of an explicit topology.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub position: Point,
    pub radio_range: f64,
    pub energy: f64,
    pub levels: PowerLevels,
    pub max_velocity: f64,
    pub peripheral: bool,
}

/// Hand-built network used instead of the random placement.
#[derive(Debug, Clone)]
pub struct Topology {
    pub nodes: Vec<NodeSpec>,
    pub channel: Channel,
}

/// How session endpoints are chosen.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Traffic {
    /// Uniformly random pairs of distinct alive nodes.
    #[default]
    Random,
    /// The listed pairs, cycled in order.
    Pairs(Vec<(NodeId, NodeId)>),
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub ledger: MetricsLedger,
    pub report: MetricsReport,
    pub event_counts: BTreeMap<&'static str, u64>,
    pub nodes: Vec<NodeState>,
    pub sessions: Vec<SessionRecord>,
    /// Packets still queued at a source or travelling when the run ended,
    /// ascending.
    pub held: Vec<usize>,
}

/// Runs the scenario with its configured seed.
pub fn run(config: &ScenarioConfig) -> Result<SimOutput, SimError> {
    run_with_seed(config, config.seed)
}

pub fn run_with_seed(config: &ScenarioConfig, seed: u64) -> Result<SimOutput, SimError> {
    Ok(Simulator::new(config, seed)?.run())
}

// Independent random streams keep e.g. mobility identical across policies.
const STREAM_SETUP: u64 = 0;
const STREAM_MOBILITY: u64 = 1;
const STREAM_TRAFFIC: u64 = 2;
const STREAM_CHANNEL: u64 = 3;
const STREAM_POLICY: u64 = 4;
// Session `k` draws its inter-arrival gaps from stream `STREAM_SESSIONS + k`.
const STREAM_SESSIONS: u64 = 16;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone)]
struct Carried {
    packet: usize,
    gen: u32,
    route: Vec<NodeId>,
    /// Index in `route` of the node holding this copy.
    hop: usize,
}

#[derive(Debug, Clone)]
struct Attempt {
    id: u64,
    next: NodeId,
    level: f64,
    sent_at: f64,
    /// Joules spent by sender and receiver on this attempt.
    energy: f64,
    rss: Option<f64>,
}

#[derive(Debug, Clone)]
struct NodeRt {
    queue: VecDeque<Carried>,
    attempt: Option<Attempt>,
    send_scheduled: bool,
    turn: u32,
    prev_level: Option<f64>,
    cache: BTreeMap<NodeId, CommCacheEntry>,
    last_level: BTreeMap<NodeId, f64>,
    reward: NodeRewardState,
    mobility: Mobility,
}

/// An acknowledged hop of the current pass of a packet.
#[derive(Debug, Clone, Copy)]
struct Upstream {
    t: f64,
    energy: f64,
    time: f64,
    level: f64,
}

#[derive(Debug, Clone)]
struct PacketRt {
    session: usize,
    gen: u32,
    furthest: usize,
    done: bool,
    upstream: Vec<Upstream>,
}

#[derive(Debug, Clone)]
struct SessionRt {
    rec: SessionRecord,
    slot: usize,
    zone: ZoneId,
    ends_at: f64,
    generating: bool,
    route_ready: bool,
    epoch: u32,
    backlog: VecDeque<usize>,
    in_flight: Option<usize>,
    gaps: ChaCha8Rng,
}

#[derive(Debug, Clone)]
enum Event {
    SessionStart { slot: usize },
    SessionEnd { session: usize },
    PacketGen { session: usize },
    RouteReply { session: usize, epoch: u32 },
    LinkBreakage { session: usize, packet: usize, initiator: usize, route: Vec<NodeId>, last_level: f64 },
    PacketArrival { node: NodeId, copy: Carried },
    SendAttempt { node: NodeId },
    AckArrival { node: NodeId, attempt: u64 },
    AckTimeout { node: NodeId, attempt: u64 },
    MobilityStep,
    ControllerSync,
    NetworkCollect,
    Beacon,
}

impl Event {
    fn kind(&self) -> &'static str {
        match self {
            Event::SessionStart { .. } => "session-start",
            Event::SessionEnd { .. } => "session-end",
            Event::PacketGen { .. } => "packet-generation",
            Event::RouteReply { .. } => "route-reply",
            Event::LinkBreakage { .. } => "link-breakage",
            Event::PacketArrival { .. } => "packet-arrival",
            Event::SendAttempt { .. } => "send-attempt",
            Event::AckArrival { .. } => "ack-arrival",
            Event::AckTimeout { .. } => "ack-timeout",
            Event::MobilityStep => "mobility-step",
            Event::ControllerSync => "controller-sync",
            Event::NetworkCollect => "network-collect",
            Event::Beacon => "beacon",
        }
    }
}

/// Outcome of a route request plus reply.
struct Found {
    route: Vec<NodeId>,
    zones: Vec<ZoneId>,
    energy: f64,
    time: f64,
}

pub struct Simulator {
    cfg: ScenarioConfig,
    seed: u64,
    arena: Rect,
    nodes: Vec<NodeState>,
    rt: Vec<NodeRt>,
    channel: Channel,
    registries: Vec<ControllerRegistry>,
    network: NetworkController,
    queue: EventQueue<Event>,
    ledger: MetricsLedger,
    sessions: Vec<SessionRt>,
    packets: Vec<PacketRt>,
    traffic: Traffic,
    pair_cursor: usize,
    next_attempt: u64,
    counts: BTreeMap<&'static str, u64>,
    rng_mobility: ChaCha8Rng,
    rng_traffic: ChaCha8Rng,
    rng_channel: ChaCha8Rng,
    rng_policy: ChaCha8Rng,
    airtime: f64,
}

impl Simulator {
    /// Random placement per the configuration.
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut rng = stream(seed, STREAM_SETUP);
        let arena = Rect::new(Point::ORIGIN, Point::new(cfg.arena_width, cfg.arena_height));
        let rects = tile_arena(cfg.arena_width, cfg.arena_height, cfg.zones);
        let spots = peripheral_spots(&rects, cfg.peripherals_per_boundary);
        if spots.len() + 2 > cfg.nodes {
            return Err(SimError::Topology(format!(
                "{} peripherals leave fewer than two mobile nodes out of {}",
                spots.len(),
                cfg.nodes
            )));
        }
        let mobile = cfg.nodes - spots.len();
        let mut specs = Vec::with_capacity(cfg.nodes);
        for i in 0..cfg.nodes {
            let (position, peripheral) = if i < mobile {
                let x = rng.random_range(0.0..=cfg.arena_width);
                let y = rng.random_range(0.0..=cfg.arena_height);
                (Point::new(x, y), false)
            } else {
                (spots[i - mobile], true)
            };
            let radio_range = rng.random_range(cfg.radio_range_min..=cfg.radio_range_max);
            let energy = rng.random_range(cfg.initial_energy_min..=cfg.initial_energy_max);
            let count = rng.random_range(cfg.power_levels_min..=cfg.power_levels_max);
            let p_max = cfg.min_rcv + cfg.alpha_max * radio_range;
            specs.push(NodeSpec {
                position,
                radio_range,
                energy,
                levels: PowerLevels::evenly_spaced(cfg.min_rcv, p_max, count)?,
                max_velocity: if peripheral { 0.0 } else { cfg.max_velocity },
                peripheral,
            });
        }
        let channel = Channel::random(cfg.nodes, cfg.alpha_min, cfg.alpha_max, cfg.noise, &mut rng);
        Self::assemble(cfg, seed, arena, rects, Topology { nodes: specs, channel }, Traffic::Random)
    }

    /// Explicit topology. Range checks of the configuration are skipped;
    /// zones still tile the configured arena.
    pub fn with_topology(
        cfg: &ScenarioConfig,
        seed: u64,
        topology: Topology,
        traffic: Traffic,
    ) -> Result<Self, SimError> {
        let arena = Rect::new(Point::ORIGIN, Point::new(cfg.arena_width, cfg.arena_height));
        let rects = tile_arena(cfg.arena_width, cfg.arena_height, cfg.zones.max(1));
        if topology.nodes.len() < 2 {
            return Err(SimError::Topology("at least two nodes required".into()));
        }
        if let Traffic::Pairs(p) = &traffic {
            let n = topology.nodes.len() as u32;
            if p.is_empty() || p.iter().any(|(a, b)| a == b || a.0 >= n || b.0 >= n) {
                return Err(SimError::Topology("session pairs must name two distinct nodes".into()));
            }
        }
        Self::assemble(cfg, seed, arena, rects, topology, traffic)
    }

    fn assemble(
        cfg: &ScenarioConfig,
        seed: u64,
        arena: Rect,
        rects: Vec<Rect>,
        topology: Topology,
        traffic: Traffic,
    ) -> Result<Self, SimError> {
        let zones: Vec<ZoneState> = rects
            .iter()
            .enumerate()
            .map(|(i, r)| ZoneState::new(ZoneId(i as u32), *r, cfg.radio_range_max))
            .collect();
        let mut rng_mobility = stream(seed, STREAM_MOBILITY);
        let params = mobility_params(cfg);
        let mut nodes = Vec::with_capacity(topology.nodes.len());
        let mut rt = Vec::with_capacity(topology.nodes.len());
        for (i, s) in topology.nodes.iter().enumerate() {
            if !arena.contains(s.position) {
                return Err(ModelError::OutOfArena(s.position).into());
            }
            let node = NodeState {
                id: NodeId(i as u32),
                position: s.position,
                velocity: Point::ORIGIN,
                max_velocity: if s.peripheral { 0.0 } else { s.max_velocity },
                residual_energy: s.energy,
                power_levels: s.levels.clone(),
                radio_range: s.radio_range,
                min_rcv: cfg.min_rcv,
                zone_id: zone_of(s.position, &zones)?,
                is_peripheral: s.peripheral,
                alive: s.energy > 0.0,
            };
            let mobility = Mobility::init(cfg.mobility, &node, arena, params, &mut rng_mobility);
            nodes.push(node);
            rt.push(NodeRt {
                queue: VecDeque::new(),
                attempt: None,
                send_scheduled: false,
                turn: 1,
                prev_level: None,
                cache: BTreeMap::new(),
                last_level: BTreeMap::new(),
                reward: NodeRewardState::default(),
                mobility,
            });
        }
        let registries = zones
            .into_iter()
            .map(|z| ControllerRegistry::new(z, cfg.t_sync))
            .collect();
        let initial: Vec<f64> = nodes.iter().map(|n| n.residual_energy).collect();
        Ok(Simulator {
            ledger: MetricsLedger::new(cfg.policy.name(), seed, initial),
            cfg: cfg.clone(),
            seed,
            arena,
            nodes,
            rt,
            channel: topology.channel,
            registries,
            network: NetworkController::new(cfg.t_net),
            queue: EventQueue::new(),
            sessions: Vec::new(),
            packets: Vec::new(),
            traffic,
            pair_cursor: 0,
            next_attempt: 0,
            counts: BTreeMap::new(),
            rng_mobility,
            rng_traffic: stream(seed, STREAM_TRAFFIC),
            rng_channel: stream(seed, STREAM_CHANNEL),
            rng_policy: stream(seed, STREAM_POLICY),
            airtime: cfg.airtime(cfg.payload_bytes),
        })
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn channel_mut(&mut self) -> &mut Channel {
        &mut self.channel
    }

    /// Simulates `[0, duration)` and returns the ledger and report.
    pub fn run(mut self) -> SimOutput {
        let end = self.cfg.duration;
        self.queue.push(0.0, Event::ControllerSync);
        self.queue.push(0.0, Event::NetworkCollect);
        if self.cfg.mobility_dt > 0.0 {
            self.queue.push(self.cfg.mobility_dt, Event::MobilityStep);
        }
        if matches!(
            self.cfg.policy,
            PolicyKind::Baseline(BaselineKind::BeaconPrrLike | BaselineKind::BeaconRssiLike)
        ) {
            self.queue.push(0.0, Event::Beacon);
        }
        for slot in 0..self.cfg.sessions {
            self.queue.push(0.0, Event::SessionStart { slot });
        }
        while let Some(ev) = self.queue.pop() {
            if ev.time >= end {
                break;
            }
            *self.counts.entry(ev.event.kind()).or_insert(0) += 1;
            self.handle(ev.time, ev.event);
        }
        self.finish(end)
    }

    fn finish(mut self, end: f64) -> SimOutput {
        self.ledger.end_time = end.max(0.0);
        self.ledger.final_energy = self.nodes.iter().map(|n| n.residual_energy).collect();
        let report = compute_metrics(&self.ledger, self.cfg.series_window);
        let mut held: Vec<usize> = self
            .sessions
            .iter()
            .flat_map(|s| s.backlog.iter().copied().chain(s.in_flight))
            .collect();
        held.sort_unstable();
        SimOutput {
            held,
            report,
            ledger: self.ledger,
            event_counts: self.counts,
            nodes: self.nodes,
            sessions: self.sessions.into_iter().map(|s| s.rec).collect(),
        }
    }

    fn handle(&mut self, t: f64, ev: Event) {
        match ev {
            Event::SessionStart { slot } => self.session_start(t, slot),
            Event::SessionEnd { session } => self.session_end(t, session),
            Event::PacketGen { session } => self.packet_gen(t, session),
            Event::RouteReply { session, epoch } => self.route_reply(t, session, epoch),
            Event::LinkBreakage {
                session,
                packet,
                initiator,
                route,
                last_level,
            } => self.rediscover(t, session, packet, initiator, route, last_level),
            Event::PacketArrival { node, copy } => self.packet_arrival(t, node, copy),
            Event::SendAttempt { node } => self.send_attempt(t, node),
            Event::AckArrival { node, attempt } => self.ack_arrival(t, node, attempt),
            Event::AckTimeout { node, attempt } => self.ack_timeout(t, node, attempt),
            Event::MobilityStep => self.mobility_step(t),
            Event::ControllerSync => self.controller_sync(t),
            Event::NetworkCollect => {
                self.network.network_collect(t, &self.registries);
                self.queue.push(t + self.cfg.t_net, Event::NetworkCollect);
            }
            Event::Beacon => self.beacon(t),
        }
    }

    // ----- energy -------------------------------------------------------

    fn tx_cost(&self, level: f64) -> f64 {
        level * self.airtime * self.cfg.energy_per_unit
    }

    /// Debits `joules` from `node`, books it, and returns what was taken.
    fn charge(&mut self, t: f64, node: NodeId, kind: DebitKind, joules: f64) -> f64 {
        let n = &mut self.nodes[node.index()];
        let was_alive = n.alive;
        let taken = n.debit(joules);
        self.ledger.debit(t, node, kind, taken);
        if was_alive && !n.alive {
            self.on_death(node);
        }
        taken
    }

    /// One transmission at `level`: energy plus a message count.
    fn send_message(&mut self, t: f64, node: NodeId, kind: DebitKind, level: f64) -> f64 {
        if !self.nodes[node.index()].alive {
            return 0.0;
        }
        self.ledger.message(node);
        let cost = self.tx_cost(level);
        self.charge(t, node, kind, cost)
    }

    fn on_death(&mut self, node: NodeId) {
        let dropped: Vec<Carried> = self.rt[node.index()].queue.drain(..).collect();
        self.rt[node.index()].attempt = None;
        for c in dropped {
            if self.is_current(&c) {
                self.drop_packet(c.packet, DropCause::NodeDied);
            }
        }
    }

    // ----- sessions and packets ------------------------------------------

    fn pick_pair(&mut self) -> Option<(NodeId, NodeId)> {
        match &self.traffic {
            Traffic::Pairs(pairs) => {
                let p = pairs[self.pair_cursor % pairs.len()];
                self.pair_cursor += 1;
                Some(p)
            }
            Traffic::Random => {
                let alive: Vec<NodeId> = self.nodes.iter().filter(|n| n.alive).map(|n| n.id).collect();
                if alive.len() < 2 {
                    return None;
                }
                let a = self.rng_traffic.random_range(0..alive.len());
                let mut b = self.rng_traffic.random_range(0..alive.len() - 1);
                if b >= a {
                    b += 1;
                }
                Some((alive[a], alive[b]))
            }
        }
    }

    fn inter_arrival(&mut self, session: usize) -> f64 {
        let exp = Exp::new(1.0 / self.cfg.mean_inter_arrival).expect("positive mean");
        let (lo, hi) = (self.cfg.inter_arrival_min, self.cfg.inter_arrival_max);
        let rng = &mut self.sessions[session].gaps;
        for _ in 0..1000 {
            let x: f64 = exp.sample(rng);
            if (lo..=hi).contains(&x) {
                return x;
            }
        }
        rng.random_range(lo..=hi)
    }

    fn session_start(&mut self, t: f64, slot: usize) {
        let Some((src, dst)) = self.pick_pair() else {
            return;
        };
        let id = self.sessions.len();
        let zone = self.nodes[src.index()].zone_id;
        let ends_at = t + self.cfg.session_duration;
        self.sessions.push(SessionRt {
            rec: SessionRecord::new(SessionId(id as u32), src, dst),
            slot,
            zone,
            ends_at,
            generating: true,
            route_ready: false,
            epoch: 0,
            backlog: VecDeque::new(),
            in_flight: None,
            gaps: stream(self.seed, STREAM_SESSIONS + id as u64),
        });
        self.queue.push(ends_at, Event::SessionEnd { session: id });
        self.report_session(id);
        if !self.nodes[src.index()].alive {
            self.fail_session(id, DropCause::NodeDied);
            return;
        }
        let gap = self.inter_arrival(id);
        self.queue.push(t + gap, Event::PacketGen { session: id });
        match self.discover(t, src, dst, &[]) {
            Some(found) => {
                self.ledger.invest(Amount {
                    t,
                    zone,
                    energy: found.energy,
                    time: found.time,
                });
                self.sessions[id].rec.set_route(found.route);
                self.queue.push(t + found.time, Event::RouteReply { session: id, epoch: 0 });
            }
            None => self.fail_session(id, DropCause::Unreachable),
        }
    }

    fn session_end(&mut self, t: f64, id: usize) {
        let s = &mut self.sessions[id];
        s.generating = false;
        s.rec.live = false;
        let backlog: Vec<usize> = s.backlog.drain(..).collect();
        let (zone, slot) = (s.zone, s.slot);
        for p in backlog {
            self.drop_packet(p, DropCause::SessionClosed);
        }
        self.registries[zone.index()].retire_session(SessionId(id as u32));
        self.queue.push(t, Event::SessionStart { slot });
    }

    /// Stops a session early; its packets are dropped with `cause`.
    fn fail_session(&mut self, id: usize, cause: DropCause) {
        let s = &mut self.sessions[id];
        s.generating = false;
        s.route_ready = false;
        s.rec.live = false;
        let mut doomed: Vec<usize> = s.backlog.drain(..).collect();
        doomed.extend(s.in_flight.take());
        for p in doomed {
            self.drop_packet(p, cause);
        }
    }

    fn packet_gen(&mut self, t: f64, id: usize) {
        if !self.sessions[id].generating || t >= self.sessions[id].ends_at {
            return;
        }
        let pid = self.ledger.new_packet(SessionId(id as u32), t);
        debug_assert_eq!(pid, self.packets.len());
        self.packets.push(PacketRt {
            session: id,
            gen: 0,
            furthest: 0,
            done: false,
            upstream: Vec::new(),
        });
        self.sessions[id].backlog.push_back(pid);
        let gap = self.inter_arrival(id);
        self.queue.push(t + gap, Event::PacketGen { session: id });
        self.release(t, id);
    }

    /// Sends the next backlog packet when nothing is in flight.
    fn release(&mut self, t: f64, id: usize) {
        let s = &mut self.sessions[id];
        if !s.route_ready || s.in_flight.is_some() {
            return;
        }
        let Some(p) = s.backlog.pop_front() else {
            return;
        };
        s.in_flight = Some(p);
        let (src, route) = (s.rec.src, s.rec.route.clone());
        self.ledger.packets[p].left_source_at = Some(t);
        let copy = Carried {
            packet: p,
            gen: self.packets[p].gen,
            route,
            hop: 0,
        };
        self.enqueue(t, src, copy);
    }

    fn route_reply(&mut self, t: f64, id: usize, epoch: u32) {
        let s = &mut self.sessions[id];
        if s.epoch != epoch || !s.rec.live && s.in_flight.is_none() {
            return;
        }
        s.route_ready = true;
        match s.in_flight {
            // A packet waiting for a repaired route restarts at the source.
            Some(p) => {
                let (src, route) = (s.rec.src, s.rec.route.clone());
                let copy = Carried {
                    packet: p,
                    gen: self.packets[p].gen,
                    route,
                    hop: 0,
                };
                self.enqueue(t, src, copy);
            }
            None => self.release(t, id),
        }
    }

    fn drop_packet(&mut self, p: usize, cause: DropCause) {
        let pk = &mut self.packets[p];
        if pk.done {
            return;
        }
        pk.done = true;
        self.ledger.packets[p].fate = PacketFate::Dropped(cause);
        let s = &mut self.sessions[pk.session];
        if s.in_flight == Some(p) {
            s.in_flight = None;
        }
    }

    fn is_current(&self, c: &Carried) -> bool {
        let p = &self.packets[c.packet];
        !p.done && p.gen == c.gen
    }

    // ----- forwarding -----------------------------------------------------

    fn enqueue(&mut self, t: f64, node: NodeId, copy: Carried) {
        if !self.nodes[node.index()].alive {
            if self.is_current(&copy) {
                self.drop_packet(copy.packet, DropCause::NodeDied);
            }
            return;
        }
        let rt = &mut self.rt[node.index()];
        rt.queue.push_back(copy);
        if rt.attempt.is_none() && !rt.send_scheduled {
            rt.send_scheduled = true;
            self.queue.push(t, Event::SendAttempt { node });
        }
    }

    fn packet_arrival(&mut self, t: f64, node: NodeId, copy: Carried) {
        if !self.is_current(&copy) {
            return;
        }
        let pk = &mut self.packets[copy.packet];
        if copy.hop <= pk.furthest {
            return;
        }
        pk.furthest = copy.hop;
        if copy.hop + 1 == copy.route.len() {
            pk.done = true;
            let session = pk.session;
            let rec = &mut self.ledger.packets[copy.packet];
            rec.fate = PacketFate::Delivered;
            rec.delivered_at = Some(t);
            self.sessions[session].in_flight = None;
            self.release(t, session);
        } else {
            self.enqueue(t, node, copy);
        }
    }

    fn zone_ri(&self, node: NodeId) -> f64 {
        self.registries[self.nodes[node.index()].zone_id.index()].zone.reward_ri
    }

    /// Power level for the head packet, or `None` when the link is judged
    /// unusable without trying.
    fn choose_level(&mut self, t: f64, u: NodeId, next: NodeId, retry: bool) -> Option<f64> {
        let node = &self.nodes[u.index()];
        let levels = node.power_levels.as_slice();
        let max = node.power_levels.max();
        let entry = self.rt[u.index()].cache.get(&next);
        match self.cfg.policy {
            PolicyKind::RlTrc => {
                let Some(entry) = entry.filter(|e| e.latest().is_some()) else {
                    return Some(max);
                };
                if should_drop(entry.displacement_since_ack(t), node.radio_range) {
                    return None;
                }
                let dist = entry.predicted_distance(t, self.cfg.signal_speed)?;
                let atn = entry.attenuation_or(self.cfg.prior_attenuation);
                let avail = available_levels(levels, power_threshold(atn, dist, node.min_rcv));
                let sigma = compute_sigma(SigmaInputs {
                    ri: self.zone_ri(u),
                    rn: self.network.reward(),
                });
                let reliable = entry.reliable;
                select_power_level(avail, sigma, reliable, &mut self.rng_policy).ok()
            }
            PolicyKind::Baseline(kind) => {
                let view = LinkView {
                    sig_atn: entry.and_then(|e| e.sig_atn),
                    last_distance: entry
                        .and_then(|e| e.latest())
                        .map(|p| p.travel_distance(self.cfg.signal_speed)),
                    min_rcv: node.min_rcv,
                    last_rss: entry.and_then(|e| e.latest()).map(|p| p.rss),
                    current_level: self.rt[u.index()].last_level.get(&next).copied(),
                    prr: entry.map(|e| e.prr()).unwrap_or(0.0),
                    retry,
                };
                Some(baseline_decide(kind, &view, levels, &self.cfg.thresholds()))
            }
        }
    }

    fn send_attempt(&mut self, t: f64, u: NodeId) {
        let ui = u.index();
        self.rt[ui].send_scheduled = false;
        if self.rt[ui].attempt.is_some() {
            return;
        }
        // Skip copies made stale by delivery or a route repair.
        while let Some(head) = self.rt[ui].queue.front() {
            if self.is_current(head) {
                break;
            }
            self.rt[ui].queue.pop_front();
            self.rt[ui].turn = 1;
            self.rt[ui].prev_level = None;
        }
        let Some(head) = self.rt[ui].queue.front().cloned() else {
            return;
        };
        if !self.nodes[ui].alive {
            self.on_death(u);
            return;
        }
        let next = head.route[head.hop + 1];
        let turn = self.rt[ui].turn;
        let Some(level) = self.choose_level(t, u, next, turn > 1) else {
            self.link_failure(t, u, head, None);
            return;
        };
        self.rt[ui].last_level.insert(next, level);
        self.rt[ui]
            .cache
            .entry(next)
            .or_insert_with(|| CommCacheEntry::new(next, t))
            .record_transmission();

        self.ledger.message(u);
        let cost = self.tx_cost(level);
        let taken = self.charge(t, u, DebitKind::Data, cost);
        let id = self.next_attempt;
        self.next_attempt += 1;
        let mut attempt = Attempt {
            id,
            next,
            level,
            sent_at: t,
            energy: taken,
            rss: None,
        };
        if taken < cost {
            // Ran dry mid-transmission; on_death already dropped the queue.
            let zone = self.sessions[self.packets[head.packet].session].zone;
            let a = Amount {
                t,
                zone,
                energy: taken,
                time: 0.0,
            };
            self.ledger.invest(a);
            self.ledger.waste(a);
            return;
        }

        let (pu, pv) = (self.nodes[ui].position, self.nodes[next.index()].position);
        let d = distance(pu, pv);
        let rx = self.channel.propagate(
            u,
            next,
            level,
            d,
            self.nodes[ui].radio_range,
            self.nodes[next.index()].min_rcv,
            &mut self.rng_channel,
        );
        if let (Reception::Received { rss }, true) = (rx, self.nodes[next.index()].alive) {
            let v = &self.nodes[next.index()];
            let ack_level = v
                .power_levels
                .as_slice()
                .iter()
                .copied()
                .find(|&p| p > level - rss + v.min_rcv)
                .unwrap_or(v.power_levels.max());
            let ack_cost = self.cfg.ack_cost_fraction * self.tx_cost(v.power_levels.min());
            self.ledger.message(next);
            let ack_taken = self.charge(t, next, DebitKind::Ack, ack_cost);
            attempt.energy += ack_taken;
            if self.nodes[next.index()].alive {
                let back = self.channel.propagate(
                    next,
                    u,
                    ack_level,
                    d,
                    self.nodes[next.index()].radio_range,
                    self.nodes[ui].min_rcv,
                    &mut self.rng_channel,
                );
                if back.rss().is_some() {
                    attempt.rss = Some(rss);
                    self.queue.push(t + d / self.cfg.signal_speed, Event::AckArrival { node: u, attempt: id });
                }
                let copy = Carried {
                    hop: head.hop + 1,
                    ..head
                };
                self.queue.push(
                    t + d / (2.0 * self.cfg.signal_speed),
                    Event::PacketArrival { node: next, copy },
                );
            }
        }
        self.rt[ui].attempt = Some(attempt);
        self.queue.push(t + self.cfg.tau_a, Event::AckTimeout { node: u, attempt: id });
    }

    fn ack_arrival(&mut self, t: f64, u: NodeId, id: u64) {
        let ui = u.index();
        let Some(a) = self.rt[ui].attempt.take_if(|a| a.id == id) else {
            return;
        };
        let head = self.rt[ui].queue.pop_front();
        let turn = self.rt[ui].turn;
        self.rt[ui].turn = 1;
        self.rt[ui].prev_level = None;
        let rtt = t - a.sent_at;
        let ctx = EstimatorContext {
            signal_speed: self.cfg.signal_speed,
            radio_range: self.nodes[ui].radio_range,
        };
        let p_max = self.nodes[ui].power_levels.max();
        let rt = &mut self.rt[ui];
        let entry = rt.cache.entry(a.next).or_insert_with(|| CommCacheEntry::new(a.next, t));
        // A malformed ack only loses its estimator update.
        let _ = entry.record_ack(a.sent_at, t, a.level, a.rss.unwrap_or(0.0), ctx);
        let (prr, rss_tpl, trend) = (entry.prr(), entry.rss_over_tpl(), entry.recent_trend);
        let _ = rt.reward.apply_action(p_max, a.level);
        let _ = rt.reward.on_ack(a.next, prr, rss_tpl, trend);

        if let Some(head) = head {
            let session = self.packets[head.packet].session;
            let zone = self.sessions[session].zone;
            self.ledger.invest(Amount {
                t: a.sent_at,
                zone,
                energy: a.energy,
                time: rtt,
            });
            if self.is_current(&head) {
                self.packets[head.packet].upstream.push(Upstream {
                    t: a.sent_at,
                    energy: a.energy,
                    time: rtt,
                    level: a.level,
                });
            }
            self.sessions[session].rec.transmissions.push(TransmissionRecord {
                hop_start: u,
                hop_end: a.next,
                turn,
                power_used: a.level,
                sent_at: a.sent_at,
                acked_at: Some(t),
            });
        }
        if !self.rt[ui].queue.is_empty() && !self.rt[ui].send_scheduled {
            self.rt[ui].send_scheduled = true;
            self.queue.push(t, Event::SendAttempt { node: u });
        }
    }

    fn broad_cost(&self, zone: ZoneId) -> f64 {
        let z = &self.registries[zone.index()].zone;
        broadcast_cost(z.ng, avg_hop_count(z.theta, z.phi, z.av_rad), self.cfg.broadcast_cost_cap)
    }

    fn ack_timeout(&mut self, t: f64, u: NodeId, id: u64) {
        let ui = u.index();
        let Some(a) = self.rt[ui].attempt.take_if(|a| a.id == id) else {
            return;
        };
        let Some(head) = self.rt[ui].queue.front().cloned() else {
            return;
        };
        let p_max = self.nodes[ui].power_levels.max();
        let _ = self.rt[ui].reward.apply_action(p_max, a.level);
        let session = self.packets[head.packet].session;
        let zone = self.sessions[session].zone;
        self.ledger.invest(Amount {
            t: a.sent_at,
            zone,
            energy: a.energy,
            time: self.cfg.tau_a,
        });
        self.rt[ui].turn += 1;
        let turn = self.rt[ui].turn;
        self.sessions[session].rec.transmissions.push(TransmissionRecord {
            hop_start: u,
            hop_end: a.next,
            turn,
            power_used: a.level,
            sent_at: a.sent_at,
            acked_at: None,
        });
        if !self.is_current(&head) {
            // The packet was delivered or rerouted meanwhile; stop retrying.
            self.rt[ui].queue.pop_front();
            self.rt[ui].turn = 1;
            self.rt[ui].prev_level = None;
            self.ledger.waste(Amount {
                t: a.sent_at,
                zone,
                energy: a.energy,
                time: self.cfg.tau_a,
            });
            self.schedule_send(t, u);
            return;
        }
        if turn <= self.cfg.mx_atmpt {
            self.ledger.waste(Amount {
                t: a.sent_at,
                zone,
                energy: a.energy,
                time: self.cfg.tau_a,
            });
            self.book_reward_waste(RewardWasteEntry {
                t,
                zone,
                turn,
                prev_action: a.level,
                tau_a: self.cfg.tau_a,
                zone_set_costs: Vec::new(),
                invested_energy: 0.0,
                invested_time: 0.0,
                zone_broadcast_times: Vec::new(),
                mx_atmpt: self.cfg.mx_atmpt,
            });
            let bc = self.broad_cost(self.nodes[ui].zone_id);
            self.rt[ui].reward.on_no_ack(a.next, turn, self.cfg.mx_atmpt, bc);
            self.rt[ui].prev_level = Some(a.level);
            self.schedule_send(t, u);
        } else {
            self.link_failure(t, u, head, Some(a));
        }
    }

    fn schedule_send(&mut self, t: f64, u: NodeId) {
        let rt = &mut self.rt[u.index()];
        if !rt.queue.is_empty() && rt.attempt.is_none() && !rt.send_scheduled {
            rt.send_scheduled = true;
            self.queue.push(t, Event::SendAttempt { node: u });
        }
    }

    fn book_reward_waste(&mut self, entry: RewardWasteEntry) {
        let zone = entry.zone;
        if self.ledger.book_reward_waste(entry).is_ok() {
            let live: Vec<usize> = (0..self.sessions.len())
                .filter(|&s| self.sessions[s].zone == zone && self.sessions[s].rec.live)
                .collect();
            for s in live {
                self.report_session(s);
            }
        }
    }

    fn report_session(&mut self, s: usize) {
        let zone = self.sessions[s].zone;
        let (ew, et) = self.ledger.zone_waste.zone(zone);
        let r = self.registries[zone.index()].session_reward_report(SessionId(s as u32), ew, et);
        self.sessions[s].rec.reward = r;
    }

    /// Attempts on the head packet's hop are exhausted, or the hop was
    /// judged unusable. Sends a breakage notice back toward the source.
    fn link_failure(&mut self, t: f64, u: NodeId, head: Carried, last: Option<Attempt>) {
        let ui = u.index();
        self.rt[ui].queue.pop_front();
        self.rt[ui].attempt = None;
        self.rt[ui].turn = 1;
        let prev_level = last.as_ref().map(|a| a.level).or(self.rt[ui].prev_level).unwrap_or(0.0);
        self.rt[ui].prev_level = None;
        let next = head.route[head.hop + 1];
        let bc = self.broad_cost(self.nodes[ui].zone_id);
        self.rt[ui].reward.on_no_ack(next, self.cfg.mx_atmpt + 1, self.cfg.mx_atmpt, bc);
        if let Some(entry) = self.rt[ui].cache.get_mut(&next) {
            mark_reliability(entry, t);
        }
        self.schedule_send(t, u);

        let p = head.packet;
        let session = self.packets[p].session;
        let zone = self.sessions[session].zone;
        if let Some(a) = &last {
            self.ledger.waste(Amount {
                t: a.sent_at,
                zone,
                energy: a.energy,
                time: self.cfg.tau_a,
            });
        }
        // Downstream copies of this pass are now stale.
        self.packets[p].gen += 1;
        self.packets[p].furthest = 0;
        self.sessions[session].route_ready = false;
        self.sessions[session].epoch += 1;

        let route = head.route;
        let hop_zone = self.nodes[ui].zone_id;
        let initiator = {
            let prefix = &route[..=head.hop];
            let rep = zone_representative(
                prefix,
                hop_zone,
                |n| self.nodes[n.index()].zone_id,
                |n| self.nodes[n.index()].is_peripheral,
            )
            .unwrap_or(route[0]);
            prefix.iter().position(|n| *n == rep).unwrap_or(0)
        };
        // Notice travels from the failing node back to the initiator.
        let mut energy = 0.0;
        for k in (initiator + 1..=head.hop).rev() {
            let sender = route[k];
            let lvl = self.nodes[sender.index()].power_levels.max();
            energy += self.send_message(t, sender, DebitKind::LinkBreakage, lvl);
        }
        let time = (head.hop - initiator) as f64 * self.cfg.broadcast_hop_time;
        if energy > 0.0 || time > 0.0 {
            let a = Amount {
                t,
                zone,
                energy,
                time,
            };
            self.ledger.invest(a);
            self.ledger.waste(a);
        }
        self.queue.push(
            t + time,
            Event::LinkBreakage {
                session,
                packet: p,
                initiator,
                route,
                last_level: prev_level,
            },
        );
    }

    fn rediscover(
        &mut self,
        t: f64,
        session: usize,
        p: usize,
        mut initiator: usize,
        route: Vec<NodeId>,
        last_level: f64,
    ) {
        let zone = self.sessions[session].zone;
        // Everything invested upstream on this pass is written off.
        let upstream = std::mem::take(&mut self.packets[p].upstream);
        for u in &upstream {
            self.ledger.waste(Amount {
                t: u.t,
                zone,
                energy: u.energy,
                time: u.time,
            });
        }
        if self.packets[p].done {
            return;
        }
        let src = route[0];
        if !self.nodes[src.index()].alive {
            self.fail_session(session, DropCause::NodeDied);
            return;
        }
        if !self.nodes[route[initiator].index()].alive {
            initiator = 0;
        }
        let dst = self.sessions[session].rec.dst;
        let found = self.discover(t, route[initiator], dst, &route[..initiator]);
        let (zones, energy, time) = match &found {
            Some(f) => (f.zones.clone(), f.energy, f.time),
            None => (self.registries.iter().map(|r| r.id()).collect(), 0.0, 0.0),
        };
        let zone_set_costs: Vec<f64> = zones.iter().map(|z| self.broad_cost(*z)).collect();
        let zone_broadcast_times: Vec<f64> = zones
            .iter()
            .map(|z| {
                let zs = &self.registries[z.index()].zone;
                min_hop_count(zs.theta, zs.phi, zs.av_rad) * self.cfg.broadcast_hop_time
            })
            .collect();
        self.book_reward_waste(RewardWasteEntry {
            t,
            zone,
            turn: self.cfg.mx_atmpt + 1,
            prev_action: last_level,
            tau_a: self.cfg.tau_a,
            zone_set_costs,
            invested_energy: upstream.iter().map(|u| u.level).sum(),
            invested_time: upstream.iter().map(|u| u.time).sum(),
            zone_broadcast_times,
            mx_atmpt: self.cfg.mx_atmpt,
        });
        match found {
            Some(f) => {
                let a = Amount {
                    t,
                    zone,
                    energy,
                    time,
                };
                self.ledger.invest(a);
                self.ledger.waste(a);
                let s = &mut self.sessions[session];
                s.rec.set_route(f.route);
                let epoch = s.epoch;
                self.queue.push(t + time, Event::RouteReply { session, epoch });
            }
            None => self.fail_session(session, DropCause::Unreachable),
        }
    }

    fn flood_view(&self) -> Vec<FloodNode> {
        self.nodes
            .iter()
            .map(|n| FloodNode {
                id: n.id,
                position: n.position,
                radio_range: n.radio_range,
                zone: n.zone_id,
                is_peripheral: n.is_peripheral,
                alive: n.alive,
            })
            .collect()
    }

    /// Route request from `from` to `dst` bounded by the destination's
    /// broadcast circle, falling back to a network-wide flood; `prefix` is
    /// prepended to the result. Charges every flood and the reply.
    fn discover(&mut self, t: f64, from: NodeId, dst: NodeId, prefix: &[NodeId]) -> Option<Found> {
        let circle = destination_lookup(dst, t, &self.registries);
        let mut zones = circle.spans_zones.clone();
        zones.push(self.nodes[from.index()].zone_id);
        zones.sort();
        zones.dedup();
        let all: Vec<ZoneId> = self.registries.iter().map(|r| r.id()).collect();
        let mut energy = 0.0;
        let mut time = 0.0;
        let mut tries = vec![zones];
        if tries[0] != all {
            tries.push(all);
        }
        for allowed in tries {
            let view = self.flood_view();
            let d = route_discovery(&view, from, dst, &allowed, self.cfg.max_hops);
            for f in &d.flooders {
                let lvl = self.nodes[f.index()].power_levels.max();
                energy += self.send_message(t, *f, DebitKind::RouteRequest, lvl);
            }
            time += d.depth as f64 * self.cfg.broadcast_hop_time;
            let Some(suffix) = route_select(&d.candidates) else {
                continue;
            };
            let mut route: Vec<NodeId> = prefix.to_vec();
            route.extend(&suffix);
            remove_loops(&mut route);
            if route.len() - 1 > self.cfg.max_hops {
                continue;
            }
            for k in (1..suffix.len()).rev() {
                let sender = suffix[k];
                let lvl = self.nodes[sender.index()].power_levels.max();
                energy += self.send_message(t, sender, DebitKind::RouteReply, lvl);
            }
            time += (suffix.len() - 1) as f64 * self.cfg.broadcast_hop_time;
            return Some(Found {
                route,
                zones: allowed,
                energy,
                time,
            });
        }
        if energy > 0.0 {
            // Floods that found nothing are still spent.
            let zone = self.nodes[from.index()].zone_id;
            let a = Amount {
                t,
                zone,
                energy,
                time,
            };
            self.ledger.invest(a);
            self.ledger.waste(a);
        }
        None
    }

    // ----- periodic -------------------------------------------------------

    fn mobility_step(&mut self, t: f64) {
        let params = mobility_params(&self.cfg);
        for i in 0..self.nodes.len() {
            if !self.nodes[i].alive {
                self.nodes[i].velocity = Point::ORIGIN;
                continue;
            }
            let rt = &mut self.rt[i];
            rt.mobility
                .step(&mut self.nodes[i], self.cfg.mobility_dt, self.arena, params, &mut self.rng_mobility);
        }
        self.queue.push(t + self.cfg.mobility_dt, Event::MobilityStep);
    }

    fn controller_sync(&mut self, t: f64) {
        for i in 0..self.nodes.len() {
            let n = &self.nodes[i];
            let id = n.id;
            if !n.alive {
                let z = n.zone_id.index();
                self.registries[z].remove(id);
                continue;
            }
            let Ok(zone) = zone_of(n.position, &self.registries.iter().map(|r| r.zone.clone()).collect::<Vec<_>>()) else {
                continue;
            };
            if zone != n.zone_id {
                self.registries[n.zone_id.index()].remove(id);
                self.nodes[i].zone_id = zone;
            }
            let n = &self.nodes[i];
            let entry = RegistryEntry {
                position: n.position,
                seen_at: t,
                residual_energy: n.residual_energy,
                max_velocity: n.max_velocity,
                radio_range: n.radio_range,
            };
            let r = &mut self.registries[zone.index()];
            r.report(id, entry);
            r.report_node_reward(id, self.rt[i].reward.self_reward);
        }
        for z in 0..self.registries.len() {
            let out = self.registries[z].zone_state_sync(t);
            if out.broadcast {
                let members: Vec<NodeId> = self.registries[z].members().collect();
                for m in members {
                    let cost = self.tx_cost(self.nodes[m.index()].power_levels.min());
                    if self.nodes[m.index()].alive {
                        self.charge(t, m, DebitKind::ZoneSync, cost);
                    }
                }
            }
        }
        self.queue.push(t + self.cfg.t_sync, Event::ControllerSync);
    }

    fn beacon(&mut self, t: f64) {
        for i in 0..self.nodes.len() {
            let lvl = self.nodes[i].power_levels.max();
            self.send_message(t, NodeId(i as u32), DebitKind::Beacon, lvl);
        }
        self.queue.push(t + self.cfg.beacon_interval, Event::Beacon);
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn mobility_params(cfg: &ScenarioConfig) -> MobilityParams {
    MobilityParams {
        pause_max: cfg.pause_max,
        gaussian_sigma: cfg.gaussian_sigma,
    }
}

/// Cuts any cycle so each node appears once.
fn remove_loops(route: &mut Vec<NodeId>) {
    let mut out: Vec<NodeId> = Vec::with_capacity(route.len());
    for &n in route.iter() {
        if let Some(k) = out.iter().position(|m| *m == n) {
            out.truncate(k + 1);
        } else {
            out.push(n);
        }
    }
    *route = out;
}

/// Evenly spaced spots along every edge shared by two zones.
pub fn peripheral_spots(rects: &[Rect], per_boundary: usize) -> Vec<Point> {
    let mut spots = Vec::new();
    if per_boundary == 0 {
        return spots;
    }
    let eps = 1e-9;
    for (i, a) in rects.iter().enumerate() {
        for b in &rects[i + 1..] {
            let segment = if (a.max.x - b.min.x).abs() < eps || (b.max.x - a.min.x).abs() < eps {
                let x = if (a.max.x - b.min.x).abs() < eps { a.max.x } else { a.min.x };
                let (lo, hi) = (a.min.y.max(b.min.y), a.max.y.min(b.max.y));
                (hi - lo > eps).then(|| (Point::new(x, lo), Point::new(x, hi)))
            } else if (a.max.y - b.min.y).abs() < eps || (b.max.y - a.min.y).abs() < eps {
                let y = if (a.max.y - b.min.y).abs() < eps { a.max.y } else { a.min.y };
                let (lo, hi) = (a.min.x.max(b.min.x), a.max.x.min(b.max.x));
                (hi - lo > eps).then(|| (Point::new(lo, y), Point::new(hi, y)))
            } else {
                None
            };
            if let Some((p, q)) = segment {
                for k in 0..per_boundary {
                    let f = (k as f64 + 0.5) / per_boundary as f64;
                    spots.push(p + (q - p) * f);
                }
            }
        }
    }
    spots
}
