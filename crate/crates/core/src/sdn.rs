//! Zone controllers and the network controller.
//!
//! A zone controller keeps the last reported position, energy and speed
//! bound of every member, answers destination lookups with a broadcast
//! circle, and periodically recomputes the zone geometry and zone reward.
//! The network controller sums the zone rewards at a slower period.

use std::collections::BTreeMap;

use crate::geometry::{distance, Point, Rect};
use crate::model::{NodeId, SessionId, ZoneId, ZoneState};
use crate::rewards::{network_reward, session_reward, zone_reward};

/// What a controller knows about one member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistryEntry {
    pub position: Point,
    pub seen_at: f64,
    pub residual_energy: f64,
    pub max_velocity: f64,
    pub radio_range: f64,
}

/// Disc expected to contain a destination, and the zones it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastCircle {
    pub center: Point,
    pub radius: f64,
    /// Ascending zone ids; never empty.
    pub spans_zones: Vec<ZoneId>,
    /// The destination was unknown and the lookup fell back to every zone.
    pub network_wide: bool,
}

impl BroadcastCircle {
    pub fn is_inter_zonal(&self) -> bool {
        self.spans_zones.len() > 1
    }

    pub fn contains(&self, p: Point) -> bool {
        self.network_wide || distance(self.center, p) <= self.radius
    }
}

/// Result of a zone-state sync.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncOutcome {
    pub reward_ri: f64,
    /// A zone-state message went out to the members.
    pub broadcast: bool,
}

/// One zone's controller.
#[derive(Debug, Clone)]
pub struct ControllerRegistry {
    pub zone: ZoneState,
    pub t_sync: f64,
    entries: BTreeMap<NodeId, RegistryEntry>,
    node_rewards: BTreeMap<NodeId, f64>,
    session_rewards: BTreeMap<SessionId, f64>,
    last_sync: Option<f64>,
    dirty: bool,
}

impl ControllerRegistry {
    pub fn new(zone: ZoneState, t_sync: f64) -> Self {
        ControllerRegistry {
            zone,
            t_sync,
            entries: BTreeMap::new(),
            node_rewards: BTreeMap::new(),
            session_rewards: BTreeMap::new(),
            last_sync: None,
            dirty: true,
        }
    }

    pub fn id(&self) -> ZoneId {
        self.zone.id
    }

    pub fn boundary(&self) -> Rect {
        self.zone.boundary
    }

    pub fn entry(&self, node: NodeId) -> Option<&RegistryEntry> {
        self.entries.get(&node)
    }

    pub fn entries(&self) -> impl Iterator<Item = (NodeId, &RegistryEntry)> + '_ {
        self.entries.iter().map(|(id, e)| (*id, e))
    }

    pub fn members(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_sync(&self) -> Option<f64> {
        self.last_sync
    }

    /// Inserts or refreshes a member's entry.
    pub fn report(&mut self, node: NodeId, entry: RegistryEntry) {
        let changed = self.entries.insert(node, entry).map(|old| old.position) != Some(entry.position);
        self.dirty |= changed;
    }

    /// Drops a node that left the zone, with its reward contribution.
    pub fn remove(&mut self, node: NodeId) {
        if self.entries.remove(&node).is_some() {
            self.node_rewards.remove(&node);
            self.dirty = true;
        }
    }

    /// Latest self reward of a member.
    pub fn report_node_reward(&mut self, node: NodeId, reward: f64) {
        if self.node_rewards.insert(node, reward) != Some(reward) {
            self.dirty = true;
        }
    }

    /// Records the reward of a live session sourced in this zone, computed
    /// from the zone's cumulative waste `(ew, et)`. Returns the reward.
    pub fn session_reward_report(&mut self, session: SessionId, ew: f64, et: f64) -> f64 {
        self.zone.ew = ew;
        self.zone.et = et;
        let r = session_reward(ew, et);
        if self.session_rewards.insert(session, r) != Some(r) {
            self.dirty = true;
        }
        if !self.zone.live_sessions.contains(&session) {
            self.zone.live_sessions.push(session);
            self.zone.live_sessions.sort();
        }
        r
    }

    /// Forgets an ended session.
    pub fn retire_session(&mut self, session: SessionId) {
        if self.session_rewards.remove(&session).is_some() {
            self.dirty = true;
        }
        self.zone.live_sessions.retain(|s| *s != session);
    }

    pub fn session_rewards(&self) -> impl Iterator<Item = (SessionId, f64)> + '_ {
        self.session_rewards.iter().map(|(s, r)| (*s, *r))
    }

    pub fn sync_due(&self, t_now: f64) -> bool {
        self.last_sync.is_none_or(|t| t_now - t >= self.t_sync)
    }

    /// Recomputes θ, φ, av-rad and ng from the current membership and the
    /// zone reward from the reported node and session rewards. Nothing is
    /// recomputed when no input changed since the last sync.
    pub fn zone_state_sync(&mut self, t_now: f64) -> SyncOutcome {
        self.last_sync = Some(t_now);
        if self.entries.is_empty() {
            self.zone.member_nodes.clear();
            self.zone.theta = self.zone.boundary.diagonal();
            self.zone.reward_ri = 0.0;
            self.dirty = false;
            return SyncOutcome {
                reward_ri: 0.0,
                broadcast: false,
            };
        }
        if self.dirty {
            let members: Vec<&RegistryEntry> = self.entries.values().collect();
            self.zone.member_nodes = self.entries.keys().copied().collect();
            let diameter = membership_diameter(members.iter().map(|e| e.position));
            self.zone.theta = if members.len() >= 2 && diameter > 0.0 {
                diameter
            } else {
                self.zone.boundary.diagonal()
            };
            self.zone.av_rad =
                members.iter().map(|e| e.radio_range).sum::<f64>() / members.len() as f64;
            let links: usize = members
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    members
                        .iter()
                        .enumerate()
                        .filter(|(j, b)| *j != i && distance(a.position, b.position) <= a.radio_range)
                        .count()
                })
                .sum();
            let mean = links as f64 / members.len() as f64;
            self.zone.phi = mean.max(1.0);
            self.zone.ng = mean.max(1.0);
            let nodes: Vec<f64> = self
                .zone
                .member_nodes
                .iter()
                .map(|n| self.node_rewards.get(n).copied().unwrap_or(0.0))
                .collect();
            let sessions: Vec<f64> = self.session_rewards.values().copied().collect();
            self.zone.reward_ri = zone_reward(&nodes, &sessions);
            self.dirty = false;
        }
        SyncOutcome {
            reward_ri: self.zone.reward_ri,
            broadcast: true,
        }
    }
}

/// Largest pairwise distance of a point set; 0 for fewer than two points.
pub fn membership_diameter(points: impl Iterator<Item = Point>) -> f64 {
    let pts: Vec<Point> = points.collect();
    let mut best = 0.0f64;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            best = best.max(distance(*a, *b));
        }
    }
    best
}

/// Broadcast circle for `dst`: centred on its last reported position with
/// radius `max_velocity · (t_now − seen_at)`. An unknown destination yields a
/// network-wide circle spanning every zone.
pub fn destination_lookup(dst: NodeId, t_now: f64, registries: &[ControllerRegistry]) -> BroadcastCircle {
    let found = registries.iter().find_map(|r| r.entry(dst));
    let Some(e) = found else {
        return BroadcastCircle {
            center: Point::ORIGIN,
            radius: f64::INFINITY,
            spans_zones: registries.iter().map(|r| r.id()).collect(),
            network_wide: true,
        };
    };
    let radius = e.max_velocity * (t_now - e.seen_at).max(0.0);
    let home = registries
        .iter()
        .filter(|r| r.boundary().contains(e.position))
        .map(|r| r.id())
        .min();
    let mut spans: Vec<ZoneId> = if radius == 0.0 {
        home.into_iter().collect()
    } else {
        registries
            .iter()
            .filter(|r| {
                let b = r.boundary();
                // A disc that only touches a zone's edge does not span it.
                distance(b.clamp(e.position), e.position) < radius || Some(r.id()) == home
            })
            .map(|r| r.id())
            .collect()
    };
    if spans.is_empty() {
        spans = registries.iter().map(|r| r.id()).collect();
    }
    spans.sort();
    spans.dedup();
    BroadcastCircle {
        center: e.position,
        radius,
        spans_zones: spans,
        network_wide: false,
    }
}

/// Network controller: sums zone rewards every `t_net` seconds and serves
/// the cached sum in between.
#[derive(Debug, Clone)]
pub struct NetworkController {
    pub t_net: f64,
    last_collect: Option<f64>,
    rn: f64,
}

impl NetworkController {
    pub fn new(t_net: f64) -> Self {
        NetworkController {
            t_net,
            last_collect: None,
            rn: 0.0,
        }
    }

    pub fn reward(&self) -> f64 {
        self.rn
    }

    pub fn collect_due(&self, t_now: f64) -> bool {
        self.last_collect.is_none_or(|t| t_now - t >= self.t_net)
    }

    /// `R(N)`: the sum of the most recently synced zone rewards, refreshed
    /// only when a collection is due.
    pub fn network_collect(&mut self, t_now: f64, registries: &[ControllerRegistry]) -> f64 {
        if self.collect_due(t_now) {
            let zones: Vec<f64> = registries.iter().map(|r| r.zone.reward_ri).collect();
            self.rn = network_reward(&zones);
            self.last_collect = Some(t_now);
        }
        self.rn
    }
}

/// Node that reports for a route segment in `zone`: the first node of
/// `route` when it is still in `zone`, otherwise the lowest-id peripheral
/// of the route lying in `zone`. `None` when neither exists.
pub fn zone_representative(
    route: &[NodeId],
    zone: ZoneId,
    zone_of: impl Fn(NodeId) -> ZoneId,
    is_peripheral: impl Fn(NodeId) -> bool,
) -> Option<NodeId> {
    let first = *route.first()?;
    if zone_of(first) == zone {
        return Some(first);
    }
    route
        .iter()
        .copied()
        .filter(|n| is_peripheral(*n) && zone_of(*n) == zone)
        .min()
}
