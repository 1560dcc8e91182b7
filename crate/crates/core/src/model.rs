//! Domain types shared by every other module: nodes, zones, sessions and
//! per-hop transmission records, plus zone membership lookup.

use std::fmt;

use thiserror::Error;

use crate::geometry::{distance, Point, Rect};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Node identifier; also the node's index in the simulator's node table.
    NodeId
);
id_type!(
    /// Zone identifier; zones are numbered in tiling order.
    ZoneId
);
id_type!(SessionId);

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("point {0} lies outside the arena")]
    OutOfArena(Point),
    #[error("power levels must be non-empty, positive and strictly ascending")]
    InvalidPowerLevels,
    #[error("node {node}: {what}")]
    InvariantViolated { node: NodeId, what: &'static str },
}

/// Discrete transmit powers of a node, strictly ascending, all positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLevels(Vec<f64>);

impl PowerLevels {
    pub fn new(levels: Vec<f64>) -> Result<Self, ModelError> {
        let ok = !levels.is_empty()
            && levels.iter().all(|p| p.is_finite() && *p > 0.0)
            && levels.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(PowerLevels(levels))
        } else {
            Err(ModelError::InvalidPowerLevels)
        }
    }

    /// `count` levels spaced evenly above `floor`, the top one equal to `max`.
    pub fn evenly_spaced(floor: f64, max: f64, count: usize) -> Result<Self, ModelError> {
        if count == 0 || max <= floor {
            return Err(ModelError::InvalidPowerLevels);
        }
        let step = (max - floor) / count as f64;
        Self::new((1..=count).map(|m| floor + step * m as f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0[0]
    }

    pub fn max(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn contains(&self, p: f64) -> bool {
        self.0.contains(&p)
    }

    /// Index of `p` among the levels, if it is one of them.
    pub fn position(&self, p: f64) -> Option<usize> {
        self.0.iter().position(|&q| q == p)
    }
}

/// State of one sensor node.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub position: Point,
    pub velocity: Point,
    pub max_velocity: f64,
    /// Joules.
    pub residual_energy: f64,
    pub power_levels: PowerLevels,
    /// Radio range R_i in meters.
    pub radio_range: f64,
    /// Minimum receive power.
    pub min_rcv: f64,
    pub zone_id: ZoneId,
    pub is_peripheral: bool,
    pub alive: bool,
}

impl NodeState {
    /// Debits up to `joules`, draining to exactly zero when the node cannot
    /// afford it. Returns the amount actually debited.
    pub fn debit(&mut self, joules: f64) -> f64 {
        let taken = joules.min(self.residual_energy).max(0.0);
        self.residual_energy -= taken;
        if self.residual_energy <= 0.0 {
            self.residual_energy = 0.0;
            self.alive = false;
        }
        taken
    }

    /// Checks the structural invariants of the node.
    pub fn audit(&self) -> Result<(), ModelError> {
        let fail = |what| Err(ModelError::InvariantViolated { node: self.id, what });
        if self.residual_energy < 0.0 {
            return fail("negative residual energy");
        }
        if self.alive != (self.residual_energy > 0.0) {
            return fail("alive flag disagrees with residual energy");
        }
        if self.is_peripheral && self.max_velocity != 0.0 {
            return fail("peripheral node is mobile");
        }
        if self.velocity.norm() > self.max_velocity * (1.0 + 1e-9) + 1e-12 {
            return fail("speed exceeds max velocity");
        }
        Ok(())
    }
}

/// True iff `receiver` lies within the sender's radio range (boundary inclusive).
pub fn in_radio_range(sender: &NodeState, receiver: Point) -> bool {
    distance(sender.position, receiver) <= sender.radio_range
}

/// Controller-side view of a zone.
#[derive(Debug, Clone)]
pub struct ZoneState {
    pub id: ZoneId,
    pub boundary: Rect,
    /// Maximum distance between two members, θ(Z).
    pub theta: f64,
    /// Average downlink-neighbor count, φ(Z).
    pub phi: f64,
    /// Average radio range of members.
    pub av_rad: f64,
    /// Average downlink-neighbor count used by the broadcast cost.
    pub ng: f64,
    pub member_nodes: Vec<NodeId>,
    pub live_sessions: Vec<SessionId>,
    /// Cumulative wasted energy.
    pub ew: f64,
    /// Cumulative wasted time (seconds).
    pub et: f64,
    pub reward_ri: f64,
}

impl ZoneState {
    pub fn new(id: ZoneId, boundary: Rect, default_radio_range: f64) -> Self {
        ZoneState {
            id,
            boundary,
            theta: boundary.diagonal(),
            phi: 1.0,
            av_rad: default_radio_range,
            ng: 1.0,
            member_nodes: Vec::new(),
            live_sessions: Vec::new(),
            ew: 0.0,
            et: 0.0,
            reward_ri: 0.0,
        }
    }
}

/// One hop-level transmission of the current data packet.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionRecord {
    pub hop_start: NodeId,
    pub hop_end: NodeId,
    /// 1 on the first attempt, up to `mx_atmpt + 1` when attempts are exhausted.
    pub turn: u32,
    pub power_used: f64,
    pub sent_at: f64,
    pub acked_at: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SessionRecord {
    pub id: SessionId,
    pub src: NodeId,
    pub dst: NodeId,
    pub route: Vec<NodeId>,
    pub hop_count: usize,
    pub reward: f64,
    pub live: bool,
    pub transmissions: Vec<TransmissionRecord>,
}

impl SessionRecord {
    pub fn new(id: SessionId, src: NodeId, dst: NodeId) -> Self {
        SessionRecord {
            id,
            src,
            dst,
            route: Vec::new(),
            hop_count: 0,
            reward: 1.0,
            live: true,
            transmissions: Vec::new(),
        }
    }

    pub fn set_route(&mut self, route: Vec<NodeId>) {
        self.hop_count = route.len().saturating_sub(1);
        self.route = route;
    }
}

/// Splits a `width`×`height` arena into `count` equal rectangles laid out on
/// the most square grid (columns ≥ rows). Zone ids run row-major from the
/// origin corner.
pub fn tile_arena(width: f64, height: f64, count: usize) -> Vec<Rect> {
    assert!(count > 0, "at least one zone");
    let rows = (1..=count)
        .filter(|r| count % r == 0 && *r * *r <= count)
        .max()
        .unwrap_or(1);
    let cols = count / rows;
    let (w, h) = (width / cols as f64, height / rows as f64);
    let mut out = Vec::with_capacity(count);
    for r in 0..rows {
        for c in 0..cols {
            let min = Point::new(c as f64 * w, r as f64 * h);
            // Pin the outer edges to the arena so no rounding gap exists.
            let max = Point::new(
                if c + 1 == cols { width } else { (c + 1) as f64 * w },
                if r + 1 == rows { height } else { (r + 1) as f64 * h },
            );
            out.push(Rect::new(min, max));
        }
    }
    out
}

/// Zone containing `point`. Points on shared boundaries belong to the lowest id.
pub fn zone_of(point: Point, zones: &[ZoneState]) -> Result<ZoneId, ModelError> {
    zones
        .iter()
        .filter(|z| z.boundary.contains(point))
        .map(|z| z.id)
        .min()
        .ok_or(ModelError::OutOfArena(point))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(range: f64) -> NodeState {
        NodeState {
            id: NodeId(0),
            position: Point::ORIGIN,
            velocity: Point::ORIGIN,
            max_velocity: 0.0,
            residual_energy: 1.0,
            power_levels: PowerLevels::new(vec![1.0]).unwrap(),
            radio_range: range,
            min_rcv: 1.0,
            zone_id: ZoneId(0),
            is_peripheral: false,
            alive: true,
        }
    }

    fn zones(rects: Vec<Rect>) -> Vec<ZoneState> {
        rects
            .into_iter()
            .enumerate()
            .map(|(i, r)| ZoneState::new(ZoneId(i as u32), r, 25.0))
            .collect()
    }

    #[test]
    fn radio_range_is_inclusive() {
        let n = node(10.0);
        assert!(in_radio_range(&n, Point::new(10.0, 0.0)));
        assert!(!in_radio_range(&n, Point::new(10.01, 0.0)));
        let z = node(0.0);
        assert!(in_radio_range(&z, Point::ORIGIN));
        assert!(!in_radio_range(&z, Point::new(1e-9, 0.0)));
    }

    #[test]
    fn half_plane_zones() {
        let zs = zones(tile_arena(100.0, 50.0, 2));
        assert_eq!(zone_of(Point::new(10.0, 10.0), &zs), Ok(ZoneId(0)));
        assert_eq!(zone_of(Point::new(60.0, 10.0), &zs), Ok(ZoneId(1)));
        assert_eq!(zone_of(Point::new(50.0, 10.0), &zs), Ok(ZoneId(0)));
        assert!(matches!(
            zone_of(Point::new(-1.0, 10.0), &zs),
            Err(ModelError::OutOfArena(_))
        ));
    }

    #[test]
    fn boundary_ties_break_low_on_exhaustive_grid() {
        // Every grid point of a 12-zone tiling: the answer must be the lowest id
        // among all rectangles that contain the point.
        let zs = zones(tile_arena(2000.0, 2000.0, 12));
        for i in 0..=80 {
            for j in 0..=80 {
                let p = Point::new(i as f64 * 25.0, j as f64 * 25.0);
                let brute = zs
                    .iter()
                    .filter(|z| z.boundary.contains(p))
                    .map(|z| z.id.0)
                    .collect::<Vec<_>>();
                assert!(!brute.is_empty());
                assert_eq!(zone_of(p, &zs).unwrap().0, *brute.iter().min().unwrap());
            }
        }
    }

    #[test]
    fn tilings_cover_the_arena() {
        for (count, grid) in [(3, (3, 1)), (6, (3, 2)), (9, (3, 3)), (12, (4, 3))] {
            let rects = tile_arena(2000.0, 2000.0, count);
            assert_eq!(rects.len(), count);
            let area: f64 = rects.iter().map(|r| r.width() * r.height()).sum();
            assert!((area - 4e6).abs() < 1e-6);
            assert!((rects[0].width() - 2000.0 / grid.0 as f64).abs() < 1e-9);
            assert!((rects[0].height() - 2000.0 / grid.1 as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn power_levels_validate() {
        assert!(PowerLevels::new(vec![]).is_err());
        assert!(PowerLevels::new(vec![1.0, 1.0]).is_err());
        assert!(PowerLevels::new(vec![0.0, 1.0]).is_err());
        let p = PowerLevels::evenly_spaced(1.0, 11.0, 5).unwrap();
        assert_eq!(p.as_slice(), &[3.0, 5.0, 7.0, 9.0, 11.0]);
    }

    #[test]
    fn debit_drains_to_zero() {
        let mut n = node(10.0);
        assert_eq!(n.debit(0.25), 0.25);
        assert_eq!(n.debit(5.0), 0.75);
        assert_eq!(n.residual_energy, 0.0);
        assert!(!n.alive);
        assert!(n.audit().is_ok());
    }
}
