//! Reward and waste arithmetic at node, session, zone and network scope.
//!
//! * A node earns the power it saves: each completed attempt adds
//!   `p_max − action` to its running reward.
//! * A node rates each successor. After an acknowledgement the rating is
//!   `(F_PRR · F_RSS)^e` with the exponent picked by the successor's movement
//!   trend; after exhausting every attempt the zone's broadcast cost is deducted.
//! * Unsuccessful attempts and the route-request broadcasts they trigger are
//!   booked as wasted energy and time against the session's zone; a session's
//!   reward decays exponentially with that waste.
//! * A zone's reward sums its nodes' and sessions' rewards, the network's sums
//!   the zones'.
//!
//! The hop-count estimates behind the broadcast cost come from the expected
//! distance to the farthest of `n` neighbors spread uniformly over a radio
//! disc of radius `R`, which is `2nR / (2n + 1)`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::link::Trend;
use crate::model::{NodeId, ZoneId};

/// Default saturation point of [`broadcast_cost`], in messages.
pub const DEFAULT_BROADCAST_COST_CAP: f64 = 1e12;

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("action {action} exceeds the maximum power level {p_max}")]
    InvalidAction { action: f64, p_max: f64 },
    #[error("{name} = {value} lies outside [0, 1]")]
    OutOfUnitInterval { name: &'static str, value: f64 },
    #[error("expected farthest-neighbor distance needs at least one neighbor")]
    NoNeighbors,
    #[error("turn {turn} outside 1..={max}")]
    TurnOutOfRange { turn: u32, max: u32 },
}

/// Running self-reward: `p_max − action + r_prev`.
pub fn node_self_reward(r_prev: f64, p_max: f64, action: f64) -> Result<f64, RewardError> {
    if action > p_max {
        return Err(RewardError::InvalidAction { action, p_max });
    }
    Ok(p_max - action + r_prev)
}

fn trend_exponent(trend: Trend) -> f64 {
    match trend {
        Trend::Approaching => 0.25,
        Trend::Unknown => 0.5,
        Trend::Receding => 0.75,
    }
}

/// Rating of a successor that acknowledged the last packet.
pub fn successor_reward_ack(prr: f64, rss_over_tpl: f64, trend: Trend) -> Result<f64, RewardError> {
    for (name, value) in [("prr", prr), ("rss_over_tpl", rss_over_tpl)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(RewardError::OutOfUnitInterval { name, value });
        }
    }
    let f_prr = (1.0 + prr) / 2.0;
    let f_rss = (1.0 + rss_over_tpl) / 2.0;
    Ok((f_prr * f_rss).powf(trend_exponent(trend)))
}

/// Rating of a successor that failed to acknowledge: unchanged while attempts
/// remain, reduced by the zone broadcast cost once they are exhausted.
pub fn successor_reward_noack(rd_prev: f64, turn: u32, mx_atmpt: u32, broad_cost: f64) -> f64 {
    if turn > mx_atmpt {
        rd_prev - broad_cost
    } else {
        rd_prev
    }
}

/// Expected distance to the farthest of `n` neighbors uniform in a disc of radius `r`.
pub fn expected_max_neighbor_distance(n: u32, r: f64) -> Result<f64, RewardError> {
    if n == 0 {
        return Err(RewardError::NoNeighbors);
    }
    let two_n = 2.0 * f64::from(n);
    Ok(two_n * r / (two_n + 1.0))
}

/// Average maximum progress per hop in a zone.
pub fn per_hop_progress(phi: f64, av_rad: f64) -> f64 {
    2.0 * phi * av_rad / (2.0 * phi + 1.0)
}

/// Minimum hop count across a zone of diameter `theta`.
pub fn min_hop_count(theta: f64, phi: f64, av_rad: f64) -> f64 {
    theta * (2.0 * phi + 1.0) / (2.0 * phi * av_rad)
}

/// Mean of the minimum hop count and the one-meter-per-hop maximum `theta`.
pub fn avg_hop_count(theta: f64, phi: f64, av_rad: f64) -> f64 {
    theta * (1.0 + (2.0 * phi + 1.0) / (2.0 * phi * av_rad)) / 2.0
}

/// Route-request broadcast cost `ng + ng² + … + ng^⌊h_avg⌋`, saturated at `cap`.
pub fn broadcast_cost(ng: f64, h_avg: f64, cap: f64) -> f64 {
    let terms = h_avg.max(0.0).floor();
    if terms == 0.0 {
        return 0.0;
    }
    let cost = if ng == 1.0 {
        terms
    } else {
        let exp = (terms + 1.0).min(f64::from(i32::MAX)) as i32;
        (ng.powi(exp) - 1.0) / (ng - 1.0) - 1.0
    };
    if cost.is_nan() || cost > cap {
        cap
    } else {
        cost
    }
}

/// Inputs for one transmission's waste.
#[derive(Debug, Clone, Copy, Default)]
pub struct WasteInputs<'a> {
    pub turn: u32,
    /// Action (or energy) spent on the previous attempt of this packet on this hop.
    pub prev_action: f64,
    /// Ack wait τ_a.
    pub tau_a: f64,
    /// Broadcast cost of every zone the route-request flood covers.
    pub zone_set_costs: &'a [f64],
    /// Energy invested from the source up to the hop start for this packet.
    pub invested_energy: f64,
    /// Time invested from the source up to the hop start.
    pub invested_time: f64,
    /// Broadcast duration of every zone the flood covers.
    pub zone_broadcast_times: &'a [f64],
    pub mx_atmpt: u32,
}

/// Energy and time wasted by one transmission, by attempt number:
/// nothing on the first attempt, the previous attempt while retries remain,
/// and the previous attempt plus the rediscovery broadcast plus everything
/// invested upstream once attempts are exhausted.
pub fn transmission_waste(w: &WasteInputs<'_>) -> Result<(f64, f64), RewardError> {
    let last = w.mx_atmpt + 1;
    match w.turn {
        1 => Ok((0.0, 0.0)),
        t if t > 1 && t <= w.mx_atmpt => Ok((w.prev_action, w.tau_a)),
        t if t == last && t > 1 => {
            let energy =
                w.prev_action + w.zone_set_costs.iter().sum::<f64>() + w.invested_energy;
            let time =
                w.tau_a + w.zone_broadcast_times.iter().sum::<f64>() + w.invested_time;
            Ok((energy, time))
        }
        turn => Err(RewardError::TurnOutOfRange { turn, max: last }),
    }
}

/// Cumulative wasted energy and time per zone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WasteLedger {
    zones: BTreeMap<ZoneId, (f64, f64)>,
}

impl WasteLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the wastes of one batch of transmissions to `zone`.
    pub fn accumulate(&mut self, zone: ZoneId, wastes: &[(f64, f64)]) {
        if wastes.is_empty() {
            return;
        }
        let slot = self.zones.entry(zone).or_insert((0.0, 0.0));
        for (e, t) in wastes {
            slot.0 += e;
            slot.1 += t;
        }
    }

    /// `(ew, et)` of a zone.
    pub fn zone(&self, zone: ZoneId) -> (f64, f64) {
        self.zones.get(&zone).copied().unwrap_or((0.0, 0.0))
    }

    pub fn zones(&self) -> impl Iterator<Item = (ZoneId, (f64, f64))> + '_ {
        self.zones.iter().map(|(z, v)| (*z, *v))
    }
}

/// Session reward `exp(−ew · (1 − 1/(1 + et)))`, in (0, 1].
pub fn session_reward(ew: f64, et: f64) -> f64 {
    let r = (-ew * (1.0 - 1.0 / (1.0 + et))).exp();
    // exp underflows to 0 for very large waste; the reward stays positive.
    r.max(f64::MIN_POSITIVE)
}

pub fn zone_reward(node_rewards: &[f64], session_rewards: &[f64]) -> f64 {
    node_rewards.iter().sum::<f64>() + session_rewards.iter().sum::<f64>()
}

pub fn network_reward(zone_rewards: &[f64]) -> f64 {
    zone_rewards.iter().sum()
}

/// A node's own reward and its ratings of successors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeRewardState {
    pub self_reward: f64,
    pub successor_rewards: BTreeMap<NodeId, f64>,
    pub last_action: Option<f64>,
}

impl NodeRewardState {
    pub fn apply_action(&mut self, p_max: f64, action: f64) -> Result<(), RewardError> {
        self.self_reward = node_self_reward(self.self_reward, p_max, action)?;
        self.last_action = Some(action);
        Ok(())
    }

    pub fn on_ack(
        &mut self,
        successor: NodeId,
        prr: f64,
        rss_over_tpl: f64,
        trend: Trend,
    ) -> Result<f64, RewardError> {
        let rd = successor_reward_ack(prr, rss_over_tpl, trend)?;
        self.successor_rewards.insert(successor, rd);
        Ok(rd)
    }

    pub fn on_no_ack(&mut self, successor: NodeId, turn: u32, mx_atmpt: u32, broad_cost: f64) -> f64 {
        let prev = self.successor_rewards.get(&successor).copied().unwrap_or(0.0);
        let rd = successor_reward_noack(prev, turn, mx_atmpt, broad_cost);
        self.successor_rewards.insert(successor, rd);
        rd
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn self_reward_examples() {
        let r1 = NodeRewardState::default().self_reward;
        assert_eq!(r1, 0.0);
        assert_eq!(node_self_reward(0.0, 25.0, 20.0), Ok(5.0));
        assert_eq!(node_self_reward(7.0, 25.0, 25.0), Ok(7.0));
        assert!(matches!(
            node_self_reward(0.0, 25.0, 26.0),
            Err(RewardError::InvalidAction { .. })
        ));
    }

    #[test]
    fn rule_one_examples() {
        for t in [Trend::Approaching, Trend::Unknown, Trend::Receding] {
            assert_eq!(successor_reward_ack(1.0, 1.0, t), Ok(1.0));
        }
        let up = successor_reward_ack(0.6, 0.5, Trend::Approaching).unwrap();
        let flat = successor_reward_ack(0.6, 0.5, Trend::Unknown).unwrap();
        let down = successor_reward_ack(0.6, 0.5, Trend::Receding).unwrap();
        assert_relative_eq!(up, 0.8801, epsilon = 1e-4);
        assert_relative_eq!(flat, 0.7746, epsilon = 1e-4);
        assert_relative_eq!(down, 0.6817, epsilon = 1e-4);
        assert!(successor_reward_ack(1.2, 0.5, Trend::Unknown).is_err());
        assert!(successor_reward_ack(0.5, -0.1, Trend::Unknown).is_err());
    }

    #[test]
    fn rule_two_examples() {
        assert_eq!(successor_reward_noack(5.0, 2, 3, 14.0), 5.0);
        assert_eq!(successor_reward_noack(5.0, 4, 3, 14.0), -9.0);
        assert_eq!(successor_reward_noack(5.0, 9, 3, 0.0), 5.0);
    }

    #[test]
    fn hop_geometry_examples() {
        assert_relative_eq!(expected_max_neighbor_distance(1, 9.0).unwrap(), 6.0);
        assert_relative_eq!(expected_max_neighbor_distance(2, 10.0).unwrap(), 8.0);
        assert!(10.0 - expected_max_neighbor_distance(1_000_000, 10.0).unwrap() < 1e-4);
        assert_eq!(expected_max_neighbor_distance(0, 10.0), Err(RewardError::NoNeighbors));

        assert_relative_eq!(per_hop_progress(2.0, 10.0), 8.0);
        assert_relative_eq!(per_hop_progress(0.5, 10.0), 5.0);
        assert_eq!(per_hop_progress(2.0, 0.0), 0.0);

        assert_relative_eq!(min_hop_count(100.0, 2.0, 10.0), 12.5);
        assert_relative_eq!(min_hop_count(8.0, 2.0, 10.0), 1.0);
        assert_relative_eq!(min_hop_count(100.0, 1e9, 10.0), 10.0, max_relative = 1e-8);

        assert_relative_eq!(avg_hop_count(100.0, 2.0, 10.0), 56.25);
        assert_relative_eq!(avg_hop_count(2.0, 2.0, 10.0), 1.125);
        assert_relative_eq!(avg_hop_count(50.0, 1e12, 1.0), 50.0, max_relative = 1e-9);
    }

    #[test]
    fn broadcast_cost_examples() {
        let cap = DEFAULT_BROADCAST_COST_CAP;
        assert_eq!(broadcast_cost(2.0, 3.0, cap), 14.0);
        assert_eq!(broadcast_cost(3.0, 2.0, cap), 12.0);
        assert_eq!(broadcast_cost(1.0, 7.9, cap), 7.0);
        assert_eq!(broadcast_cost(2.0, 3.99, cap), 14.0);
        assert_eq!(broadcast_cost(4.0, 56.25, cap), cap);
        assert_eq!(broadcast_cost(4.0, 1e6, cap), cap);
        assert_eq!(broadcast_cost(4.0, 0.5, cap), 0.0);
    }

    #[test]
    fn waste_examples() {
        let base = WasteInputs {
            tau_a: 0.05,
            prev_action: 12.0,
            mx_atmpt: 3,
            ..Default::default()
        };
        assert_eq!(transmission_waste(&WasteInputs { turn: 1, ..base }), Ok((0.0, 0.0)));
        assert_eq!(transmission_waste(&WasteInputs { turn: 2, ..base }), Ok((12.0, 0.05)));
        let t_hop = 0.005;
        let times = [12.5 * t_hop];
        let exhausted = WasteInputs {
            turn: 4,
            zone_set_costs: &[14.0],
            invested_energy: 30.0,
            invested_time: 0.4,
            zone_broadcast_times: &times,
            ..base
        };
        let (e, t) = transmission_waste(&exhausted).unwrap();
        assert_eq!(e, 12.0 + 14.0 + 30.0);
        assert_relative_eq!(t, 0.05 + 12.5 * t_hop + 0.4);
        assert!(transmission_waste(&WasteInputs { turn: 0, ..base }).is_err());
        assert!(transmission_waste(&WasteInputs { turn: 5, ..base }).is_err());
    }

    #[test]
    fn zone_waste_accumulates() {
        let mut l = WasteLedger::new();
        l.accumulate(ZoneId(0), &[]);
        assert_eq!(l.zone(ZoneId(0)), (0.0, 0.0));
        l.accumulate(ZoneId(0), &[(12.0, 0.05), (0.0, 0.0)]);
        assert_eq!(l.zone(ZoneId(0)), (12.0, 0.05));
        l.accumulate(ZoneId(0), &[(0.0, 0.0), (0.0, 0.0)]);
        assert_eq!(l.zone(ZoneId(0)), (12.0, 0.05));
    }

    #[test]
    fn session_and_aggregate_examples() {
        assert_eq!(session_reward(5.0, 0.0), 1.0);
        assert_eq!(session_reward(0.0, 5.0), 1.0);
        assert_relative_eq!(session_reward(1.0, 1.0), 0.6065, epsilon = 1e-4);
        assert!(session_reward(1e12, 10.0) > 0.0);

        assert_eq!(zone_reward(&[1.0, 2.0], &[0.5]), 3.5);
        assert_eq!(zone_reward(&[], &[]), 0.0);
        let penalized = successor_reward_noack(5.0, 4, 3, 14.0);
        assert_eq!(zone_reward(&[penalized], &[]), -9.0);

        assert_eq!(network_reward(&[3.5, -1.0]), 2.5);
        assert_eq!(network_reward(&[3.5]), 3.5);
        assert_eq!(network_reward(&[0.0, 0.0]), 0.0);
    }

    proptest::proptest! {
        #[test]
        fn self_reward_never_decreases(r in -1e6f64..1e6, p_max in 0.1f64..100.0, frac in 0.0f64..=1.0) {
            let next = node_self_reward(r, p_max, p_max * frac).unwrap();
            proptest::prop_assert!(next >= r);
        }

        #[test]
        fn rule_one_monotone(prr in 0.0f64..=1.0, rss in 0.0f64..=1.0, dp in 0.0f64..0.5, ds in 0.0f64..0.5) {
            let trends = [Trend::Receding, Trend::Unknown, Trend::Approaching];
            for t in trends {
                let base = successor_reward_ack(prr, rss, t).unwrap();
                let more_prr = successor_reward_ack((prr + dp).min(1.0), rss, t).unwrap();
                let more_rss = successor_reward_ack(prr, (rss + ds).min(1.0), t).unwrap();
                proptest::prop_assert!(more_prr >= base && more_rss >= base);
                proptest::prop_assert!(base > 0.0 && base <= 1.0);
            }
            let by_trend: Vec<f64> = trends.iter().map(|&t| successor_reward_ack(prr, rss, t).unwrap()).collect();
            proptest::prop_assert!(by_trend[0] <= by_trend[1] && by_trend[1] <= by_trend[2]);
        }

        #[test]
        fn session_reward_bounded_and_decreasing(ew in 0.01f64..50.0, et in 0.01f64..50.0, d in 0.01f64..5.0) {
            let r = session_reward(ew, et);
            proptest::prop_assert!(r > 0.0 && r <= 1.0);
            proptest::prop_assert!(session_reward(ew + d, et) < r);
            proptest::prop_assert!(session_reward(ew, et + d) < r);
        }

        #[test]
        fn zone_waste_batching_commutes(
            wastes in proptest::collection::vec((0.0f64..100.0, 0.0f64..1.0), 0..40),
            split in 0usize..40,
        ) {
            let mut whole = WasteLedger::new();
            whole.accumulate(ZoneId(1), &wastes);
            let mut per_event = WasteLedger::new();
            for w in &wastes {
                per_event.accumulate(ZoneId(1), std::slice::from_ref(w));
            }
            let mut halves = WasteLedger::new();
            let cut = split.min(wastes.len());
            halves.accumulate(ZoneId(1), &wastes[..cut]);
            halves.accumulate(ZoneId(1), &wastes[cut..]);
            let (a, b, c) = (whole.zone(ZoneId(1)), per_event.zone(ZoneId(1)), halves.zone(ZoneId(1)));
            proptest::prop_assert!((a.0 - b.0).abs() <= 1e-9 * a.0.max(1.0) && (a.1 - b.1).abs() <= 1e-9 * a.1.max(1.0));
            proptest::prop_assert!((a.0 - c.0).abs() <= 1e-9 * a.0.max(1.0) && (a.1 - c.1).abs() <= 1e-9 * a.1.max(1.0));
        }
    }
}
