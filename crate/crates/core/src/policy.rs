//! Power-level decisions: the adaptive exploration rate, ε-greedy selection
//! over the shrunken level set, the generic highest-average-payout arm rule,
//! and simplified baseline controllers used for comparison runs.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

pub const SIGMA_MIN: f64 = 0.001;
pub const SIGMA_MAX: f64 = 0.999;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("no power level clears the threshold; link unusable")]
    UnusableLink,
    #[error("unknown policy '{0}'")]
    UnknownPolicy(String),
}

/// Zone and network rewards feeding the exploration rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaInputs {
    /// Reward of the sender's zone.
    pub ri: f64,
    /// Reward of the whole network.
    pub rn: f64,
}

/// Exploration rate σ from the zone reward `ri` and network reward `rn`.
///
/// | region                    | σ                            |
/// |---------------------------|------------------------------|
/// | ri < 0                    | 0.001                        |
/// | 0 ≤ ri < 1                | ri                           |
/// | ri ≥ 1, −1 ≤ rn < 0       | 1 − 1/(1+ri)^(1/(rn+1))      |
/// | ri ≥ 1, rn < −1           | 0.001                        |
/// | ri ≥ 1, 0 ≤ rn ≤ 1        | 1 − 1/(1+ri)                 |
/// | ri ≥ 1, rn > 1            | (1 − 1/(1+ri))^(1/rn)        |
///
/// The result is clamped to [0.001, 0.999].
pub fn compute_sigma(inputs: SigmaInputs) -> f64 {
    let SigmaInputs { ri, rn } = inputs;
    let raw = if ri.is_nan() || rn.is_nan() || ri < 0.0 {
        SIGMA_MIN
    } else if ri < 1.0 {
        ri
    } else if rn < -1.0 {
        SIGMA_MIN
    } else if rn < 0.0 {
        1.0 - 1.0 / (1.0 + ri).powf(1.0 / (rn + 1.0))
    } else if rn <= 1.0 {
        1.0 - 1.0 / (1.0 + ri)
    } else {
        (1.0 - 1.0 / (1.0 + ri)).powf(1.0 / rn)
    };
    if raw.is_nan() {
        SIGMA_MIN
    } else {
        raw.clamp(SIGMA_MIN, SIGMA_MAX)
    }
}

/// ε-greedy choice among `available` (ascending). The maximum level is the
/// greedy option and is chosen with probability `(1−σ) + σ/k`; every other
/// level with `σ/k`. Unreliable links always get the maximum level.
pub fn select_power_level<R: Rng + ?Sized>(
    available: &[f64],
    sigma: f64,
    reliable: bool,
    rng: &mut R,
) -> Result<f64, PolicyError> {
    let max = *available.last().ok_or(PolicyError::UnusableLink)?;
    if !reliable || available.len() == 1 {
        return Ok(max);
    }
    if rng.random::<f64>() < sigma {
        Ok(available[rng.random_range(0..available.len())])
    } else {
        Ok(max)
    }
}

/// Pull counts and cumulative payouts of a set of arms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArmStats {
    pub pulls: Vec<u64>,
    pub total: Vec<f64>,
}

impl ArmStats {
    pub fn new(arms: usize) -> Self {
        ArmStats {
            pulls: vec![0; arms],
            total: vec![0.0; arms],
        }
    }

    pub fn record(&mut self, arm: usize, reward: f64) {
        self.pulls[arm] += 1;
        self.total[arm] += reward;
    }

    pub fn average(&self, arm: usize) -> Option<f64> {
        (self.pulls[arm] > 0).then(|| self.total[arm] / self.pulls[arm] as f64)
    }
}

/// Arm with the highest average payout. Unpulled arms come first, ties go to
/// the lowest index.
pub fn greedy_arm(stats: &ArmStats) -> usize {
    assert!(!stats.pulls.is_empty(), "at least one arm");
    if let Some(i) = stats.pulls.iter().position(|&p| p == 0) {
        return i;
    }
    let mut best = 0;
    let mut best_avg = f64::NEG_INFINITY;
    for arm in 0..stats.pulls.len() {
        let avg = stats.average(arm).unwrap_or(f64::NEG_INFINITY);
        if avg > best_avg {
            best = arm;
            best_avg = avg;
        }
    }
    best
}

/// Comparison schemes. Each is a deliberately small rule, documented on
/// [`baseline_decide`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaselineKind {
    FixedMax,
    OdtpcLike,
    BeaconPrrLike,
    BeaconRssiLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyKind {
    RlTrc,
    Baseline(BaselineKind),
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::RlTrc,
        PolicyKind::Baseline(BaselineKind::FixedMax),
        PolicyKind::Baseline(BaselineKind::OdtpcLike),
        PolicyKind::Baseline(BaselineKind::BeaconPrrLike),
        PolicyKind::Baseline(BaselineKind::BeaconRssiLike),
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::RlTrc => "rl-trc",
            PolicyKind::Baseline(BaselineKind::FixedMax) => "fixed-max",
            PolicyKind::Baseline(BaselineKind::OdtpcLike) => "odtpc-like",
            PolicyKind::Baseline(BaselineKind::BeaconPrrLike) => "beacon-prr-like",
            PolicyKind::Baseline(BaselineKind::BeaconRssiLike) => "beacon-rssi-like",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PolicyError::UnknownPolicy(s.to_string()))
    }
}

/// Thresholds used by the baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineThresholds {
    /// Step power up when the last RSS falls below this.
    pub rssi_low: f64,
    /// Step power down when the last RSS rises above this.
    pub rssi_high: f64,
    /// PRR below which the beacon-PRR scheme returns to maximum power.
    pub prr_target: f64,
}

impl Default for BaselineThresholds {
    fn default() -> Self {
        BaselineThresholds {
            rssi_low: 3.0,
            rssi_high: 12.0,
            prr_target: 0.9,
        }
    }
}

/// What a baseline may know about the link it is about to use.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkView {
    pub sig_atn: Option<f64>,
    pub last_distance: Option<f64>,
    pub min_rcv: f64,
    pub last_rss: Option<f64>,
    /// Level used on the previous transmission over this link.
    pub current_level: Option<f64>,
    pub prr: f64,
    /// The previous attempt of the current packet was not acknowledged.
    pub retry: bool,
}

/// Baseline power decision.
///
/// * `fixed-max`: always the maximum level.
/// * `odtpc-like`: smallest level whose predicted RSS
///   (`level − sig_atn · distance`) exceeds `min_rcv`; maximum on a retry or
///   without a distance estimate.
/// * `beacon-rssi-like`: one notch down when the last RSS exceeded
///   `rssi_high`, one notch up below `rssi_low` or after a failed attempt,
///   otherwise hold.
/// * `beacon-prr-like`: maximum while PRR is below `prr_target` (or on a
///   retry), else one notch below the current level. Its periodic beacons are
///   charged by the simulator.
pub fn baseline_decide(
    kind: BaselineKind,
    link: &LinkView,
    levels: &[f64],
    thresholds: &BaselineThresholds,
) -> f64 {
    let max_idx = levels.len() - 1;
    let max = levels[max_idx];
    let current_idx = link
        .current_level
        .and_then(|c| levels.iter().position(|&p| p == c))
        .unwrap_or(max_idx);
    match kind {
        BaselineKind::FixedMax => max,
        BaselineKind::OdtpcLike => match (link.sig_atn, link.last_distance, link.retry) {
            (Some(a), Some(d), false) => levels
                .iter()
                .copied()
                .find(|&p| p - a * d > link.min_rcv)
                .unwrap_or(max),
            _ => max,
        },
        BaselineKind::BeaconRssiLike => {
            let idx = match link.last_rss {
                _ if link.retry => (current_idx + 1).min(max_idx),
                None => max_idx,
                Some(rss) if rss > thresholds.rssi_high => current_idx.saturating_sub(1),
                Some(rss) if rss < thresholds.rssi_low => (current_idx + 1).min(max_idx),
                Some(_) => current_idx,
            };
            levels[idx]
        }
        BaselineKind::BeaconPrrLike => {
            if link.retry || link.last_rss.is_none() || link.prr < thresholds.prr_target {
                max
            } else {
                levels[current_idx.saturating_sub(1)]
            }
        }
    }
}
