//! Per-successor communication cache and the link estimators built on it:
//! attenuation per meter, movement trend, successor speed, predicted
//! displacement, the power threshold used for conditional shrinking of the
//! power-level set, and link-longevity prediction.
//!
//! Every acknowledgement carries back the signal strength the successor
//! measured, so the sender holds, for its last two acknowledged packets, the
//! send and ack timestamps, the transmit power and the received strength.
//! Those two records are enough to estimate how much signal is lost per meter
//! and how fast the successor moves relative to the sender.

use thiserror::Error;

use crate::model::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("ack reports RSS {rss} above transmit power {pwr}")]
    MalformedAck { pwr: f64, rss: f64 },
    #[error("ack timestamp {t_ack} does not follow send timestamp {t_msg}")]
    NonCausalAck { t_msg: f64, t_ack: f64 },
    #[error("ack received without a matching transmission")]
    UnsolicitedAck,
    #[error("zero travel time, attenuation undefined")]
    UndefinedAttenuation,
    #[error("no elapsed time between exchanges, velocity unobservable")]
    VelocityUnobservable,
    #[error("attenuation must be positive to estimate velocity")]
    NonPositiveAttenuation,
}

/// Movement trend of a successor relative to the sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum Trend {
    Receding = -1,
    #[default]
    Unknown = 0,
    Approaching = 1,
}

impl Trend {
    pub fn as_i8(self) -> i8 {
        self as i8
    }
}

/// One acknowledged data packet as seen by the sender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AckedPacket {
    pub t_msg: f64,
    pub t_ack: f64,
    /// Transmit power used.
    pub pwr: f64,
    /// Strength measured by the successor, carried back in the ack.
    pub rss: f64,
    /// Cumulative mean RSS of the link right after this packet was acknowledged.
    pub avg_rss_after: f64,
}

impl AckedPacket {
    pub fn new(t_msg: f64, t_ack: f64, pwr: f64, rss: f64) -> Self {
        AckedPacket {
            t_msg,
            t_ack,
            pwr,
            rss,
            avg_rss_after: rss,
        }
    }

    pub fn round_trip(&self) -> f64 {
        self.t_ack - self.t_msg
    }

    /// Attenuation suffered, PWR − RSS.
    pub fn loss(&self) -> f64 {
        self.pwr - self.rss
    }

    /// Distance travelled by the packet at signal speed `vs`.
    pub fn travel_distance(&self, vs: f64) -> f64 {
        vs * self.round_trip()
    }

    fn midpoint(&self) -> f64 {
        0.5 * (self.t_msg + self.t_ack)
    }
}

/// Scenario constants the estimators need.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorContext {
    /// Abstract signal speed used to turn round-trip times into distances.
    pub signal_speed: f64,
    /// Sender's radio range R_i.
    pub radio_range: f64,
}

/// What a sender remembers about one successor.
#[derive(Debug, Clone, PartialEq)]
pub struct CommCacheEntry {
    pub successor_id: NodeId,
    pub packets_tx: u64,
    pub packets_rx: u64,
    pub avg_rss: f64,
    pub avg_tpl: f64,
    pub recent_trend: Trend,
    /// Approximate speed of the successor relative to the sender (m/s).
    pub approx_velocity: f64,
    pub timestamp_begin: f64,
    /// Actual break time of the most recent link incarnation.
    pub timestamp_end: Option<f64>,
    /// Predicted break time; `f64::INFINITY` when the successor is not moving.
    pub expected_timestamp_end: f64,
    pub last_two: Vec<AckedPacket>,
    pub sig_atn: Option<f64>,
    pub reliable: bool,
}

impl CommCacheEntry {
    pub fn new(successor_id: NodeId, t_now: f64) -> Self {
        CommCacheEntry {
            successor_id,
            packets_tx: 0,
            packets_rx: 0,
            avg_rss: 0.0,
            avg_tpl: 0.0,
            recent_trend: Trend::Unknown,
            approx_velocity: 0.0,
            timestamp_begin: t_now,
            timestamp_end: None,
            expected_timestamp_end: f64::INFINITY,
            last_two: Vec::with_capacity(2),
            sig_atn: None,
            reliable: true,
        }
    }

    /// Packet reception rate; zero until something is acknowledged.
    pub fn prr(&self) -> f64 {
        if self.packets_tx == 0 {
            0.0
        } else {
            self.packets_rx as f64 / self.packets_tx as f64
        }
    }

    /// Mean received strength over mean transmit power, in [0, 1].
    pub fn rss_over_tpl(&self) -> f64 {
        if self.avg_tpl > 0.0 {
            (self.avg_rss / self.avg_tpl).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn attenuation_or(&self, prior: f64) -> f64 {
        self.sig_atn.unwrap_or(prior)
    }

    pub fn latest(&self) -> Option<&AckedPacket> {
        self.last_two.last()
    }

    pub fn record_transmission(&mut self) {
        self.packets_tx += 1;
    }

    /// Folds one acknowledgement into the cache.
    pub fn record_ack(
        &mut self,
        t_msg: f64,
        t_ack: f64,
        pwr: f64,
        rss: f64,
        ctx: EstimatorContext,
    ) -> Result<(), LinkError> {
        if rss > pwr {
            return Err(LinkError::MalformedAck { pwr, rss });
        }
        if t_ack <= t_msg {
            return Err(LinkError::NonCausalAck { t_msg, t_ack });
        }
        if self.packets_rx >= self.packets_tx {
            return Err(LinkError::UnsolicitedAck);
        }
        if self.timestamp_end.is_some() {
            // First ack after a break: a new incarnation of the link.
            self.timestamp_begin = t_msg;
            self.timestamp_end = None;
        }
        self.packets_rx += 1;
        let n = self.packets_rx as f64;
        self.avg_rss += (rss - self.avg_rss) / n;
        self.avg_tpl += (pwr - self.avg_tpl) / n;

        let mut packet = AckedPacket::new(t_msg, t_ack, pwr, rss);
        packet.avg_rss_after = self.avg_rss;
        if self.last_two.len() == 2 {
            self.last_two.remove(0);
        }
        self.last_two.push(packet);

        if let [older, newer] = self.last_two[..] {
            if let Ok(a) = estimate_attenuation(&older, &newer, ctx.signal_speed) {
                if a > 0.0 {
                    self.sig_atn = Some(a);
                }
            }
            self.recent_trend = detect_trend(&older, &newer);
            if let Some(a) = self.sig_atn {
                // An unobservable velocity keeps the previous estimate.
                if let Ok(v) = estimate_velocity(&older, &newer, a) {
                    self.approx_velocity = v;
                }
            }
            self.expected_timestamp_end =
                expected_link_end(ctx.radio_range, self.approx_velocity, newer.t_ack);
        }
        Ok(())
    }

    /// Best guess of the sender–successor distance at `t_now`: the distance
    /// the last acknowledged packet travelled plus the displacement since,
    /// unless the successor is known to be approaching.
    pub fn predicted_distance(&self, t_now: f64, vs: f64) -> Option<f64> {
        let last = self.latest()?;
        let drift = predict_displacement(self.approx_velocity, t_now, last.t_ack);
        let base = last.travel_distance(vs);
        Some(match self.recent_trend {
            Trend::Approaching => (base - drift).max(0.0),
            _ => base + drift,
        })
    }

    /// Displacement of the successor since the last acknowledgement.
    pub fn displacement_since_ack(&self, t_now: f64) -> f64 {
        self.latest()
            .map(|p| predict_displacement(self.approx_velocity, t_now, p.t_ack))
            .unwrap_or(0.0)
    }
}

/// Signal attenuation per meter averaged over two acknowledged packets.
pub fn estimate_attenuation(
    rec1: &AckedPacket,
    rec2: &AckedPacket,
    vs: f64,
) -> Result<f64, LinkError> {
    let d1 = rec1.travel_distance(vs);
    let d2 = rec2.travel_distance(vs);
    if d1 <= 0.0 || d2 <= 0.0 {
        return Err(LinkError::UndefinedAttenuation);
    }
    Ok((rec1.loss() / d1 + rec2.loss() / d2) / 2.0)
}

/// +1 when the later exchange was no slower and no weaker, −1 when it was
/// slower and weaker, otherwise 0.
pub fn detect_trend(rec1: &AckedPacket, rec2: &AckedPacket) -> Trend {
    let (rtt1, rtt2) = (rec1.round_trip(), rec2.round_trip());
    let (s1, s2) = (rec1.avg_rss_after, rec2.avg_rss_after);
    if rtt2 <= rtt1 && s1 <= s2 {
        Trend::Approaching
    } else if rtt2 > rtt1 && s1 > s2 {
        Trend::Receding
    } else {
        Trend::Unknown
    }
}

/// Speed implied by an attenuation change `ff2 − ff1` over `elapsed` seconds.
pub fn velocity_from_attenuation(
    ff1: f64,
    ff2: f64,
    sig_atn: f64,
    elapsed: f64,
) -> Result<f64, LinkError> {
    if sig_atn <= 0.0 {
        return Err(LinkError::NonPositiveAttenuation);
    }
    if elapsed == 0.0 {
        return Err(LinkError::VelocityUnobservable);
    }
    Ok((ff2 - ff1).abs() / (sig_atn * elapsed.abs()))
}

/// Successor speed from two exchanges. The elapsed time is measured between
/// the midpoints of the two exchanges, which is when the data packets reached
/// the successor.
pub fn estimate_velocity(
    rec1: &AckedPacket,
    rec2: &AckedPacket,
    sig_atn: f64,
) -> Result<f64, LinkError> {
    velocity_from_attenuation(
        rec1.loss(),
        rec2.loss(),
        sig_atn,
        rec2.midpoint() - rec1.midpoint(),
    )
}

pub fn predict_displacement(vel: f64, t_now: f64, t_ack2: f64) -> f64 {
    vel * (t_now - t_ack2).max(0.0)
}

/// The sender gives up on a successor predicted to have crossed its whole radio disc.
pub fn should_drop(dist_est: f64, radio_range: f64) -> bool {
    dist_est > 2.0 * radio_range
}

/// Strict lower bound on a usable transmit power.
pub fn power_threshold(sig_atn: f64, dist_est: f64, min_rcv: f64) -> f64 {
    sig_atn * dist_est + min_rcv
}

/// Conditional shrinking: the suffix of `levels` strictly above `p_thres`.
/// An empty result means the link is unusable for this attempt.
pub fn available_levels(levels: &[f64], p_thres: f64) -> &[f64] {
    let first = levels.partition_point(|&p| p <= p_thres);
    &levels[first..]
}

/// Predicted break time; infinite when the successor is not moving.
pub fn expected_link_end(radio_range: f64, vel: f64, t_ack2: f64) -> f64 {
    if vel > 0.0 {
        2.0 * radio_range / vel + t_ack2
    } else {
        f64::INFINITY
    }
}

/// Records a break at `actual_break_time`. A link that broke before its
/// predicted end is no longer trusted.
pub fn mark_reliability(entry: &mut CommCacheEntry, actual_break_time: f64) {
    entry.reliable = actual_break_time >= entry.expected_timestamp_end;
    entry.timestamp_end = Some(actual_break_time);
    entry.recent_trend = Trend::Unknown;
    entry.last_two.clear();
}
