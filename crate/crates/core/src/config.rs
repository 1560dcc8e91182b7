//! Scenario configuration: a flat `key = value` text format with `#`
//! comments. Every key is optional; missing keys take the defaults below.
//! Values outside the reference parameter ranges are rejected unless
//! `override = true` is set.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::policy::{BaselineThresholds, PolicyKind};
use crate::rewards::DEFAULT_BROADCAST_COST_CAP;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityModel {
    RandomWaypoint,
    RandomWalk,
    Gaussian,
}

impl MobilityModel {
    pub fn name(self) -> &'static str {
        match self {
            MobilityModel::RandomWaypoint => "random-waypoint",
            MobilityModel::RandomWalk => "random-walk",
            MobilityModel::Gaussian => "gaussian",
        }
    }
}

impl FromStr for MobilityModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random-waypoint" => Ok(MobilityModel::RandomWaypoint),
            "random-walk" => Ok(MobilityModel::RandomWalk),
            "gaussian" => Ok(MobilityModel::Gaussian),
            other => Err(format!(
                "unknown mobility model '{other}' (random-waypoint, random-walk, gaussian)"
            )),
        }
    }
}

/// One rejected field.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid configuration:\n  {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n  "))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub zones: usize,
    pub nodes: usize,
    pub arena_width: f64,
    pub arena_height: f64,
    pub radio_range_min: f64,
    pub radio_range_max: f64,
    pub initial_energy_min: f64,
    pub initial_energy_max: f64,
    /// Bounds on the number of power levels a node gets.
    pub power_levels_min: usize,
    pub power_levels_max: usize,
    pub min_rcv: f64,
    pub inter_arrival_min: f64,
    pub inter_arrival_max: f64,
    pub mean_inter_arrival: f64,
    pub mx_atmpt: u32,
    /// Network-wide hop-count bound H.
    pub max_hops: usize,
    pub mobility: MobilityModel,
    pub max_velocity: f64,
    pub pause_max: f64,
    pub mobility_dt: f64,
    /// Std-dev of the per-step velocity increment of the gaussian model (m/s).
    pub gaussian_sigma: f64,
    pub policy: PolicyKind,
    pub seed: u64,
    pub duration: f64,
    pub t_sync: f64,
    pub t_net: f64,
    pub tau_a: f64,
    /// Per-link attenuation coefficients are drawn from [alpha_min, alpha_max].
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Half-width of the uniform RSS noise.
    pub noise: f64,
    /// Attenuation assumed before two acknowledgements exist.
    pub prior_attenuation: f64,
    pub signal_speed: f64,
    pub payload_bytes: f64,
    pub bitrate: f64,
    /// Joules per power unit per second of airtime.
    pub energy_per_unit: f64,
    pub ack_cost_fraction: f64,
    pub broadcast_cost_cap: f64,
    /// Per-hop latency of broadcast and control messages.
    pub broadcast_hop_time: f64,
    pub sessions: usize,
    pub session_duration: f64,
    pub peripherals_per_boundary: usize,
    pub rssi_low: f64,
    pub rssi_high: f64,
    pub prr_target: f64,
    pub beacon_interval: f64,
    pub min_nodes_per_zone: usize,
    pub max_nodes_per_zone: usize,
    pub series_window: f64,
    pub override_ranges: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            zones: 3,
            nodes: 100,
            arena_width: 2000.0,
            arena_height: 2000.0,
            radio_range_min: 10.0,
            radio_range_max: 40.0,
            initial_energy_min: 20.0,
            initial_energy_max: 50.0,
            power_levels_min: 1,
            power_levels_max: 25,
            min_rcv: 1.0,
            inter_arrival_min: 0.05,
            inter_arrival_max: 0.2,
            mean_inter_arrival: 0.125,
            mx_atmpt: 3,
            max_hops: 30,
            mobility: MobilityModel::RandomWaypoint,
            max_velocity: 2.0,
            pause_max: 5.0,
            mobility_dt: 1.0,
            gaussian_sigma: 0.3,
            policy: PolicyKind::RlTrc,
            seed: 1,
            duration: 300.0,
            t_sync: 5.0,
            t_net: 20.0,
            tau_a: 0.05,
            alpha_min: 0.5,
            alpha_max: 2.0,
            noise: 0.1,
            prior_attenuation: 1.25,
            signal_speed: 4000.0,
            payload_bytes: 50.0,
            bitrate: 250_000.0,
            energy_per_unit: 1e-3,
            ack_cost_fraction: 0.5,
            broadcast_cost_cap: DEFAULT_BROADCAST_COST_CAP,
            broadcast_hop_time: 0.005,
            sessions: 10,
            session_duration: 30.0,
            peripherals_per_boundary: 4,
            rssi_low: 3.0,
            rssi_high: 12.0,
            prr_target: 0.9,
            beacon_interval: 1.0,
            min_nodes_per_zone: 5,
            max_nodes_per_zone: 150,
            series_window: 10.0,
            override_ranges: false,
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>().map_err(|e| ConfigError::Syntax {
        line,
        message: format!("{key}: cannot parse '{raw}': {e}"),
    })
}

fn parse_bool(line: usize, key: &str, raw: &str) -> Result<bool, ConfigError> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Syntax {
            line,
            message: format!("{key}: expected true or false, got '{raw}'"),
        }),
    }
}

impl ScenarioConfig {
    /// Parses and validates configuration text.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg = Self::parse_unvalidated(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without range validation.
    pub fn parse_unvalidated(text: &str) -> Result<Self, ConfigError> {
        let mut c = ScenarioConfig::default();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            })?;
            let (key, v) = (key.trim(), value.trim());
            macro_rules! set {
                ($field:ident) => {
                    c.$field = parse_value(line, key, v)?
                };
            }
            match key {
                "zones" => set!(zones),
                "nodes" => set!(nodes),
                "arena_width" => set!(arena_width),
                "arena_height" => set!(arena_height),
                "radio_range_min" => set!(radio_range_min),
                "radio_range_max" => set!(radio_range_max),
                "initial_energy_min" => set!(initial_energy_min),
                "initial_energy_max" => set!(initial_energy_max),
                "power_levels_min" => set!(power_levels_min),
                "power_levels_max" => set!(power_levels_max),
                "min_rcv" => set!(min_rcv),
                "inter_arrival_min" => set!(inter_arrival_min),
                "inter_arrival_max" => set!(inter_arrival_max),
                "mean_inter_arrival" => set!(mean_inter_arrival),
                "mx_atmpt" => set!(mx_atmpt),
                "max_hops" => set!(max_hops),
                "mobility" => set!(mobility),
                "max_velocity" => set!(max_velocity),
                "pause_max" => set!(pause_max),
                "mobility_dt" => set!(mobility_dt),
                "gaussian_sigma" => set!(gaussian_sigma),
                "policy" => set!(policy),
                "seed" => set!(seed),
                "duration" => set!(duration),
                "t_sync" => set!(t_sync),
                "t_net" => set!(t_net),
                "tau_a" => set!(tau_a),
                "alpha_min" => set!(alpha_min),
                "alpha_max" => set!(alpha_max),
                "noise" => set!(noise),
                "prior_attenuation" => set!(prior_attenuation),
                "signal_speed" => set!(signal_speed),
                "payload_bytes" => set!(payload_bytes),
                "bitrate" => set!(bitrate),
                "energy_per_unit" => set!(energy_per_unit),
                "ack_cost_fraction" => set!(ack_cost_fraction),
                "broadcast_cost_cap" => set!(broadcast_cost_cap),
                "broadcast_hop_time" => set!(broadcast_hop_time),
                "sessions" => set!(sessions),
                "session_duration" => set!(session_duration),
                "peripherals_per_boundary" => set!(peripherals_per_boundary),
                "rssi_low" => set!(rssi_low),
                "rssi_high" => set!(rssi_high),
                "prr_target" => set!(prr_target),
                "beacon_interval" => set!(beacon_interval),
                "min_nodes_per_zone" => set!(min_nodes_per_zone),
                "max_nodes_per_zone" => set!(max_nodes_per_zone),
                "series_window" => set!(series_window),
                "override" => c.override_ranges = parse_bool(line, key, v)?,
                other => {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("unknown key '{other}'"),
                    })
                }
            }
        }
        Ok(c)
    }

    /// Checks structural constraints always, and the reference parameter
    /// ranges unless `override_ranges` is set. Reports every violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        let mut bad = |field: &'static str, message: String| v.push(Violation { field, message });

        if !self.override_ranges {
            if ![3, 6, 9, 12].contains(&self.zones) {
                bad("zones", format!("{} not in {{3, 6, 9, 12}}", self.zones));
            }
            if !(100..=500).contains(&self.nodes) {
                bad("nodes", format!("{} outside [100, 500]", self.nodes));
            }
            if self.arena_width != 2000.0 || self.arena_height != 2000.0 {
                bad(
                    "arena_width",
                    format!("{}x{} m is not the 2000x2000 m arena", self.arena_width, self.arena_height),
                );
            }
            for (field, value) in [
                ("radio_range_min", self.radio_range_min),
                ("radio_range_max", self.radio_range_max),
            ] {
                if !(10.0..=40.0).contains(&value) {
                    bad(field, format!("{value} m outside [10, 40] m"));
                }
            }
            for (field, value) in [
                ("initial_energy_min", self.initial_energy_min),
                ("initial_energy_max", self.initial_energy_max),
            ] {
                if !(20.0..=50.0).contains(&value) {
                    bad(field, format!("{value} J outside [20, 50] J"));
                }
            }
            for (field, value) in [
                ("power_levels_min", self.power_levels_min),
                ("power_levels_max", self.power_levels_max),
            ] {
                if !(1..=25).contains(&value) {
                    bad(field, format!("{value} outside [1, 25] levels"));
                }
            }
            for (field, value) in [
                ("inter_arrival_min", self.inter_arrival_min),
                ("inter_arrival_max", self.inter_arrival_max),
            ] {
                if !(0.05..=0.2).contains(&value) {
                    bad(field, format!("{value} s outside [0.05, 0.2] s"));
                }
            }
            if !(1..=4).contains(&self.mx_atmpt) {
                bad("mx_atmpt", format!("{} outside [1, 4] attempts", self.mx_atmpt));
            }
            if self.min_nodes_per_zone < 5 {
                bad("min_nodes_per_zone", format!("{} below 5", self.min_nodes_per_zone));
            }
            if self.max_nodes_per_zone > 150 {
                bad("max_nodes_per_zone", format!("{} above 150", self.max_nodes_per_zone));
            }
        }

        // Structural constraints, enforced regardless of override.
        if self.zones == 0 {
            bad("zones", "at least one zone required".into());
        } else if self.nodes > self.zones * self.max_nodes_per_zone {
            bad(
                "nodes",
                format!(
                    "{} nodes exceed {} zones x {} nodes per zone",
                    self.nodes, self.zones, self.max_nodes_per_zone
                ),
            );
        } else if self.nodes < self.zones * self.min_nodes_per_zone {
            bad(
                "nodes",
                format!(
                    "{} nodes below {} zones x {} nodes per zone",
                    self.nodes, self.zones, self.min_nodes_per_zone
                ),
            );
        }
        if self.nodes < 2 {
            bad("nodes", "at least two nodes required".into());
        }
        if !(self.arena_width > 0.0 && self.arena_height > 0.0) {
            bad("arena_width", "arena must have positive size".into());
        }
        let pairs: [(&'static str, f64, f64); 5] = [
            ("radio_range_min", self.radio_range_min, self.radio_range_max),
            ("initial_energy_min", self.initial_energy_min, self.initial_energy_max),
            ("inter_arrival_min", self.inter_arrival_min, self.inter_arrival_max),
            ("alpha_min", self.alpha_min, self.alpha_max),
            (
                "power_levels_min",
                self.power_levels_min as f64,
                self.power_levels_max as f64,
            ),
        ];
        for (field, lo, hi) in pairs {
            if !(lo <= hi) {
                bad(field, format!("minimum {lo} exceeds maximum {hi}"));
            }
        }
        if self.power_levels_min == 0 {
            bad("power_levels_min", "nodes need at least one power level".into());
        }
        if !(self.radio_range_min > 0.0) {
            bad("radio_range_min", "must be positive".into());
        }
        if !(self.initial_energy_min > 0.0) {
            bad("initial_energy_min", "must be positive".into());
        }
        if !(self.alpha_min > 0.0) {
            bad("alpha_min", "attenuation must be positive".into());
        }
        if self.mx_atmpt == 0 {
            bad("mx_atmpt", "at least one attempt required".into());
        }
        if self.max_hops == 0 {
            bad("max_hops", "must be at least 1".into());
        }
        if !(self.inter_arrival_min > 0.0) {
            bad("inter_arrival_min", "must be positive".into());
        }
        let positive: [(&'static str, f64); 14] = [
            ("duration", self.duration + f64::MIN_POSITIVE),
            ("mean_inter_arrival", self.mean_inter_arrival),
            ("mobility_dt", self.mobility_dt),
            ("t_sync", self.t_sync),
            ("t_net", self.t_net),
            ("tau_a", self.tau_a),
            ("signal_speed", self.signal_speed),
            ("payload_bytes", self.payload_bytes),
            ("bitrate", self.bitrate),
            ("energy_per_unit", self.energy_per_unit),
            ("broadcast_cost_cap", self.broadcast_cost_cap),
            ("session_duration", self.session_duration),
            ("series_window", self.series_window),
            ("beacon_interval", self.beacon_interval),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                bad(field, format!("{value} must be positive and finite"));
            }
        }
        if self.t_net < self.t_sync {
            bad("t_net", format!("{} s shorter than t_sync {} s", self.t_net, self.t_sync));
        }
        let non_negative: [(&'static str, f64); 8] = [
            ("min_rcv", self.min_rcv),
            ("max_velocity", self.max_velocity),
            ("pause_max", self.pause_max),
            ("gaussian_sigma", self.gaussian_sigma),
            ("noise", self.noise),
            ("prior_attenuation", self.prior_attenuation),
            ("ack_cost_fraction", self.ack_cost_fraction),
            ("broadcast_hop_time", self.broadcast_hop_time),
        ];
        for (field, value) in non_negative {
            if !(value >= 0.0) || !value.is_finite() {
                bad(field, format!("{value} must be non-negative and finite"));
            }
        }
        // A data packet must be able to make a full round trip within τ_a.
        if self.radio_range_max / self.signal_speed >= self.tau_a {
            bad(
                "tau_a",
                format!(
                    "{} s cannot cover a {} m round trip at signal speed {}",
                    self.tau_a, self.radio_range_max, self.signal_speed
                ),
            );
        }
        if self.sessions == 0 {
            bad("sessions", "at least one session required".into());
        }
        if !(0.0..=1.0).contains(&self.prr_target) {
            bad("prr_target", format!("{} outside [0, 1]", self.prr_target));
        }
        if self.rssi_low > self.rssi_high {
            bad("rssi_low", format!("{} exceeds rssi_high {}", self.rssi_low, self.rssi_high));
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    pub fn thresholds(&self) -> BaselineThresholds {
        BaselineThresholds {
            rssi_low: self.rssi_low,
            rssi_high: self.rssi_high,
            prr_target: self.prr_target,
        }
    }

    /// Seconds on air for a payload of `bytes`.
    pub fn airtime(&self, bytes: f64) -> f64 {
        bytes * 8.0 / self.bitrate
    }

    /// Renders the configuration back into the text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("zones", self.zones.to_string());
        kv("nodes", self.nodes.to_string());
        kv("arena_width", self.arena_width.to_string());
        kv("arena_height", self.arena_height.to_string());
        kv("radio_range_min", self.radio_range_min.to_string());
        kv("radio_range_max", self.radio_range_max.to_string());
        kv("initial_energy_min", self.initial_energy_min.to_string());
        kv("initial_energy_max", self.initial_energy_max.to_string());
        kv("power_levels_min", self.power_levels_min.to_string());
        kv("power_levels_max", self.power_levels_max.to_string());
        kv("min_rcv", self.min_rcv.to_string());
        kv("inter_arrival_min", self.inter_arrival_min.to_string());
        kv("inter_arrival_max", self.inter_arrival_max.to_string());
        kv("mean_inter_arrival", self.mean_inter_arrival.to_string());
        kv("mx_atmpt", self.mx_atmpt.to_string());
        kv("max_hops", self.max_hops.to_string());
        kv("mobility", self.mobility.name().to_string());
        kv("max_velocity", self.max_velocity.to_string());
        kv("pause_max", self.pause_max.to_string());
        kv("mobility_dt", self.mobility_dt.to_string());
        kv("gaussian_sigma", self.gaussian_sigma.to_string());
        kv("policy", self.policy.name().to_string());
        kv("seed", self.seed.to_string());
        kv("duration", self.duration.to_string());
        kv("t_sync", self.t_sync.to_string());
        kv("t_net", self.t_net.to_string());
        kv("tau_a", self.tau_a.to_string());
        kv("alpha_min", self.alpha_min.to_string());
        kv("alpha_max", self.alpha_max.to_string());
        kv("noise", self.noise.to_string());
        kv("prior_attenuation", self.prior_attenuation.to_string());
        kv("signal_speed", self.signal_speed.to_string());
        kv("payload_bytes", self.payload_bytes.to_string());
        kv("bitrate", self.bitrate.to_string());
        kv("energy_per_unit", self.energy_per_unit.to_string());
        kv("ack_cost_fraction", self.ack_cost_fraction.to_string());
        kv("broadcast_cost_cap", self.broadcast_cost_cap.to_string());
        kv("broadcast_hop_time", self.broadcast_hop_time.to_string());
        kv("sessions", self.sessions.to_string());
        kv("session_duration", self.session_duration.to_string());
        kv("peripherals_per_boundary", self.peripherals_per_boundary.to_string());
        kv("rssi_low", self.rssi_low.to_string());
        kv("rssi_high", self.rssi_high.to_string());
        kv("prr_target", self.prr_target.to_string());
        kv("beacon_interval", self.beacon_interval.to_string());
        kv("min_nodes_per_zone", self.min_nodes_per_zone.to_string());
        kv("max_nodes_per_zone", self.max_nodes_per_zone.to_string());
        kv("series_window", self.series_window.to_string());
        kv("override", self.override_ranges.to_string());
        s
    }
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    ScenarioConfig::parse(text)
}
