//! Append-only run ledger, the seven evaluation metrics computed from it,
//! windowed waste series, and CSV emission.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::model::{NodeId, SessionId, ZoneId};
use crate::rewards::{transmission_waste, RewardError, WasteInputs, WasteLedger};

/// What an energy debit paid for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DebitKind {
    Data,
    Ack,
    RouteRequest,
    RouteReply,
    LinkBreakage,
    ZoneSync,
    Beacon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Debit {
    pub t: f64,
    pub node: NodeId,
    pub kind: DebitKind,
    pub joules: f64,
}

/// Energy (joules) and time (seconds) invested or wasted, booked at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amount {
    pub t: f64,
    pub zone: ZoneId,
    pub energy: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropCause {
    /// The node holding the packet ran out of energy.
    NodeDied,
    /// No route to the destination could be found.
    Unreachable,
    /// The session closed before the packet left its source.
    SessionClosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketFate {
    Delivered,
    Dropped(DropCause),
    /// Still queued or in flight when the run ended.
    Pending,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub session: SessionId,
    pub generated_at: f64,
    pub left_source_at: Option<f64>,
    pub delivered_at: Option<f64>,
    pub fate: PacketFate,
}

/// Raw inputs of one reward-side waste entry, kept so the waste can be
/// recomputed independently.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardWasteEntry {
    pub t: f64,
    pub zone: ZoneId,
    pub turn: u32,
    pub prev_action: f64,
    pub tau_a: f64,
    pub zone_set_costs: Vec<f64>,
    pub invested_energy: f64,
    pub invested_time: f64,
    pub zone_broadcast_times: Vec<f64>,
    pub mx_atmpt: u32,
}

/// Running sums maintained as entries are appended.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningTotals {
    pub debited: f64,
    pub invested_energy: f64,
    pub invested_time: f64,
    pub wasted_energy: f64,
    pub wasted_time: f64,
    pub messages: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLedger {
    pub policy: String,
    pub seed: u64,
    pub end_time: f64,
    pub initial_energy: Vec<f64>,
    pub final_energy: Vec<f64>,
    /// Messages sent per node.
    pub messages: Vec<u64>,
    pub debits: Vec<Debit>,
    pub packets: Vec<PacketRecord>,
    pub invested: Vec<Amount>,
    pub wasted: Vec<Amount>,
    pub reward_waste: Vec<RewardWasteEntry>,
    pub totals: RunningTotals,
    /// Per-zone cumulative reward-side waste `(ew, et)`.
    pub zone_waste: WasteLedger,
}

impl MetricsLedger {
    pub fn new(policy: impl Into<String>, seed: u64, initial_energy: Vec<f64>) -> Self {
        let n = initial_energy.len();
        MetricsLedger {
            policy: policy.into(),
            seed,
            end_time: 0.0,
            final_energy: initial_energy.clone(),
            initial_energy,
            messages: vec![0; n],
            debits: Vec::new(),
            packets: Vec::new(),
            invested: Vec::new(),
            wasted: Vec::new(),
            reward_waste: Vec::new(),
            totals: RunningTotals::default(),
            zone_waste: WasteLedger::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.initial_energy.len()
    }

    /// Records an energy debit already taken from `node`.
    pub fn debit(&mut self, t: f64, node: NodeId, kind: DebitKind, joules: f64) {
        if joules > 0.0 {
            self.debits.push(Debit { t, node, kind, joules });
            self.totals.debited += joules;
        }
    }

    pub fn message(&mut self, node: NodeId) {
        self.messages[node.index()] += 1;
        self.totals.messages += 1;
    }

    pub fn invest(&mut self, a: Amount) {
        self.totals.invested_energy += a.energy;
        self.totals.invested_time += a.time;
        self.invested.push(a);
    }

    pub fn waste(&mut self, a: Amount) {
        self.totals.wasted_energy += a.energy;
        self.totals.wasted_time += a.time;
        self.wasted.push(a);
    }

    /// Books a reward-side waste entry against its zone and returns the
    /// zone's new cumulative `(ew, et)`.
    pub fn book_reward_waste(&mut self, e: RewardWasteEntry) -> Result<(f64, f64), RewardError> {
        let w = transmission_waste(&WasteInputs {
            turn: e.turn,
            prev_action: e.prev_action,
            tau_a: e.tau_a,
            zone_set_costs: &e.zone_set_costs,
            invested_energy: e.invested_energy,
            invested_time: e.invested_time,
            zone_broadcast_times: &e.zone_broadcast_times,
            mx_atmpt: e.mx_atmpt,
        })?;
        let zone = e.zone;
        self.zone_waste.accumulate(zone, &[w]);
        self.reward_waste.push(e);
        Ok(self.zone_waste.zone(zone))
    }

    pub fn new_packet(&mut self, session: SessionId, t: f64) -> usize {
        self.packets.push(PacketRecord {
            session,
            generated_at: t,
            left_source_at: None,
            delivered_at: None,
            fate: PacketFate::Pending,
        });
        self.packets.len() - 1
    }
}

/// One window of the waste series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowPoint {
    pub start: f64,
    pub end: f64,
    pub awe: f64,
    pub awt: f64,
    pub invested_energy: f64,
    pub invested_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub policy: String,
    pub seed: u64,
    /// Overall message count.
    pub omc: u64,
    /// Energy consumed, joules.
    pub ec: f64,
    /// Delivered over packets that left their source and finished, percent.
    /// `None` when no packet finished.
    pub ntg: Option<f64>,
    /// Mean delivery delay of delivered packets, seconds.
    pub adl: Option<f64>,
    /// Alive nodes, percent.
    pub paln: f64,
    /// Wasted over invested energy, percent.
    pub awe: f64,
    /// Wasted over invested time, percent.
    pub awt: f64,
    pub series: Vec<WindowPoint>,
}

fn percent(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        (100.0 * part / whole).clamp(0.0, 100.0)
    } else {
        0.0
    }
}

/// The seven metrics plus the windowed waste series.
pub fn compute_metrics(ledger: &MetricsLedger, window: f64) -> MetricsReport {
    let ec: f64 = ledger
        .initial_energy
        .iter()
        .zip(&ledger.final_energy)
        .map(|(a, b)| a - b)
        .sum();
    let mut finished = 0usize;
    let mut delivered = 0usize;
    let mut delay = 0.0;
    for p in &ledger.packets {
        match p.fate {
            PacketFate::Delivered => {
                finished += 1;
                delivered += 1;
                delay += p.delivered_at.unwrap_or(p.generated_at) - p.generated_at;
            }
            PacketFate::Dropped(_) if p.left_source_at.is_some() => finished += 1,
            _ => {}
        }
    }
    let n = ledger.node_count();
    let alive = ledger.final_energy.iter().filter(|e| **e > 0.0).count();
    let t = &ledger.totals;
    MetricsReport {
        policy: ledger.policy.clone(),
        seed: ledger.seed,
        omc: ledger.messages.iter().sum(),
        ec,
        ntg: (finished > 0).then(|| 100.0 * delivered as f64 / finished as f64),
        adl: (delivered > 0).then(|| delay / delivered as f64),
        paln: if n == 0 { 100.0 } else { 100.0 * alive as f64 / n as f64 },
        awe: percent(t.wasted_energy, t.invested_energy),
        awt: percent(t.wasted_time, t.invested_time),
        series: windowed_waste_series(ledger, window),
    }
}

/// AWE and AWT per window of length `window` over `[0, end_time)`, each
/// computed only from that window's invested and wasted amounts.
pub fn windowed_waste_series(ledger: &MetricsLedger, window: f64) -> Vec<WindowPoint> {
    assert!(window > 0.0, "window length must be positive");
    let count = (ledger.end_time / window).ceil() as usize;
    if count == 0 {
        return Vec::new();
    }
    let slot = |t: f64| ((t / window).floor().max(0.0) as usize).min(count - 1);
    let mut inv = vec![(0.0, 0.0); count];
    let mut wst = vec![(0.0, 0.0); count];
    for a in &ledger.invested {
        let s = &mut inv[slot(a.t)];
        s.0 += a.energy;
        s.1 += a.time;
    }
    for a in &ledger.wasted {
        let s = &mut wst[slot(a.t)];
        s.0 += a.energy;
        s.1 += a.time;
    }
    (0..count)
        .map(|k| WindowPoint {
            start: k as f64 * window,
            end: ((k + 1) as f64 * window).min(ledger.end_time),
            awe: percent(wst[k].0, inv[k].0),
            awt: percent(wst[k].1, inv[k].1),
            invested_energy: inv[k].0,
            invested_time: inv[k].1,
        })
        .collect()
}

/// Formats with six significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        let s = format!("{x:.5e}");
        let (mant, exp) = s.split_once('e').expect("scientific notation");
        let mant = trim_zeros(mant);
        return format!("{mant}e{exp}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can add a digit (9.999995 -> 10.00000); re-trim either way.
    trim_zeros(&s).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

pub const SUMMARY_HEADER: &str = "# sdwsn summary v1\npolicy,seed,omc,ec_j,ntg_pct,adl_s,paln_pct,awe_pct,awt_pct\n";
pub const SERIES_HEADER: &str = "# sdwsn series v1\npolicy,seed,window_start_s,window_end_s,awe_pct,awt_pct\n";

/// Summary CSV: header, then one row per report in the given order.
pub fn summary_csv(reports: &[MetricsReport]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.policy,
            r.seed,
            r.omc,
            fmt_sig(r.ec),
            opt(r.ntg),
            opt(r.adl),
            fmt_sig(r.paln),
            fmt_sig(r.awe),
            fmt_sig(r.awt)
        );
    }
    s
}

/// Series CSV: header, then one row per window of every report.
pub fn series_csv(reports: &[MetricsReport]) -> String {
    let mut s = String::from(SERIES_HEADER);
    for r in reports {
        for w in &r.series {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.policy,
                r.seed,
                fmt_sig(w.start),
                fmt_sig(w.end),
                fmt_sig(w.awe),
                fmt_sig(w.awt)
            );
        }
    }
    s
}

pub fn emit_csv(content: &str, path: &Path) -> io::Result<()> {
    std::fs::write(path, content)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn amount(t: f64, energy: f64, time: f64) -> Amount {
        Amount {
            t,
            zone: ZoneId(0),
            energy,
            time,
        }
    }

    fn ledger(n: usize) -> MetricsLedger {
        MetricsLedger::new("rl-trc", 1, vec![30.0; n])
    }

    #[test]
    fn empty_ledger() {
        let r = compute_metrics(&ledger(4), 10.0);
        assert_eq!(r.omc, 0);
        assert_eq!(r.paln, 100.0);
        assert_eq!(r.ntg, None);
        assert_eq!(r.adl, None);
        assert_eq!((r.awe, r.awt), (0.0, 0.0));
        assert!(r.series.is_empty());
    }

    #[test]
    fn ntg_and_adl() {
        let mut l = ledger(2);
        for i in 0..100 {
            let p = l.new_packet(SessionId(0), i as f64);
            l.packets[p].left_source_at = Some(i as f64);
            if i < 80 {
                l.packets[p].fate = PacketFate::Delivered;
                l.packets[p].delivered_at = Some(i as f64 + 0.5);
            } else {
                l.packets[p].fate = PacketFate::Dropped(DropCause::Unreachable);
            }
        }
        // Never left the source: excluded from NTG.
        let p = l.new_packet(SessionId(0), 1.0);
        l.packets[p].fate = PacketFate::Dropped(DropCause::SessionClosed);
        let r = compute_metrics(&l, 10.0);
        assert_eq!(r.ntg, Some(80.0));
        assert_relative_eq!(r.adl.unwrap(), 0.5);
    }

    #[test]
    fn awe_from_totals() {
        let mut l = ledger(1);
        l.invest(amount(0.0, 100.0, 10.0));
        l.waste(amount(0.0, 20.0, 1.0));
        let r = compute_metrics(&l, 10.0);
        assert_relative_eq!(r.awe, 20.0);
        assert_relative_eq!(r.awt, 10.0);
    }

    #[test]
    fn paln_and_ec() {
        let mut l = ledger(4);
        l.final_energy = vec![0.0, 10.0, 30.0, 29.5];
        let r = compute_metrics(&l, 10.0);
        assert_eq!(r.paln, 75.0);
        assert_relative_eq!(r.ec, 30.0 + 20.0 + 0.5);
    }

    #[test]
    fn series_examples() {
        let mut l = ledger(1);
        l.end_time = 30.0;
        for k in 0..3 {
            l.invest(amount(k as f64 * 10.0 + 1.0, 10.0, 1.0));
        }
        assert!(windowed_waste_series(&l, 10.0).iter().all(|w| w.awe == 0.0 && w.awt == 0.0));
        l.waste(amount(2.0, 5.0, 0.5));
        let s = windowed_waste_series(&l, 10.0);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].awe, 50.0);
        assert_eq!((s[1].awe, s[2].awe), (0.0, 0.0));
        // Partial last window.
        l.end_time = 25.0;
        let s = windowed_waste_series(&l, 10.0);
        assert_eq!(s.last().unwrap().end, 25.0);
    }

    #[test]
    fn reward_waste_is_accumulated_per_zone() {
        let mut l = ledger(1);
        let (ew, et) = l
            .book_reward_waste(RewardWasteEntry {
                t: 0.0,
                zone: ZoneId(2),
                turn: 2,
                prev_action: 12.0,
                tau_a: 0.05,
                zone_set_costs: vec![],
                invested_energy: 0.0,
                invested_time: 0.0,
                zone_broadcast_times: vec![],
                mx_atmpt: 3,
            })
            .unwrap();
        assert_eq!((ew, et), (12.0, 0.05));
        assert_eq!(l.zone_waste.zone(ZoneId(0)), (0.0, 0.0));
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(100.0), "100");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333");
        assert_eq!(fmt_sig(123456.7), "123457");
        assert_eq!(fmt_sig(1234567.0), "1.23457e6");
        assert_eq!(fmt_sig(12.5), "12.5");
        assert_eq!(fmt_sig(0.000012345678), "1.23457e-5");
        assert_eq!(fmt_sig(-2.0), "-2");
        assert_eq!(fmt_sig(99.99999), "100");
    }

    #[test]
    fn csv_shapes() {
        let mut l = ledger(1);
        l.end_time = 20.0;
        let r = compute_metrics(&l, 10.0);
        let s = summary_csv(std::slice::from_ref(&r));
        assert_eq!(s.lines().count(), 3);
        assert!(s.ends_with('\n'));
        assert!(s.lines().nth(2).unwrap().starts_with("rl-trc,1,0,0,,,100,0,0"));
        let series = series_csv(&[r.clone()]);
        assert_eq!(series.lines().count(), 2 + 2);
        assert_eq!(summary_csv(&[r.clone()]), summary_csv(&[r]));
    }

    proptest::proptest! {
        #[test]
        fn whole_run_awe_is_weighted_window_mean(
            entries in proptest::collection::vec((0.0f64..100.0, 0.1f64..10.0, 0.0f64..1.0), 1..60),
            window in 1.0f64..40.0,
        ) {
            let mut l = ledger(1);
            l.end_time = 100.0;
            for (t, e, frac) in entries {
                l.invest(amount(t, e, e / 10.0));
                l.waste(amount(t, e * frac, e * frac / 10.0));
            }
            let r = compute_metrics(&l, window);
            let ie: f64 = r.series.iter().map(|w| w.invested_energy).sum();
            let weighted: f64 = r.series.iter().map(|w| w.awe * w.invested_energy).sum::<f64>() / ie;
            proptest::prop_assert!((weighted - r.awe).abs() <= 1e-9 * r.awe.max(1.0));
            for w in &r.series {
                proptest::prop_assert!((0.0..=100.0).contains(&w.awe));
            }
        }
    }
}
