//! Slow, obviously-correct reference computations. Nothing here is used by
//! the simulator itself.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdwsn::metrics::{MetricsLedger, MetricsReport};
use sdwsn::model::ZoneId;
use thiserror::Error;

/// Monte Carlo mean of the largest distance from the center among `n`
/// points drawn uniformly (by rejection) from a disc of radius `r`.
pub fn oracle_max_distance(n: u32, r: f64, samples: u64, seed: u64) -> f64 {
    if r == 0.0 || n == 0 || samples == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..samples {
        let mut best: f64 = 0.0;
        for _ in 0..n {
            let d2 = loop {
                let x: f64 = rng.random_range(-1.0..1.0);
                let y: f64 = rng.random_range(-1.0..1.0);
                let d2 = x * x + y * y;
                if d2 <= 1.0 {
                    break d2;
                }
            };
            best = best.max(d2);
        }
        total += best.sqrt() * r;
    }
    total / samples as f64
}

/// Hop-minimal route by enumerating every simple path; ties go to the
/// lexicographically smallest node sequence. `adjacency[a]` lists the nodes
/// `a` can forward to.
pub fn oracle_shortest_path(adjacency: &[Vec<usize>], src: usize, dst: usize) -> Option<Vec<usize>> {
    assert!(adjacency.len() <= 12, "exhaustive search is limited to 12 nodes");
    if src == dst {
        return Some(vec![src]);
    }
    let mut best: Option<Vec<usize>> = None;
    let mut path = vec![src];
    let mut on_path = vec![false; adjacency.len()];
    on_path[src] = true;
    walk(adjacency, dst, &mut path, &mut on_path, &mut best);
    best
}

fn walk(
    adj: &[Vec<usize>],
    dst: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    best: &mut Option<Vec<usize>>,
) {
    let here = *path.last().expect("path starts at the source");
    if here == dst {
        let better = match best {
            None => true,
            Some(b) => (path.len(), &path[..]) < (b.len(), &b[..]),
        };
        if better {
            *best = Some(path.clone());
        }
        return;
    }
    for &next in &adj[here] {
        if !on_path[next] {
            on_path[next] = true;
            path.push(next);
            walk(adj, dst, path, on_path, best);
            path.pop();
            on_path[next] = false;
        }
    }
}

/// Quantities re-derived from the raw ledger entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Recheck {
    /// Cumulative `(ew, et)` per zone from the reward-side waste entries.
    pub zone_waste: BTreeMap<ZoneId, (f64, f64)>,
    /// Energy consumed, from initial minus final energies.
    pub ec: f64,
    /// Energy consumed, from the individual debits.
    pub debited: f64,
    pub awe: f64,
    pub awt: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{quantity} differs at {entry}: flat {flat}, incremental {incremental}")]
pub struct Mismatch {
    pub quantity: &'static str,
    /// The first node, zone or entry where the two paths disagree.
    pub entry: String,
    pub flat: f64,
    pub incremental: f64,
}

fn flat_waste(
    turn: u32,
    mx: u32,
    prev: f64,
    tau: f64,
    set_costs: &[f64],
    inv: (f64, f64),
    times: &[f64],
) -> (f64, f64) {
    if turn <= 1 {
        (0.0, 0.0)
    } else if turn <= mx {
        (prev, tau)
    } else {
        let mut e = prev + inv.0;
        for c in set_costs {
            e += c;
        }
        let mut t = tau + inv.1;
        for x in times {
            t += x;
        }
        (e, t)
    }
}

fn ratio(part: f64, whole: f64) -> f64 {
    if whole <= 0.0 {
        0.0
    } else {
        (part / whole * 100.0).clamp(0.0, 100.0)
    }
}

/// Recomputes zone waste, EC, AWE and AWT by flat summation over the entry
/// logs, then compares them with the ledger's running totals and `report`
/// to a relative tolerance of 1e-9.
pub fn oracle_ledger_recheck(ledger: &MetricsLedger, report: &MetricsReport) -> Result<Recheck, Mismatch> {
    let mut out = Recheck::default();
    for e in &ledger.reward_waste {
        let w = flat_waste(
            e.turn,
            e.mx_atmpt,
            e.prev_action,
            e.tau_a,
            &e.zone_set_costs,
            (e.invested_energy, e.invested_time),
            &e.zone_broadcast_times,
        );
        let z = out.zone_waste.entry(e.zone).or_insert((0.0, 0.0));
        z.0 += w.0;
        z.1 += w.1;
    }
    let mut per_node = vec![0.0; ledger.initial_energy.len()];
    for d in &ledger.debits {
        per_node[d.node.index()] += d.joules;
    }
    for (i, spent) in per_node.iter().enumerate() {
        let drop = ledger.initial_energy[i] - ledger.final_energy[i];
        check("node energy", || format!("node {i}"), *spent, drop)?;
        out.debited += spent;
        out.ec += drop;
    }
    let sum = |xs: &[sdwsn::metrics::Amount]| {
        xs.iter().fold((0.0, 0.0), |acc, a| (acc.0 + a.energy, acc.1 + a.time))
    };
    let (ie, it) = sum(&ledger.invested);
    let (we, wt) = sum(&ledger.wasted);
    out.awe = ratio(we, ie);
    out.awt = ratio(wt, it);

    for (zone, (ew, et)) in &out.zone_waste {
        let (iew, iet) = ledger.zone_waste.zone(*zone);
        check("zone ew", || format!("zone {}", zone.0), *ew, iew)?;
        check("zone et", || format!("zone {}", zone.0), *et, iet)?;
    }
    if let Some((zone, _)) = ledger.zone_waste.zones().find(|(z, _)| !out.zone_waste.contains_key(z)) {
        return Err(Mismatch {
            quantity: "zone ew",
            entry: format!("zone {}", zone.0),
            flat: 0.0,
            incremental: ledger.zone_waste.zone(zone).0,
        });
    }
    let t = &ledger.totals;
    check("debited", || "totals".into(), out.debited, t.debited)?;
    check("invested energy", || "totals".into(), ie, t.invested_energy)?;
    check("invested time", || "totals".into(), it, t.invested_time)?;
    check("wasted energy", || "totals".into(), we, t.wasted_energy)?;
    check("wasted time", || "totals".into(), wt, t.wasted_time)?;
    check("EC", || "report".into(), out.ec, report.ec)?;
    check("AWE", || "report".into(), out.awe, report.awe)?;
    check("AWT", || "report".into(), out.awt, report.awt)?;
    Ok(out)
}

fn check(
    quantity: &'static str,
    entry: impl FnOnce() -> String,
    flat: f64,
    incremental: f64,
) -> Result<(), Mismatch> {
    let scale = flat.abs().max(incremental.abs());
    if (flat - incremental).abs() <= 1e-9 * scale {
        Ok(())
    } else {
        Err(Mismatch {
            quantity,
            entry: entry(),
            flat,
            incremental,
        })
    }
}
