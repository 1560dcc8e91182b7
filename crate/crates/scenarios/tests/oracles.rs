use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdwsn::geometry::Point;
use sdwsn::metrics::{compute_metrics, Amount, DebitKind, MetricsLedger, RewardWasteEntry};
use sdwsn::model::{NodeId, ZoneId};
use sdwsn::policy::PolicyKind;
use sdwsn::sim::routing::{relays, route_discovery, route_select, FloodNode};
use sdwsn::sim::run_with_seed;
use sdwsn_scenarios::{oracle_ledger_recheck, oracle_shortest_path, CATALOG};

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Vec<FloodNode> {
    (0..n)
        .map(|i| FloodNode {
            id: NodeId(i as u32),
            position: Point::new(rng.random_range(0.0..60.0), rng.random_range(0.0..60.0)),
            radio_range: rng.random_range(15.0..30.0),
            zone: ZoneId(rng.random_range(0..2)),
            is_peripheral: rng.random_bool(0.25),
            alive: rng.random_bool(0.9),
        })
        .collect()
}

#[test]
fn route_selection_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let allowed = [ZoneId(0), ZoneId(1)];
    let mut found = 0;
    for _ in 0..400 {
        let n = rng.random_range(2..=12);
        let nodes = random_graph(&mut rng, n);
        let (src, dst) = (0usize, n - 1);
        // The destination answers but never relays.
        let adjacency: Vec<Vec<usize>> = (0..n)
            .map(|a| {
                if a == dst {
                    return Vec::new();
                }
                (0..n).filter(|&b| b != a && relays(&nodes[a], &nodes[b], &allowed)).collect()
            })
            .collect();
        let expect = if nodes[src].alive {
            oracle_shortest_path(&adjacency, src, dst)
        } else {
            None
        };
        let d = route_discovery(&nodes, NodeId(src as u32), NodeId(dst as u32), &allowed, 30);
        let got = route_select(&d.candidates)
            .map(|r| r.iter().map(|id| id.index()).collect::<Vec<_>>());
        assert_eq!(got, expect, "{nodes:?}");
        found += usize::from(got.is_some());
    }
    assert!(found > 50, "too few connected cases ({found})");
}

#[test]
fn randomized_ledger_rechecks() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let nodes = 8;
    let initial: Vec<f64> = (0..nodes).map(|_| rng.random_range(20.0..50.0)).collect();
    let mut ledger = MetricsLedger::new("rl-trc", 9, initial.clone());
    let mut energy = initial;
    let kinds = [DebitKind::Data, DebitKind::Ack, DebitKind::RouteRequest, DebitKind::ZoneSync];
    for k in 0..1000 {
        let t = f64::from(k) * 0.1;
        let zone = ZoneId(rng.random_range(0..3));
        match rng.random_range(0..3) {
            0 => {
                let node = rng.random_range(0..nodes);
                let j: f64 = rng.random_range(0.0..0.01);
                energy[node] -= j;
                ledger.debit(t, NodeId(node as u32), kinds[k as usize % kinds.len()], j);
            }
            1 => {
                let a = Amount {
                    t,
                    zone,
                    energy: rng.random_range(0.0..0.01),
                    time: rng.random_range(0.0..0.05),
                };
                ledger.invest(a);
                if rng.random_bool(0.3) {
                    ledger.waste(a);
                }
            }
            _ => {
                let mx = 3;
                let turn = rng.random_range(2..=mx + 1);
                let zones = rng.random_range(1..=3);
                ledger
                    .book_reward_waste(RewardWasteEntry {
                        t,
                        zone,
                        turn,
                        prev_action: rng.random_range(1.0..25.0),
                        tau_a: 0.05,
                        zone_set_costs: (0..zones).map(|_| rng.random_range(1.0..100.0)).collect(),
                        invested_energy: rng.random_range(0.0..50.0),
                        invested_time: rng.random_range(0.0..1.0),
                        zone_broadcast_times: (0..zones).map(|_| rng.random_range(0.0..0.1)).collect(),
                        mx_atmpt: mx,
                    })
                    .unwrap();
            }
        }
    }
    ledger.final_energy = energy;
    ledger.end_time = 100.0;
    let report = compute_metrics(&ledger, 10.0);
    let rc = oracle_ledger_recheck(&ledger, &report).unwrap();
    assert!(rc.zone_waste.len() == 3 && rc.awe > 0.0);
}

#[test]
fn every_catalog_run_rechecks() {
    for s in CATALOG {
        let mut cfg = s.config().unwrap();
        for policy in PolicyKind::ALL {
            cfg.policy = policy;
            cfg.duration = cfg.duration.min(60.0);
            let out = run_with_seed(&cfg, s.seed).unwrap();
            if let Err(m) = oracle_ledger_recheck(&out.ledger, &out.report) {
                panic!("{} / {}: {m}", s.name, policy.name());
            }
        }
    }
}
