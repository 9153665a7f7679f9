//! Scenario tests for the simulation engine: honest networks stay silent,
//! a total-drop relay is caught immediately, border nodes report to every
//! adjacent zone they transacted with, zone-to-central syncs fire on their
//! period, and identical configs reproduce identical logs.

use std::collections::BTreeSet;

use fpms_core::config::{Scheme, SimConfig};
use fpms_core::events::{Event, PacketOutcome, ServerRole};
use fpms_core::sim::{run, Simulation};
use fpms_core::topology::{NodeId, Topology};
use fpms_core::zoning::{ZoneId, ZonePlan};

fn honest_config(n: usize, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.n = n;
    cfg.area_x = 400.0;
    cfg.area_y = 400.0;
    cfg.radio_range = 150.0;
    cfg.seed = seed;
    cfg.scheme = Scheme::Centralized;
    cfg.malicious_ratio = 0.0;
    cfg.link_failure_prob = 0.0;
    cfg.run_length = 5;
    cfg
}

#[test]
fn honest_lossless_network_has_no_failures_and_full_delivery() {
    let cfg = honest_config(10, 3);
    let mut sim = Simulation::new(cfg).unwrap();
    assert!(sim.truth_malicious().is_empty());
    for _ in 0..5 {
        sim.run_interval();
    }
    let mut originated = 0;
    let mut delivered = 0;
    for e in &sim.log().events {
        match e {
            Event::Packet { outcome, bytes, .. } => {
                assert_eq!(*outcome, PacketOutcome::Delivered);
                assert!(*bytes > 0);
                originated += 1;
                delivered += 1;
            }
            Event::Decision { failures, max_row_sum, newly_blacklisted, .. } => {
                assert_eq!(*failures, 0);
                assert_eq!(*max_row_sum, 0.0);
                assert!(newly_blacklisted.is_empty());
            }
            _ => {}
        }
    }
    assert_eq!(originated, delivered);
    assert!(originated > 0);
    assert!(sim.union_blacklist().is_empty());
}

#[test]
fn centralized_mode_has_one_server_spanning_all_nodes() {
    let cfg = honest_config(10, 3);
    let sim = Simulation::new(cfg).unwrap();
    assert_eq!(sim.servers().len(), 1);
    assert_eq!(sim.servers()[0].role, ServerRole::Central);
    assert_eq!(sim.servers()[0].state.members().len(), 10);
}

#[test]
fn total_drop_relay_fails_from_first_interval_and_gets_blacklisted() {
    // line 0-1-2: node 1 is the only route between 0 and 2
    let topo = Topology::from_parts(
        vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)],
        1.0,
        vec![2.0, 2.0, 2.0],
    )
    .unwrap();
    let mut cfg = SimConfig::default();
    cfg.n = 3;
    cfg.scheme = Scheme::Centralized;
    cfg.malicious_ratio = 0.0; // overridden below
    cfg.malicious_drop_prob = 1.0;
    cfg.link_failure_prob = 0.0;
    cfg.flows_per_node = 2;
    cfg.run_length = 8;
    cfg.nam_threshold = 40.0;
    cfg.seed = 5;
    let mut sim = Simulation::with_layout(cfg, topo, None).unwrap();
    sim.override_malicious([NodeId(1)].into_iter().collect());

    sim.run_interval();
    let first_failures: usize = sim
        .log()
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Decision { failures, .. } => Some(*failures),
            _ => None,
        })
        .sum();
    assert!(first_failures > 0, "the dropped traffic must surface in round 1");

    for _ in 1..8 {
        sim.run_interval();
    }
    // nothing relayed through node 1 was ever delivered
    for e in &sim.log().events {
        if let Event::Packet { outcome, path, .. } = e {
            if path.len() == 3 {
                assert_ne!(*outcome, PacketOutcome::Delivered);
            }
        }
    }
    assert!(sim.union_blacklist().contains(&NodeId(1)));
}

/// Wheel fixture: hub node 0 surrounded by a 7-node ring split into four
/// zones. The hub borders three foreign zones and relays almost everything.
fn wheel_fixture() -> (Topology, ZonePlan) {
    let mut positions = vec![(0.0, 0.0)];
    for i in 0..7 {
        let angle = 2.0 * std::f64::consts::PI * i as f64 / 7.0;
        positions.push(((angle.cos() * 1000.0).round() / 1000.0, (angle.sin() * 1000.0).round() / 1000.0));
    }
    let mut delays = vec![1.0];
    delays.extend(std::iter::repeat(5.0).take(7));
    let topo = Topology::from_parts(positions, 1.1, delays).unwrap();
    // ring edges exist between angular neighbors, spokes to the hub
    assert!(topo.are_adjacent(NodeId(0), NodeId(3)));
    assert!(topo.are_adjacent(NodeId(1), NodeId(2)));
    assert!(!topo.are_adjacent(NodeId(1), NodeId(3)));
    let assignment: Vec<ZoneId> =
        [0, 0, 1, 1, 2, 2, 3, 3].iter().map(|z| ZoneId(*z)).collect();
    let members = vec![
        vec![NodeId(0), NodeId(1)],
        vec![NodeId(2), NodeId(3)],
        vec![NodeId(4), NodeId(5)],
        vec![NodeId(6), NodeId(7)],
    ];
    let plan = ZonePlan {
        assignment,
        members,
        zms: vec![Some(NodeId(0)), Some(NodeId(2)), Some(NodeId(4)), Some(NodeId(6))],
        target_zone_size: 2,
        min_zone_size: 2,
    };
    (topo, plan)
}

#[test]
fn border_node_reports_to_every_zone_it_transacted_with() {
    let (topo, plan) = wheel_fixture();
    let mut cfg = SimConfig::default();
    cfg.n = 8;
    cfg.scheme = Scheme::Hybrid;
    cfg.malicious_ratio = 0.0;
    cfg.link_failure_prob = 0.0;
    cfg.flows_per_node = 3;
    cfg.packets_per_flow = 2;
    cfg.run_length = 1;
    cfg.seed = 11;
    let mut sim = Simulation::with_layout(cfg, topo, Some(plan)).unwrap();
    sim.run_interval();

    let hub_reports: Vec<&Event> = sim
        .log()
        .events
        .iter()
        .filter(|e| matches!(e, Event::Report { reporter, .. } if *reporter == NodeId(0)))
        .collect();
    // the hub relays ring traffic for all three foreign zones, so it files
    // its own-zone report plus one cross-zone report per adjacent zone
    assert_eq!(hub_reports.len(), 4, "hub must report to its own and 3 foreign servers");
    let mut roles: Vec<ServerRole> = hub_reports
        .iter()
        .map(|e| match e {
            Event::Report { server, .. } => *server,
            _ => unreachable!(),
        })
        .collect();
    roles.sort_by_key(|r| match r {
        ServerRole::Central => u32::MAX,
        ServerRole::Zone(z) => z.0,
    });
    assert_eq!(
        roles,
        vec![
            ServerRole::Zone(ZoneId(0)),
            ServerRole::Zone(ZoneId(1)),
            ServerRole::Zone(ZoneId(2)),
            ServerRole::Zone(ZoneId(3)),
        ]
    );
    // no fairness report targets the central server in hybrid mode
    for e in &sim.log().events {
        if let Event::Report { server, .. } = e {
            assert_ne!(*server, ServerRole::Central);
        }
    }
}

#[test]
fn hybrid_fig_layout_forms_expected_zone_count() {
    let mut cfg = SimConfig::default();
    cfg.n = 200;
    cfg.area_x = 1500.0;
    cfg.area_y = 1500.0;
    cfg.radio_range = 190.0;
    cfg.target_zone_size = 50;
    cfg.min_zone_size = 25;
    cfg.seed = 7;
    cfg.run_length = 0;
    let sim = Simulation::new(cfg).unwrap();
    let plan = sim.plan().unwrap();
    assert_eq!(plan.zone_count(), 4);
    for zone in &plan.members {
        assert!(zone.len() >= 35 && zone.len() <= 65, "zone size {}", zone.len());
    }
}

#[test]
fn zero_malicious_ratio_samples_nobody() {
    let cfg = honest_config(12, 9);
    let sim = Simulation::new(cfg).unwrap();
    assert!(sim.truth_malicious().is_empty());
}

#[test]
fn run_length_zero_is_a_valid_initialized_snapshot() {
    let mut cfg = honest_config(12, 9);
    cfg.run_length = 0;
    let log = run(cfg).unwrap();
    assert!(log.events.is_empty());
    assert!(log.header_value("n").is_some());
}

#[test]
fn identical_configs_reproduce_identical_logs() {
    let mut cfg = SimConfig::default();
    cfg.n = 60;
    cfg.area_x = 800.0;
    cfg.area_y = 800.0;
    cfg.radio_range = 180.0;
    cfg.target_zone_size = 20;
    cfg.min_zone_size = 10;
    cfg.run_length = 6;
    cfg.seed = 12;
    let a = run(cfg.clone()).unwrap();
    let b = run(cfg).unwrap();
    assert_eq!(a.serialize(), b.serialize());
}

#[test]
fn sync_fires_on_period_and_surfaces_zone_blacklists_at_the_center() {
    let mut cfg = SimConfig::default();
    cfg.n = 40;
    cfg.area_x = 650.0;
    cfg.area_y = 650.0;
    cfg.radio_range = 200.0;
    cfg.target_zone_size = 20;
    cfg.min_zone_size = 10;
    cfg.malicious_ratio = 0.1;
    cfg.malicious_drop_prob = 1.0;
    cfg.nam_threshold = 40.0;
    cfg.low_load_sync_period = 10;
    cfg.run_length = 10;
    cfg.seed = 21;
    let mut sim = Simulation::new(cfg).unwrap();

    for _ in 0..9 {
        sim.run_interval();
    }
    let caught_early = sim.union_blacklist();
    assert!(!caught_early.is_empty(), "calibration fixture should catch its droppers quickly");
    assert!(sim.cms_mirror().blacklist.is_empty(), "nothing syncs before the period");
    assert_eq!(sim.cms_mirror().last_sync_interval, 0);

    sim.run_interval();
    assert_eq!(sim.cms_mirror().last_sync_interval, 10);
    // the sync carries everything blacklisted up to and including round 10
    assert!(sim.cms_mirror().blacklist.is_superset(&caught_early));
    assert_eq!(sim.cms_mirror().blacklist, sim.union_blacklist());
    let sync_events = sim
        .log()
        .events
        .iter()
        .filter(|e| matches!(e, Event::Sync { .. }))
        .count();
    assert_eq!(sync_events, sim.plan().unwrap().zone_count());
}

#[test]
fn ledger_bookkeeping_balances_for_honest_nodes() {
    // with losses and droppers in play, honest books still balance; the
    // simulator's own accounting must satisfy the conservation identity
    let mut cfg = SimConfig::default();
    cfg.n = 30;
    cfg.area_x = 500.0;
    cfg.area_y = 500.0;
    cfg.radio_range = 160.0;
    cfg.scheme = Scheme::Centralized;
    cfg.malicious_ratio = 0.2;
    cfg.run_length = 6;
    cfg.seed = 33;
    let log = run(cfg).unwrap();
    let truth = log.truth_malicious();
    // conservation failures may only ever involve truly malicious nodes,
    // so each decision's failure count never exceeds what the adversary
    // plus the lossy channel can explain; the precise check is that an
    // honest-only run produces zero (covered elsewhere). Here: every
    // blacklisted node must be truly malicious.
    for e in &log.events {
        if let Event::Decision { newly_blacklisted, .. } = e {
            for b in newly_blacklisted {
                assert!(truth.contains(b), "honest node {b} was blacklisted");
            }
        }
    }
}

#[test]
fn blacklisted_nodes_vanish_from_later_paths() {
    let mut cfg = SimConfig::default();
    cfg.n = 30;
    cfg.area_x = 500.0;
    cfg.area_y = 500.0;
    cfg.radio_range = 160.0;
    cfg.scheme = Scheme::Centralized;
    cfg.malicious_ratio = 0.2;
    cfg.malicious_drop_prob = 1.0;
    cfg.nam_threshold = 40.0;
    cfg.run_length = 12;
    cfg.seed = 40;
    let log = run(cfg).unwrap();

    // once the notification carrying node b has reached everyone, no later
    // interval's packet may route through b
    let mut spread_complete: std::collections::BTreeMap<NodeId, f64> =
        std::collections::BTreeMap::new();
    for e in &log.events {
        if let Event::Notification { time, delay, blacklisted, .. } = e {
            for b in blacklisted {
                let entry = spread_complete.entry(*b).or_insert(0.0);
                *entry = entry.max(*time + *delay);
            }
        }
    }
    assert!(!spread_complete.is_empty());
    for e in &log.events {
        if let Event::Packet { time, path, .. } = e {
            if path.len() < 3 {
                continue;
            }
            for relay in &path[1..path.len() - 1] {
                if let Some(done) = spread_complete.get(relay) {
                    assert!(
                        time < done,
                        "packet at {time} still transits {relay}, notified by {done}"
                    );
                }
            }
        }
    }
    let truth = log.truth_malicious();
    let blacklisted: BTreeSet<NodeId> = spread_complete.keys().copied().collect();
    assert!(blacklisted.iter().all(|b| truth.contains(b)));
}
