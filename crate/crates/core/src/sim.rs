//! Discrete-event engine. Each update interval runs four phases: traffic
//! (packets route hop by hop with link failures and malicious drops, every
//! node keeping per-neighbor transaction counters), reporting (nodes
//! snapshot their ledgers and send them to their management server, border
//! nodes additionally to the servers of adjacent zones they transacted
//! with), decision (each server waits for its slowest report, runs the
//! consistency tests, applies penalties, updates credits, and refreshes its
//! blacklist), and notification (servers push per-member status messages;
//! zone servers also have border nodes relay new blacklist facts to
//! out-of-zone neighbors).
//!
//! Fairness messages retransmit per hop until delivered, so a lossy channel
//! costs transit time and bytes rather than silently erasing evidence. A
//! server's decision round completes only after all of its reports arrive
//! and are processed; blacklist entries take effect for admission once
//! their decision time has passed, and at other nodes once the notification
//! carrying them arrives. Everything is driven by one seeded generator, so
//! a config reproduces its event log byte for byte.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{MaliciousStrategy, Scheme, SimConfig};
use crate::events::{Event, EventLog, PacketOutcome, ServerRole};
use crate::mpifa::{
    notification_size_bytes, report_size_bytes, LedgerRows, PairCounters, Report, RoundReports,
    ServerState,
};
use crate::topology::{NodeId, Path, Topology, TopologyError};
use crate::zoning::{build_zones, select_central_server, select_zms, ZoneId, ZonePlan, ZoningError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Zoning(#[from] ZoningError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Per-neighbor counters a node accumulates between reports, plus the drop
/// bookkeeping a malicious node uses to doctor its snapshot.
#[derive(Debug, Clone, Copy, Default)]
struct TrueRow {
    counters: PairCounters,
    dropped_input: u64,
    dropped_origin_input: u64,
}

#[derive(Debug, Clone, Default)]
struct Ledger {
    rows: BTreeMap<NodeId, TrueRow>,
}

impl Ledger {
    fn row(&mut self, about: NodeId) -> &mut TrueRow {
        self.rows.entry(about).or_default()
    }

    /// Snapshot as reported, honestly or per the configured lie.
    fn snapshot(&self, malicious: bool, strategy: MaliciousStrategy) -> LedgerRows {
        let mut rows = LedgerRows::new();
        for (about, row) in &self.rows {
            let mut c = row.counters;
            if malicious {
                c.input -= row.dropped_input;
                c.origin_input -= row.dropped_origin_input;
                if strategy == MaliciousStrategy::MaskDropsSkimGeneration {
                    c.generated = 0;
                }
            }
            if c != PairCounters::default() {
                rows.insert(*about, c);
            }
        }
        rows
    }
}

/// One management server instance: the central server, or one zone server.
pub struct ServerUnit {
    pub role: ServerRole,
    pub host: NodeId,
    pub state: ServerState,
    /// Completion time of the previous decision round.
    last_completion: f64,
    /// When each blacklist entry became effective for admission decisions.
    effective: BTreeMap<NodeId, f64>,
    /// Blacklist entries not yet transferred to the central mirror.
    unsynced_blacklist: Vec<NodeId>,
    /// Member credit balances as of the last sync.
    synced_credits: BTreeMap<NodeId, f64>,
}

impl ServerUnit {
    /// Whether `a` was admissible at time `t`: enough credit and not
    /// blacklisted by any decision round completed by then.
    fn admits_at(&self, a: NodeId, t: f64) -> bool {
        if let Some(when) = self.effective.get(&a) {
            if *when <= t {
                return false;
            }
        }
        match self.state.credit(a) {
            Some(c) => c >= self.state.params.min_credit,
            None => false,
        }
    }
}

/// Central-server view of the network under the hybrid scheme, fed only by
/// periodic zone syncs.
#[derive(Debug, Clone, Default)]
pub struct CmsMirror {
    pub credits: BTreeMap<NodeId, f64>,
    pub blacklist: BTreeSet<NodeId>,
    pub last_sync_interval: u64,
}

/// Which neighbors one report covers.
#[derive(Debug, Clone, Copy)]
enum Coverage {
    AllNeighbors,
    Zone(ZoneId),
}

#[derive(Debug, Clone, Copy)]
struct ReportTarget {
    server: usize,
    coverage: Coverage,
}

struct TransitResult {
    delay: f64,
    bytes: u64,
    attempts: u32,
    delivered: bool,
}

#[derive(Default)]
struct IntervalBytes {
    data: u64,
    reports: u64,
    notify: u64,
    sync: u64,
}

pub struct Simulation {
    cfg: SimConfig,
    topology: Topology,
    truth: BTreeSet<NodeId>,
    plan: Option<ZonePlan>,
    servers: Vec<ServerUnit>,
    home_server: Vec<usize>,
    report_targets: Vec<Vec<ReportTarget>>,
    cms_host: NodeId,
    cms_mirror: CmsMirror,
    ledgers: Vec<Ledger>,
    /// Blacklist facts each node has received so far.
    knowledge: Vec<BTreeSet<NodeId>>,
    /// (arrival time, node, facts) waiting to enter `knowledge`.
    pending_facts: Vec<(f64, NodeId, Vec<NodeId>)>,
    route_cache: HashMap<(Vec<NodeId>, NodeId), Vec<Option<Path>>>,
    rng: ChaCha8Rng,
    interval: u64,
    log: EventLog,
}

impl Simulation {
    /// Generates the topology, samples the malicious set, builds the
    /// management layer, and initializes every server with fresh credit and
    /// an empty suspicion matrix.
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate().map_err(|e| SimError::Config(e.to_string()))?;
        let topology = Topology::generate(
            cfg.n,
            (cfg.area_x, cfg.area_y),
            cfg.radio_range,
            (cfg.delay_index_min, cfg.delay_index_max),
            cfg.seed,
        )?;
        let plan = match cfg.scheme {
            Scheme::Centralized => None,
            Scheme::Hybrid => {
                let target = cfg.target_zone_size.min(cfg.n).max(2);
                let min = cfg.min_zone_size.min(target).max(2);
                let plan = build_zones(&topology, target, min)?;
                Some(select_zms(&topology, &plan)?)
            }
        };
        Self::assemble(cfg, topology, plan)
    }

    /// Builds a simulation over a prepared topology and, for the hybrid
    /// scheme, a prepared zone plan with its servers already selected.
    /// Useful for scripted scenarios and inspection tooling.
    pub fn with_layout(
        cfg: SimConfig,
        topology: Topology,
        plan: Option<ZonePlan>,
    ) -> Result<Self, SimError> {
        cfg.validate().map_err(|e| SimError::Config(e.to_string()))?;
        if topology.node_count() != cfg.n {
            return Err(SimError::Config("topology size disagrees with config n".into()));
        }
        match (cfg.scheme, &plan) {
            (Scheme::Centralized, None) => {}
            (Scheme::Hybrid, Some(p)) if p.zms.iter().all(|z| z.is_some()) => {}
            _ => return Err(SimError::Config("scheme and zone plan disagree".into())),
        }
        Self::assemble(cfg, topology, plan)
    }

    fn assemble(
        cfg: SimConfig,
        topology: Topology,
        plan: Option<ZonePlan>,
    ) -> Result<Self, SimError> {
        let n = cfg.n;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(0xF41);

        // malicious set: seeded partial Fisher-Yates draw
        let malicious_count = (cfg.malicious_ratio * n as f64).floor() as usize;
        let mut ids: Vec<u32> = (0..n as u32).collect();
        for i in 0..malicious_count.min(n) {
            let j = rng.gen_range(i..n);
            ids.swap(i, j);
        }
        let truth: BTreeSet<NodeId> = ids[..malicious_count].iter().map(|i| NodeId(*i)).collect();

        let cms_host = select_central_server(&topology);
        let params = cfg.mpifa_params();

        let mut servers = Vec::new();
        let mut home_server = vec![0usize; n];
        let mut report_targets: Vec<Vec<ReportTarget>> = vec![Vec::new(); n];

        match &plan {
            None => {
                let members: BTreeSet<NodeId> = topology.nodes().collect();
                let mut pairs = Vec::new();
                for a in topology.nodes() {
                    for &b in topology.neighbors(a).expect("node exists") {
                        if a < b {
                            pairs.push((a, b));
                        }
                    }
                }
                let state = ServerState::new(params, members.clone(), pairs);
                servers.push(ServerUnit {
                    role: ServerRole::Central,
                    host: cms_host,
                    state,
                    last_completion: 0.0,
                    effective: BTreeMap::new(),
                    unsynced_blacklist: Vec::new(),
                    synced_credits: BTreeMap::new(),
                });
                for v in topology.nodes() {
                    report_targets[v.index()] =
                        vec![ReportTarget { server: 0, coverage: Coverage::AllNeighbors }];
                }
            }
            Some(plan) => {
                for (zi, members) in plan.members.iter().enumerate() {
                    let zone = ZoneId(zi as u32);
                    let member_set: BTreeSet<NodeId> = members.iter().copied().collect();
                    // every adjacent pair with at least one endpoint in this
                    // zone: the server holds both sides of each
                    let mut pairs = Vec::new();
                    for &m in members {
                        for &b in topology.neighbors(m).expect("member exists") {
                            pairs.push((m, b));
                        }
                    }
                    let state = ServerState::new(params, member_set, pairs);
                    let host = plan.zms[zi].expect("zms selected");
                    servers.push(ServerUnit {
                        role: ServerRole::Zone(zone),
                        host,
                        state,
                        last_completion: 0.0,
                        effective: BTreeMap::new(),
                        unsynced_blacklist: Vec::new(),
                        synced_credits: BTreeMap::new(),
                    });
                    for &m in members {
                        home_server[m.index()] = zi;
                    }
                }
                // own-zone report covers the full ledger; each adjacent zone
                // a node borders gets a report covering that zone's neighbors.
                // Border nodes learned those server locations during the
                // initial exchange, modeled statically here.
                for v in topology.nodes() {
                    let own = home_server[v.index()];
                    let mut targets =
                        vec![ReportTarget { server: own, coverage: Coverage::AllNeighbors }];
                    let mut foreign: BTreeSet<usize> = BTreeSet::new();
                    for &nb in topology.neighbors(v).expect("node exists") {
                        let z = home_server[nb.index()];
                        if z != own {
                            foreign.insert(z);
                        }
                    }
                    for z in foreign {
                        targets.push(ReportTarget {
                            server: z,
                            coverage: Coverage::Zone(ZoneId(z as u32)),
                        });
                    }
                    report_targets[v.index()] = targets;
                }
            }
        }

        let log = EventLog::for_run(&cfg, &truth);
        Ok(Self {
            cfg,
            topology,
            truth,
            plan,
            servers,
            home_server,
            report_targets,
            cms_host,
            cms_mirror: CmsMirror::default(),
            ledgers: vec![Ledger::default(); n],
            knowledge: vec![BTreeSet::new(); n],
            pending_facts: Vec::new(),
            route_cache: HashMap::new(),
            rng,
            interval: 0,
            log,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn plan(&self) -> Option<&ZonePlan> {
        self.plan.as_ref()
    }

    pub fn truth_malicious(&self) -> &BTreeSet<NodeId> {
        &self.truth
    }

    /// Replaces the sampled malicious set; only callable before the first
    /// interval so the log header stays truthful. For scripted scenarios.
    pub fn override_malicious(&mut self, truth: BTreeSet<NodeId>) {
        assert_eq!(self.interval, 0, "malicious set is fixed once the run starts");
        self.truth = truth;
        self.log = EventLog::for_run(&self.cfg, &self.truth);
    }

    pub fn servers(&self) -> &[ServerUnit] {
        &self.servers
    }

    pub fn cms_host(&self) -> NodeId {
        self.cms_host
    }

    pub fn cms_mirror(&self) -> &CmsMirror {
        &self.cms_mirror
    }

    pub fn completed_intervals(&self) -> u64 {
        self.interval
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    /// Union of all server blacklists.
    pub fn union_blacklist(&self) -> BTreeSet<NodeId> {
        let mut all = BTreeSet::new();
        for s in &self.servers {
            all.extend(s.state.blacklist().iter().copied());
        }
        all
    }

    fn route(&mut self, src: NodeId, dst: NodeId, excluded: &BTreeSet<NodeId>) -> Option<Path> {
        if excluded.contains(&dst) || excluded.contains(&src) {
            // rare: the destination itself is on the exclusion list (say, a
            // blacklisted server host); route around everything else
            return self
                .topology
                .shortest_path_filtered(src, dst, |v| !excluded.contains(&v));
        }
        let key = (excluded.iter().copied().collect::<Vec<_>>(), src);
        if !self.route_cache.contains_key(&key) {
            let paths = self
                .topology
                .shortest_paths_from(src, |v| !excluded.contains(&v));
            self.route_cache.insert(key.clone(), paths);
        }
        self.route_cache[&key][dst.index()].clone()
    }

    /// Walks a fairness message along `path`, retransmitting failed hops
    /// until delivered or the attempt budget runs out. Time accrues per node
    /// entered; bytes accrue per link crossed.
    fn transit_reliable(&mut self, path: &Path, size: u64) -> TransitResult {
        if path.hops() == 0 {
            return TransitResult { delay: 0.0, bytes: 0, attempts: 1, delivered: true };
        }
        let mut delay = 0.0;
        let mut bytes = 0u64;
        for attempt in 1..=self.cfg.max_transmission_attempts {
            let mut failed = false;
            for hop in 1..path.nodes.len() {
                bytes += size;
                if self.rng.gen_bool(self.cfg.link_failure_prob) {
                    failed = true;
                    break;
                }
                delay += self.topology.delay_index(path.nodes[hop]);
            }
            if !failed {
                return TransitResult { delay, bytes, attempts: attempt, delivered: true };
            }
        }
        TransitResult {
            delay,
            bytes,
            attempts: self.cfg.max_transmission_attempts,
            delivered: false,
        }
    }

    /// Runs one update interval: traffic, reports, server decisions, and
    /// notifications, plus the periodic zone-to-central sync.
    pub fn run_interval(&mut self) {
        let k = self.interval + 1;
        let t = self.cfg.update_interval;
        let phase_start = (k - 1) as f64 * t;
        let report_time = k as f64 * t;
        let mut bytes = IntervalBytes::default();

        // facts whose notifications arrived before this interval started
        self.pending_facts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut remaining = Vec::new();
        for (when, node, facts) in std::mem::take(&mut self.pending_facts) {
            if when <= phase_start {
                self.knowledge[node.index()].extend(facts);
            } else {
                remaining.push((when, node, facts));
            }
        }
        self.pending_facts = remaining;

        self.traffic_phase(k, phase_start, &mut bytes);
        let inboxes = self.report_phase(k, report_time, &mut bytes);
        self.decision_phase(k, report_time, inboxes, &mut bytes);
        if self.cfg.scheme == Scheme::Hybrid && k % self.cfg.low_load_sync_period == 0 {
            self.sync_zms_to_cms(k, &mut bytes);
        }

        self.log.push(Event::IntervalSummary {
            time: report_time,
            interval: k,
            data_bytes: bytes.data,
            report_bytes: bytes.reports,
            notify_bytes: bytes.notify,
            sync_bytes: bytes.sync,
        });
        self.interval = k;
    }

    fn traffic_phase(&mut self, k: u64, now: f64, bytes: &mut IntervalBytes) {
        // admission is evaluated against each node's server as of the start
        // of the interval
        let admissible: Vec<NodeId> = self
            .topology
            .nodes()
            .filter(|v| self.servers[self.home_server[v.index()]].admits_at(*v, now))
            .collect();
        if admissible.len() < 2 {
            return;
        }
        let admissible_set: BTreeSet<NodeId> = admissible.iter().copied().collect();

        for src in self.topology.nodes() {
            if !admissible_set.contains(&src) {
                continue;
            }
            for _ in 0..self.cfg.flows_per_node {
                let dst = loop {
                    let pick = admissible[self.rng.gen_range(0..admissible.len())];
                    if pick != src {
                        break pick;
                    }
                };
                for _ in 0..self.cfg.packets_per_flow {
                    self.send_packet(k, now, src, dst, bytes);
                }
            }
        }
    }

    fn send_packet(&mut self, k: u64, now: f64, src: NodeId, dst: NodeId, bytes: &mut IntervalBytes) {
        let exclusions = self.knowledge[src.index()].clone();
        let path = match self.route(src, dst, &exclusions) {
            Some(p) => p,
            None => {
                self.log.push(Event::Packet {
                    time: now,
                    interval: k,
                    src,
                    dst,
                    bytes: 0,
                    outcome: PacketOutcome::NoRoute,
                    path: vec![],
                });
                return;
            }
        };
        let size = self.cfg.packet_size_bytes;
        bytes.data += size;
        let mut outcome = PacketOutcome::Delivered;
        for hop in 1..path.nodes.len() {
            let from = path.nodes[hop - 1];
            let to = path.nodes[hop];
            // a relay that has heard the blacklist refuses to touch traffic
            // for or through a blacklisted node; the policy drop terminates
            // the packet in its books so its own ledger stays balanced
            if from != src {
                let known = &self.knowledge[from.index()];
                if known.contains(&src) || known.contains(&dst) || known.contains(&to) {
                    let came_from = path.nodes[hop - 2];
                    self.ledgers[from.index()].row(came_from).counters.terminated += 1;
                    outcome = PacketOutcome::Refused(from);
                    break;
                }
            }
            let sender = self.ledgers[from.index()].row(to);
            sender.counters.output += 1;
            if from == src {
                sender.counters.generated += 1;
            }
            if self.rng.gen_bool(self.cfg.link_failure_prob) {
                outcome = PacketOutcome::DroppedLink(to);
                break;
            }
            let receiver = self.ledgers[to.index()].row(from);
            receiver.counters.input += 1;
            if from == src {
                receiver.counters.origin_input += 1;
            }
            if to == dst {
                receiver.counters.terminated += 1;
            } else if self.truth.contains(&to) && self.rng.gen_bool(self.cfg.malicious_drop_prob) {
                let row = self.ledgers[to.index()].row(from);
                row.dropped_input += 1;
                if from == src {
                    row.dropped_origin_input += 1;
                }
                outcome = PacketOutcome::DroppedMalicious(to);
                break;
            }
        }
        self.log.push(Event::Packet {
            time: now,
            interval: k,
            src,
            dst,
            bytes: size,
            outcome,
            path: path.nodes,
        });
    }

    /// Snapshot and ship every node's ledger; returns each server's inbox
    /// of (reports, latest arrival delay) for this round.
    fn report_phase(
        &mut self,
        k: u64,
        sent_at: f64,
        bytes: &mut IntervalBytes,
    ) -> Vec<(RoundReports, f64)> {
        let mut inboxes: Vec<(RoundReports, f64)> =
            (0..self.servers.len()).map(|_| (RoundReports::new(), 0.0)).collect();

        for reporter in self.topology.nodes() {
            // a node that has been told it is blacklisted goes silent
            if self.knowledge[reporter.index()].contains(&reporter) {
                self.ledgers[reporter.index()] = Ledger::default();
                continue;
            }
            let malicious = self.truth.contains(&reporter);
            let rows = self.ledgers[reporter.index()]
                .snapshot(malicious, self.cfg.malicious_strategy);
            self.ledgers[reporter.index()] = Ledger::default();

            for target in self.report_targets[reporter.index()].clone() {
                let covered: LedgerRows = match target.coverage {
                    Coverage::AllNeighbors => rows.clone(),
                    Coverage::Zone(z) => rows
                        .iter()
                        .filter(|(about, _)| {
                            self.home_server[about.index()] == z.index()
                        })
                        .map(|(a, c)| (*a, *c))
                        .collect(),
                };
                // cross-zone reports exist only when there was traffic to tell
                if matches!(target.coverage, Coverage::Zone(_)) && covered.is_empty() {
                    continue;
                }
                let host = self.servers[target.server].host;
                let entries = covered.len();
                let size = report_size_bytes(
                    self.cfg.header_bytes,
                    self.cfg.report_per_neighbor_bytes,
                    entries,
                );
                let exclusions = self.knowledge[reporter.index()].clone();
                let path = match self.route(reporter, host, &exclusions) {
                    Some(p) => p,
                    None => continue,
                };
                let transit = self.transit_reliable(&path, size);
                bytes.reports += transit.bytes;
                if !transit.delivered {
                    continue;
                }
                let report = Report {
                    reporter,
                    sequence: k,
                    rows: covered,
                    size_bytes: size,
                };
                let (inbox, max_delay) = &mut inboxes[target.server];
                inbox.insert(report.reporter, report.rows);
                *max_delay = max_delay.max(transit.delay);
                self.log.push(Event::Report {
                    time: sent_at,
                    interval: k,
                    reporter,
                    server: self.servers[target.server].role,
                    server_host: host,
                    entries,
                    hops: path.hops(),
                    attempts: transit.attempts,
                    delay: transit.delay,
                    bytes: transit.bytes,
                });
            }
        }
        inboxes
    }

    fn decision_phase(
        &mut self,
        k: u64,
        sent_at: f64,
        inboxes: Vec<(RoundReports, f64)>,
        bytes: &mut IntervalBytes,
    ) {
        for (si, (inbox, max_delay)) in inboxes.into_iter().enumerate() {
            let report_count = inbox.reporters().count();
            let ready = sent_at + max_delay;
            let completion = self.servers[si].last_completion.max(ready)
                + self.cfg.server_processing_per_report * report_count as f64;
            self.servers[si].last_completion = completion;

            let failures = self.servers[si].state.verify_reports(&inbox);
            self.servers[si].state.apply_penalties(&failures);
            self.servers[si].state.update_credits(&inbox);
            let newly = self.servers[si].state.refresh_blacklist();
            for b in &newly {
                self.servers[si].effective.insert(*b, completion);
                self.servers[si].unsynced_blacklist.push(*b);
            }
            let max_row = self.servers[si].state.max_row_sum();
            self.log.push(Event::Decision {
                time: completion,
                round: k,
                server: self.servers[si].role,
                server_host: self.servers[si].host,
                reports: report_count,
                failures: failures.len(),
                max_row_sum: max_row,
                newly_blacklisted: newly.clone(),
            });

            self.notify_members(k, si, completion, &newly, bytes);
        }
    }

    /// Per-member status message listing every member's standing; border
    /// nodes relay fresh blacklist facts one hop into adjacent zones.
    fn notify_members(
        &mut self,
        k: u64,
        si: usize,
        completion: f64,
        newly: &[NodeId],
        bytes: &mut IntervalBytes,
    ) {
        let members: Vec<NodeId> = self.servers[si].state.members().iter().copied().collect();
        let listed = members.len();
        let size = notification_size_bytes(self.cfg.header_bytes, self.cfg.notify_per_listed_bytes, listed);
        let host = self.servers[si].host;
        let blacklist_snapshot: Vec<NodeId> =
            self.servers[si].state.blacklist().iter().copied().collect();
        let server_exclusions: BTreeSet<NodeId> = blacklist_snapshot.iter().copied().collect();

        for member in members {
            let path = match self.route(host, member, &server_exclusions) {
                Some(p) => p,
                None => continue,
            };
            let transit = self.transit_reliable(&path, size);
            bytes.notify += transit.bytes;
            if !transit.delivered {
                continue;
            }
            let arrival = completion + transit.delay;
            self.pending_facts.push((arrival, member, blacklist_snapshot.clone()));
            self.log.push(Event::Notification {
                time: completion,
                round: k,
                server: self.servers[si].role,
                member,
                listed,
                bytes: transit.bytes,
                delay: transit.delay,
                blacklisted: newly.to_vec(),
            });

            // border relay of fresh facts, one hop out of the zone
            if self.cfg.scheme == Scheme::Hybrid && !newly.is_empty() {
                let own = self.home_server[member.index()];
                let outsiders: Vec<NodeId> = self
                    .topology
                    .neighbors(member)
                    .expect("member exists")
                    .iter()
                    .copied()
                    .filter(|nb| self.home_server[nb.index()] != own)
                    .collect();
                for out in outsiders {
                    let fwd_size = notification_size_bytes(
                        self.cfg.header_bytes,
                        self.cfg.notify_per_listed_bytes,
                        newly.len(),
                    );
                    let hop_path = Path {
                        nodes: vec![member, out],
                        total_cost: self.topology.delay_index(out),
                    };
                    let fwd = self.transit_reliable(&hop_path, fwd_size);
                    bytes.notify += fwd.bytes;
                    if !fwd.delivered {
                        continue;
                    }
                    let fwd_arrival = arrival + fwd.delay;
                    self.pending_facts.push((fwd_arrival, out, newly.to_vec()));
                    self.log.push(Event::BorderForward {
                        time: fwd_arrival,
                        round: k,
                        from: member,
                        to: out,
                        entries: newly.len(),
                        bytes: fwd.bytes,
                    });
                }
            }
        }
    }

    /// Transfers accumulated credit deltas and blacklist additions from each
    /// zone server to the central mirror.
    fn sync_zms_to_cms(&mut self, k: u64, bytes: &mut IntervalBytes) {
        let now = k as f64 * self.cfg.update_interval;
        for si in 0..self.servers.len() {
            let host = self.servers[si].host;
            let zone = match self.servers[si].role {
                ServerRole::Zone(z) => z,
                ServerRole::Central => continue,
            };
            let mut changed: Vec<(NodeId, f64)> = Vec::new();
            for m in self.servers[si].state.members().iter() {
                let current = self.servers[si].state.credit(*m).unwrap_or(0.0);
                if self.servers[si].synced_credits.get(m) != Some(&current) {
                    changed.push((*m, current));
                }
            }
            let additions = std::mem::take(&mut self.servers[si].unsynced_blacklist);
            let entries = changed.len() + additions.len();
            let size = notification_size_bytes(
                self.cfg.header_bytes,
                self.cfg.notify_per_listed_bytes,
                entries,
            );
            let exclusions: BTreeSet<NodeId> =
                self.servers[si].state.blacklist().iter().copied().collect();
            let path = match self.route(host, self.cms_host, &exclusions) {
                Some(p) => p,
                None => continue,
            };
            let transit = self.transit_reliable(&path, size);
            bytes.sync += transit.bytes;
            if !transit.delivered {
                self.servers[si].unsynced_blacklist = additions;
                continue;
            }
            for (m, c) in &changed {
                self.servers[si].synced_credits.insert(*m, *c);
                self.cms_mirror.credits.insert(*m, *c);
            }
            self.cms_mirror.blacklist.extend(additions.iter().copied());
            self.cms_mirror.last_sync_interval = k;
            self.log.push(Event::Sync {
                time: now,
                interval: k,
                zone,
                cms_host: self.cms_host,
                entries,
                bytes: transit.bytes,
                delay: transit.delay,
            });
        }
    }
}

/// Initializes and runs a full simulation, returning its event log.
pub fn run(cfg: SimConfig) -> Result<EventLog, SimError> {
    let mut sim = Simulation::new(cfg)?;
    for _ in 0..sim.cfg.run_length {
        sim.run_interval();
    }
    Ok(sim.into_log())
}
