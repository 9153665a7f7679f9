//! The incentive-based fairness algorithm: per-neighbor transaction
//! counters, the three consistency tests a management server runs over each
//! reporting round, the suspicion (NAM) matrix with penalty and decay, the
//! credit database, and threshold blacklisting.
//!
//! A server accumulates one suspicion row per node. A failed pairwise test
//! adds a flat penalty to both nodes of the pair since the server cannot
//! tell which of the two manipulated its report. A node whose own ledger is
//! internally inconsistent is penalized against itself, so that suspicion
//! lands on the liar alone. Whenever a node is penalized, suspicion that
//! other nodes accumulated against it in earlier rounds is divided by a
//! decay factor; the accusations of the current round are left intact.

use std::collections::{BTreeMap, BTreeSet};

use crate::topology::NodeId;

/// Per-neighbor transaction counters kept by each node between reports.
///
/// For a node `a` and neighbor `b`: `input` packets a received from b,
/// `output` packets a transmitted to b, `generated` the subset of output
/// that a originated itself, `terminated` the subset of input addressed to
/// a, and `origin_input` the subset of input that b originated itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCounters {
    pub input: u64,
    pub output: u64,
    pub generated: u64,
    pub terminated: u64,
    pub origin_input: u64,
}

/// One node's counters toward every neighbor it transacted with.
pub type LedgerRows = BTreeMap<NodeId, PairCounters>;

/// Algorithm parameters. The calibrated operating point ships in the
/// default config file; fixtures construct these explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpifaParams {
    /// Flat suspicion penalty added to both nodes of a failed pair.
    pub penalty_x: f64,
    /// Divisor applied to previously accumulated suspicion of a penalized
    /// node; must be greater than one.
    pub decay_y: f64,
    /// A node whose suspicion row sum exceeds this is blacklisted.
    pub nam_threshold: f64,
    /// Credit earned per packet forwarded.
    pub forward_reward: f64,
    /// Credit charged per packet generated.
    pub generation_cost: f64,
    /// Minimum balance required to generate or terminate traffic.
    pub min_credit: f64,
    /// Balance granted to every node at initialization.
    pub initial_credit: f64,
}

impl MpifaParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.penalty_x <= 0.0 {
            return Err("penalty must be positive".into());
        }
        if self.decay_y <= 1.0 {
            return Err("decay factor must exceed one".into());
        }
        if self.forward_reward <= 0.0 || self.generation_cost <= 0.0 {
            return Err("reward and generation cost must be positive".into());
        }
        if self.nam_threshold <= 0.0 {
            return Err("blacklist threshold must be positive".into());
        }
        Ok(())
    }
}

/// Which consistency check a pair failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FairnessTest {
    /// Output count toward a neighbor disagrees with the neighbor's input.
    OutputMatch,
    /// Self-generated count disagrees with the neighbor's origin-tagged input.
    OriginMatch,
    /// A node's own ledger does not balance inputs against outputs.
    Conservation,
    /// An expected report never arrived; all the node's pair tests count as failed.
    MissingReport,
}

/// A failed test for an unordered node pair. Conservation failures use the
/// self-pair `(a, a)`.
pub type Failure = ((NodeId, NodeId), FairnessTest);

/// One node's fairness report for one update interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub reporter: NodeId,
    pub sequence: u64,
    pub rows: LedgerRows,
    pub size_bytes: u64,
}

/// The report set a server received for one round, deduplicated by reporter.
#[derive(Debug, Clone, Default)]
pub struct RoundReports {
    rows: BTreeMap<NodeId, LedgerRows>,
}

impl RoundReports {
    pub fn new() -> Self {
        Self::default()
    }

    /// Merges a report in; rows from multiple reports by the same reporter
    /// (a border node reporting to several servers never does this, but a
    /// caller may assemble partial views) are unioned.
    pub fn insert(&mut self, reporter: NodeId, rows: LedgerRows) {
        self.rows.entry(reporter).or_default().extend(rows);
    }

    pub fn contains(&self, reporter: NodeId) -> bool {
        self.rows.contains_key(&reporter)
    }

    pub fn rows_of(&self, reporter: NodeId) -> Option<&LedgerRows> {
        self.rows.get(&reporter)
    }

    pub fn reporters(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.rows.keys().copied()
    }

    fn counters(&self, reporter: NodeId, about: NodeId) -> PairCounters {
        self.rows
            .get(&reporter)
            .and_then(|r| r.get(&about))
            .copied()
            .unwrap_or_default()
    }
}

/// Forwarded-packet total from a report: outputs minus self-generated.
pub fn forwarded_total(rows: &LedgerRows) -> i64 {
    let out: i64 = rows.values().map(|c| c.output as i64).sum();
    let gen: i64 = rows.values().map(|c| c.generated as i64).sum();
    out - gen
}

/// Generated-packet total from a report.
pub fn generated_total(rows: &LedgerRows) -> u64 {
    rows.values().map(|c| c.generated).sum()
}

/// Fairness state owned by one management server (central or per-zone).
#[derive(Debug, Clone)]
pub struct ServerState {
    pub params: MpifaParams,
    /// Nodes this server manages: it expects their reports, evaluates their
    /// ledger balance, and keeps their credit accounts.
    members: BTreeSet<NodeId>,
    /// Adjacent pairs this server has both sides of; at least one endpoint
    /// is a member, the other may be a border node of a neighboring zone.
    watched_pairs: Vec<(NodeId, NodeId)>,
    /// Suspicion matrix stored by column: nam[col][row].
    nam: BTreeMap<NodeId, BTreeMap<NodeId, f64>>,
    credits: BTreeMap<NodeId, f64>,
    blacklist: BTreeSet<NodeId>,
}

impl ServerState {
    pub fn new(
        params: MpifaParams,
        members: BTreeSet<NodeId>,
        mut watched_pairs: Vec<(NodeId, NodeId)>,
    ) -> Self {
        for pair in &mut watched_pairs {
            if pair.0 > pair.1 {
                *pair = (pair.1, pair.0);
            }
        }
        watched_pairs.sort_unstable();
        watched_pairs.dedup();
        let credits = members.iter().map(|m| (*m, params.initial_credit)).collect();
        Self {
            params,
            members,
            watched_pairs,
            nam: BTreeMap::new(),
            credits,
            blacklist: BTreeSet::new(),
        }
    }

    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.members
    }

    pub fn blacklist(&self) -> &BTreeSet<NodeId> {
        &self.blacklist
    }

    pub fn credit(&self, a: NodeId) -> Option<f64> {
        self.credits.get(&a).copied()
    }

    pub fn nam_entry(&self, row: NodeId, col: NodeId) -> f64 {
        self.nam.get(&col).and_then(|c| c.get(&row)).copied().unwrap_or(0.0)
    }

    /// Sum of a node's suspicion row.
    pub fn nam_row_sum(&self, row: NodeId) -> f64 {
        self.nam
            .values()
            .filter_map(|col| col.get(&row))
            .sum()
    }

    /// Largest suspicion row sum currently held, zero when the matrix is empty.
    pub fn max_row_sum(&self) -> f64 {
        let mut sums: BTreeMap<NodeId, f64> = BTreeMap::new();
        for col in self.nam.values() {
            for (row, v) in col {
                *sums.entry(*row).or_insert(0.0) += *v;
            }
        }
        sums.values().fold(0.0, |acc, v| acc.max(*v))
    }

    fn is_watched(&self, a: NodeId) -> bool {
        !self.blacklist.contains(&a)
    }

    /// Runs the three consistency tests over one round of reports and
    /// returns every failure. A member whose report is missing fails all of
    /// its watched pairs. Pairs involving blacklisted nodes are no longer
    /// evaluated.
    pub fn verify_reports(&self, reports: &RoundReports) -> Vec<Failure> {
        let mut failures = Vec::new();
        for &(a, b) in &self.watched_pairs {
            if !self.is_watched(a) || !self.is_watched(b) {
                continue;
            }
            let a_missing = self.members.contains(&a) && !reports.contains(a);
            let b_missing = self.members.contains(&b) && !reports.contains(b);
            if a_missing || b_missing {
                failures.push(((a, b), FairnessTest::MissingReport));
                continue;
            }
            let ab = reports.counters(a, b);
            let ba = reports.counters(b, a);
            if ab.output != ba.input || ba.output != ab.input {
                failures.push(((a, b), FairnessTest::OutputMatch));
            }
            if ab.generated != ba.origin_input || ba.generated != ab.origin_input {
                failures.push(((a, b), FairnessTest::OriginMatch));
            }
        }
        for &m in &self.members {
            if !self.is_watched(m) {
                continue;
            }
            if let Some(rows) = reports.rows_of(m) {
                let input: i64 = rows.values().map(|c| c.input as i64).sum();
                let term: i64 = rows.values().map(|c| c.terminated as i64).sum();
                if input - term != forwarded_total(rows) {
                    failures.push(((m, m), FairnessTest::Conservation));
                }
            }
        }
        failures
    }

    /// Books one round of failures: suspicion accumulated in earlier rounds
    /// toward each penalized node is divided by the decay factor (once per
    /// node per round, diagonal excluded), then the flat penalty lands on
    /// both nodes of every failed pair. Fresh penalties are never damped by
    /// their own round's decay; a pair failing round after round converges
    /// on a bounded suspicion level, while a node whose own books keep
    /// failing accumulates without bound on its diagonal.
    pub fn apply_penalties(&mut self, failures: &[Failure]) {
        let penalized: BTreeSet<NodeId> =
            failures.iter().flat_map(|((a, b), _)| [*a, *b]).collect();
        let y = self.params.decay_y;
        for p in &penalized {
            if let Some(col) = self.nam.get_mut(p) {
                for (row, v) in col.iter_mut() {
                    if row != p {
                        *v /= y;
                    }
                }
            }
        }
        let x = self.params.penalty_x;
        for &((a, b), _) in failures {
            *self.nam.entry(b).or_default().entry(a).or_insert(0.0) += x;
            *self.nam.entry(a).or_default().entry(b).or_insert(0.0) += x;
        }
    }

    /// Credits forwarding and charges generation for every member that
    /// reported this round.
    pub fn update_credits(&mut self, reports: &RoundReports) {
        for &m in &self.members {
            if self.blacklist.contains(&m) {
                continue;
            }
            if let Some(rows) = reports.rows_of(m) {
                let delta = forwarded_total(rows) as f64 * self.params.forward_reward
                    - generated_total(rows) as f64 * self.params.generation_cost;
                *self.credits.entry(m).or_insert(self.params.initial_credit) += delta;
            }
        }
    }

    /// Permanently blacklists every node whose suspicion row sum exceeds the
    /// threshold; returns the nodes added by this call. Suspicion toward
    /// partners that are already blacklisted is left out of the sum: those
    /// accusations are explained by the confirmed offender, and counting
    /// them would punish its victims a second time.
    pub fn refresh_blacklist(&mut self) -> Vec<NodeId> {
        let mut sums: BTreeMap<NodeId, f64> = BTreeMap::new();
        for (col_node, col) in &self.nam {
            if self.blacklist.contains(col_node) {
                continue;
            }
            for (row, v) in col {
                *sums.entry(*row).or_insert(0.0) += *v;
            }
        }
        let mut newly = Vec::new();
        for (node, sum) in sums {
            if sum > self.params.nam_threshold && self.blacklist.insert(node) {
                newly.push(node);
            }
        }
        newly
    }

    /// Whether a node may generate or terminate traffic: not blacklisted and
    /// holding at least the minimum credit. Nodes without an account are
    /// refused.
    pub fn admit_traffic(&self, a: NodeId) -> bool {
        if self.blacklist.contains(&a) {
            return false;
        }
        match self.credits.get(&a) {
            Some(c) => *c >= self.params.min_credit,
            None => false,
        }
    }
}

/// Wire size of a fairness report with the given number of neighbor entries.
pub fn report_size_bytes(header_bytes: u64, per_neighbor_bytes: u64, entries: usize) -> u64 {
    header_bytes + per_neighbor_bytes * entries as u64
}

/// Wire size of a server-to-node notification listing `listed` nodes.
pub fn notification_size_bytes(header_bytes: u64, per_listed_bytes: u64, listed: usize) -> u64 {
    header_bytes + per_listed_bytes * listed as u64
}
