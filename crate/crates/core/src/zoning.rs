//! Virtual zone construction and zone management server (ZMS) selection.
//!
//! Zones are grown one at a time from border regions inward: each zone is
//! seeded at the available node with the fewest neighbors, expanded
//! breadth-first with every tier sorted by ascending neighbor count, and
//! capped at a target size. Undersized zones are dissolved and their nodes
//! absorbed by neighboring zones. The ZMS of a zone is the member with the
//! smallest sum of shortest-delay-path costs from all other members.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::topology::{NodeId, Topology, TopologyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZoneId(pub u32);

impl ZoneId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum ZoningError {
    #[error("invalid zone sizes: min {min}, target {target}, nodes {nodes}")]
    InvalidSizes { min: usize, target: usize, nodes: usize },
    #[error("topology is not connected")]
    NonConnectedTopology,
    #[error("candidate {0} is not a zone member")]
    CandidateNotMember(NodeId),
    #[error("no feasible ZMS host in zone {0}")]
    NoFeasibleHost(ZoneId),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Node-to-zone assignment with per-zone member lists in stage order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZonePlan {
    pub assignment: Vec<ZoneId>,
    pub members: Vec<Vec<NodeId>>,
    pub zms: Vec<Option<NodeId>>,
    pub target_zone_size: usize,
    pub min_zone_size: usize,
}

impl ZonePlan {
    pub fn zone_count(&self) -> usize {
        self.members.len()
    }

    pub fn zone_of(&self, a: NodeId) -> ZoneId {
        self.assignment[a.index()]
    }

    pub fn zms_of(&self, z: ZoneId) -> Option<NodeId> {
        self.zms[z.index()]
    }

    /// Text export: one `node zone` line per node, then one
    /// `zone <id> zms <node>` line per zone.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        for (i, z) in self.assignment.iter().enumerate() {
            out.push_str(&format!("{} {}\n", i, z));
        }
        for (i, zms) in self.zms.iter().enumerate() {
            match zms {
                Some(host) => out.push_str(&format!("zone {} zms {}\n", i, host)),
                None => out.push_str(&format!("zone {} zms -\n", i)),
            }
        }
        out
    }
}

/// Suitability of a node to host a zone's management server: the sum of
/// shortest-delay-path costs from every other member to the candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct ZmsIndex {
    pub candidate: NodeId,
    pub value: f64,
}

/// Grows zones over the whole topology (stages 1-5), dissolves undersized
/// zones (stage 6), and attaches the released nodes to neighboring zones
/// (stage 7). The returned plan has no ZMS assigned yet.
pub fn build_zones(
    t: &Topology,
    target_zone_size: usize,
    min_zone_size: usize,
) -> Result<ZonePlan, ZoningError> {
    let n = t.node_count();
    if !(2 <= min_zone_size && min_zone_size <= target_zone_size && target_zone_size <= n) {
        return Err(ZoningError::InvalidSizes { min: min_zone_size, target: target_zone_size, nodes: n });
    }
    if !t.is_connected() {
        return Err(ZoningError::NonConnectedTopology);
    }

    let deg = |v: NodeId| t.degree(v);
    let mut available: BTreeSet<NodeId> = t.nodes().collect();
    let mut zones: Vec<Vec<NodeId>> = Vec::new();

    while !available.is_empty() {
        // stage 1: seed at the available node with fewest neighbors
        let seed = *available
            .iter()
            .min_by_key(|v| (deg(**v), **v))
            .expect("available is non-empty");
        available.remove(&seed);
        let mut zone = vec![seed];

        // stage 2: pull in the seed's available neighbors, watching the limit
        let first_tier: Vec<NodeId> = t
            .neighbors(seed)
            .expect("seed exists")
            .iter()
            .copied()
            .filter(|v| available.contains(v))
            .collect();
        for nb in first_tier {
            if zone.len() >= target_zone_size {
                break;
            }
            available.remove(&nb);
            zone.push(nb);
        }
        // stage 3: reorder the new tier by ascending neighbor count
        zone[1..].sort_by_key(|v| (deg(*v), *v));

        // stages 4-5: expand from the 2nd list entry onward; each expansion
        // buffers the current entry's available neighbors, sorts them by
        // neighbor count, and appends until the limit is reached
        let mut cursor = 1;
        while zone.len() < target_zone_size && cursor < zone.len() {
            let current = zone[cursor];
            let mut buffer: Vec<NodeId> = t
                .neighbors(current)
                .expect("zone members exist")
                .iter()
                .copied()
                .filter(|v| available.contains(v))
                .collect();
            buffer.sort_by_key(|v| (deg(*v), *v));
            for nb in buffer {
                if zone.len() >= target_zone_size {
                    break;
                }
                available.remove(&nb);
                zone.push(nb);
            }
            cursor += 1;
        }
        zones.push(zone);
    }

    // stage 6: dissolve zones below the minimum
    let mut unzoned: BTreeSet<NodeId> = BTreeSet::new();
    zones.retain(|zone| {
        if zone.len() < min_zone_size {
            unzoned.extend(zone.iter().copied());
            false
        } else {
            true
        }
    });
    debug_assert!(!zones.is_empty(), "a connected topology always yields one full zone");

    let mut assignment: Vec<Option<ZoneId>> = vec![None; n];
    for (zi, zone) in zones.iter().enumerate() {
        for v in zone {
            assignment[v.index()] = Some(ZoneId(zi as u32));
        }
    }

    // stage 7: released nodes join the zone of their first zoned neighbor,
    // in repeated passes until everyone is assigned
    while !unzoned.is_empty() {
        let mut progressed = false;
        for v in unzoned.clone() {
            let joined = t
                .neighbors(v)
                .expect("node exists")
                .iter()
                .find_map(|nb| assignment[nb.index()]);
            if let Some(z) = joined {
                assignment[v.index()] = Some(z);
                zones[z.index()].push(v);
                unzoned.remove(&v);
                progressed = true;
            }
        }
        // connected graph with at least one surviving zone always progresses
        assert!(progressed, "stage 7 stalled on a connected topology");
    }

    let assignment: Vec<ZoneId> = assignment
        .into_iter()
        .map(|z| z.expect("stage 7 assigns every node"))
        .collect();
    let zone_count = zones.len();
    Ok(ZonePlan {
        assignment,
        members: zones,
        zms: vec![None; zone_count],
        target_zone_size,
        min_zone_size,
    })
}

/// ZMS suitability of `candidate` for a zone with the given members. Paths
/// may leave the zone; only membership is restricted.
pub fn compute_zms_index(
    t: &Topology,
    members: &[NodeId],
    candidate: NodeId,
) -> Result<ZmsIndex, ZoningError> {
    if !members.contains(&candidate) {
        return Err(ZoningError::CandidateNotMember(candidate));
    }
    let mut value = 0.0;
    for &m in members {
        if m == candidate {
            continue;
        }
        value += t.shortest_delay_path(m, candidate)?.total_cost;
    }
    Ok(ZmsIndex { candidate, value })
}

/// Assigns each zone's ZMS: the feasible member with the lowest ZMS index,
/// ties broken by smallest node id. Every node is considered feasible.
pub fn select_zms(t: &Topology, plan: &ZonePlan) -> Result<ZonePlan, ZoningError> {
    let all = vec![true; t.node_count()];
    select_zms_with_hosts(t, plan, &all)
}

/// [`select_zms`] with an explicit per-node hosting feasibility flag.
pub fn select_zms_with_hosts(
    t: &Topology,
    plan: &ZonePlan,
    can_host: &[bool],
) -> Result<ZonePlan, ZoningError> {
    let costs = SumCostTable::build(t);
    let mut out = plan.clone();
    for (zi, members) in plan.members.iter().enumerate() {
        let host = costs.argmin_for(members, |v| can_host[v.index()]);
        match host {
            Some(h) => out.zms[zi] = Some(h),
            None => return Err(ZoningError::NoFeasibleHost(ZoneId(zi as u32))),
        }
    }
    Ok(out)
}

/// Picks the node minimizing the sum of shortest-delay-path costs from every
/// node in `members` over the whole network; used for placing the central
/// server so both management schemes get an optimally placed server.
pub fn select_central_server(t: &Topology) -> NodeId {
    let members: Vec<NodeId> = t.nodes().collect();
    SumCostTable::build(t)
        .argmin_for(&members, |_| true)
        .expect("non-empty topology has a central server")
}

/// Pairwise path-cost sums, computed once per topology.
struct SumCostTable {
    n: usize,
    cost: Vec<f64>, // cost[src * n + dst]
}

impl SumCostTable {
    fn build(t: &Topology) -> Self {
        let n = t.node_count();
        let mut cost = vec![f64::INFINITY; n * n];
        for src in t.nodes() {
            let paths = t.shortest_paths_from(src, |_| true);
            for (dst, p) in paths.iter().enumerate() {
                if let Some(p) = p {
                    cost[src.index() * n + dst] = p.total_cost;
                }
            }
        }
        Self { n, cost }
    }

    fn argmin_for(&self, members: &[NodeId], feasible: impl Fn(NodeId) -> bool) -> Option<NodeId> {
        let mut best: Option<(f64, NodeId)> = None;
        for &candidate in members {
            if !feasible(candidate) {
                continue;
            }
            let mut sum = 0.0;
            for &m in members {
                if m != candidate {
                    sum += self.cost[m.index() * self.n + candidate.index()];
                }
            }
            let better = match best {
                None => true,
                Some((bv, bc)) => {
                    sum < bv || (sum == bv && candidate < bc)
                }
            };
            if better {
                best = Some((sum, candidate));
            }
        }
        best.map(|(_, c)| c)
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Exhaustive-search oracle for [`select_zms`] on a single zone.
    pub fn brute_force_zms(t: &Topology, members: &[NodeId]) -> NodeId {
        let mut best: Option<(f64, NodeId)> = None;
        for &c in members {
            let idx = compute_zms_index(t, members, c).unwrap();
            let better = match best {
                None => true,
                Some((bv, bc)) => idx.value < bv || (idx.value == bv && c < bc),
            };
            if better {
                best = Some((idx.value, c));
            }
        }
        best.unwrap().1
    }

    pub fn assert_plan_invariants(t: &Topology, plan: &ZonePlan) {
        assert_eq!(plan.assignment.len(), t.node_count());
        let mut seen = vec![false; t.node_count()];
        for (zi, zone) in plan.members.iter().enumerate() {
            assert!(zone.len() >= plan.min_zone_size, "zone {zi} below minimum");
            let mut keep = vec![false; t.node_count()];
            for v in zone {
                assert!(!seen[v.index()], "node {v} in two zones");
                seen[v.index()] = true;
                keep[v.index()] = true;
                assert_eq!(plan.assignment[v.index()], ZoneId(zi as u32));
            }
            assert!(t.is_connected_subset(&keep), "zone {zi} not connected");
        }
        assert!(seen.iter().all(|s| *s), "some node has no zone");
    }
}
