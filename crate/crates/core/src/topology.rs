//! Random mesh topologies: node positions, radio adjacency, per-node delay
//! indices, and delay-weighted shortest paths.
//!
//! The cost of a path charges the delay index of every node on it except the
//! source; link propagation is treated as negligible. Ties between equal-cost
//! paths are broken by the lexicographically smallest node sequence so that
//! routing is fully deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Dense node identifier, stable for the lifetime of a topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid topology parameters: {0}")]
    InvalidParams(String),
    #[error("could not generate a connected topology after {attempts} attempts (n={n}, range={range})")]
    ConnectivityFailure { n: usize, range: f64, attempts: u64 },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no path from {src} to {dst}")]
    Unreachable { src: NodeId, dst: NodeId },
    #[error("malformed topology file: {0}")]
    Parse(String),
}

/// A loop-free node sequence together with its delay cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub total_cost: f64,
}

impl Path {
    /// Number of links traversed.
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }
}

/// Static mesh graph: positions in meters, symmetric radio adjacency, and a
/// strictly positive delay index per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<(f64, f64)>,
    delay_index: Vec<f64>,
    radio_range: f64,
    adjacency: Vec<Vec<NodeId>>,
}

/// Attempts made (seed, seed+1, ...) before generation gives up.
const CONNECT_RETRY_BUDGET: u64 = 64;

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

impl Topology {
    /// Builds a topology from explicit positions and delay indices.
    /// Adjacency is derived from `radio_range`; connectivity is not required,
    /// which lets fixtures construct isolated nodes.
    pub fn from_parts(
        positions: Vec<(f64, f64)>,
        radio_range: f64,
        delay_index: Vec<f64>,
    ) -> Result<Self, TopologyError> {
        if positions.len() != delay_index.len() {
            return Err(TopologyError::InvalidParams(
                "positions and delay indices must have equal length".into(),
            ));
        }
        if radio_range <= 0.0 {
            return Err(TopologyError::InvalidParams("radio range must be positive".into()));
        }
        if delay_index.iter().any(|d| *d <= 0.0 || !d.is_finite()) {
            return Err(TopologyError::InvalidParams(
                "every delay index must be strictly positive".into(),
            ));
        }
        let n = positions.len();
        let mut adjacency = vec![Vec::new(); n];
        for a in 0..n {
            for b in (a + 1)..n {
                let (ax, ay) = positions[a];
                let (bx, by) = positions[b];
                let d2 = (ax - bx) * (ax - bx) + (ay - by) * (ay - by);
                if d2 <= radio_range * radio_range {
                    adjacency[a].push(NodeId(b as u32));
                    adjacency[b].push(NodeId(a as u32));
                }
            }
        }
        // neighbor lists stay sorted ascending
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self { positions, delay_index, radio_range, adjacency })
    }

    /// Generates a random topology: positions uniform in the area, delay
    /// indices uniform in `[delay_min, delay_max]`. Disconnected draws are
    /// retried with seed+1 up to a fixed budget.
    pub fn generate(
        n: usize,
        area: (f64, f64),
        radio_range: f64,
        delay_range: (f64, f64),
        seed: u64,
    ) -> Result<Self, TopologyError> {
        if n < 2 {
            return Err(TopologyError::InvalidParams("need at least two nodes".into()));
        }
        if area.0 <= 0.0 || area.1 <= 0.0 {
            return Err(TopologyError::InvalidParams("area sides must be positive".into()));
        }
        if radio_range <= 0.0 {
            return Err(TopologyError::InvalidParams("radio range must be positive".into()));
        }
        let (dmin, dmax) = delay_range;
        if !(0.0 < dmin && dmin <= dmax) {
            return Err(TopologyError::InvalidParams(
                "delay range must satisfy 0 < min <= max".into(),
            ));
        }
        for attempt in 0..CONNECT_RETRY_BUDGET {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
            // positions are quantized to millimeters so the text export
            // round-trips exactly
            let positions: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    let x = round3(rng.gen_range(0.0..area.0));
                    let y = round3(rng.gen_range(0.0..area.1));
                    (x, y)
                })
                .collect();
            let delay_index: Vec<f64> =
                (0..n).map(|_| rng.gen_range(dmin..=dmax)).collect();
            let topo = Self::from_parts(positions, radio_range, delay_index)?;
            if topo.is_connected() {
                return Ok(topo);
            }
        }
        Err(TopologyError::ConnectivityFailure {
            n,
            range: radio_range,
            attempts: CONNECT_RETRY_BUDGET,
        })
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.positions.len() as u32).map(NodeId)
    }

    pub fn radio_range(&self) -> f64 {
        self.radio_range
    }

    pub fn position(&self, a: NodeId) -> (f64, f64) {
        self.positions[a.index()]
    }

    pub fn delay_index(&self, a: NodeId) -> f64 {
        self.delay_index[a.index()]
    }

    fn check_node(&self, a: NodeId) -> Result<(), TopologyError> {
        if a.index() < self.positions.len() {
            Ok(())
        } else {
            Err(TopologyError::UnknownNode(a))
        }
    }

    /// Neighbors of `a` in ascending id order.
    pub fn neighbors(&self, a: NodeId) -> Result<&[NodeId], TopologyError> {
        self.check_node(a)?;
        Ok(&self.adjacency[a.index()])
    }

    pub fn degree(&self, a: NodeId) -> usize {
        self.adjacency[a.index()].len()
    }

    pub fn are_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency[a.index()].binary_search(&b).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for nb in &self.adjacency[v] {
                if !seen[nb.index()] {
                    seen[nb.index()] = true;
                    count += 1;
                    stack.push(nb.index());
                }
            }
        }
        count == n
    }

    /// Whether the subgraph induced by `keep` is connected (vacuously true
    /// when `keep` selects fewer than two nodes).
    pub fn is_connected_subset(&self, keep: &[bool]) -> bool {
        let n = self.node_count();
        let total = keep.iter().filter(|k| **k).count();
        if total <= 1 {
            return true;
        }
        let start = match (0..n).find(|i| keep[*i]) {
            Some(s) => s,
            None => return true,
        };
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for nb in &self.adjacency[v] {
                if keep[nb.index()] && !seen[nb.index()] {
                    seen[nb.index()] = true;
                    count += 1;
                    stack.push(nb.index());
                }
            }
        }
        count == total
    }

    /// Minimum-cost path from `src` to `dst` under the node-delay cost rule,
    /// ties broken by lexicographically smallest node sequence.
    pub fn shortest_delay_path(&self, src: NodeId, dst: NodeId) -> Result<Path, TopologyError> {
        self.check_node(src)?;
        self.check_node(dst)?;
        self.shortest_path_filtered(src, dst, |_| true)
            .ok_or(TopologyError::Unreachable { src, dst })
    }

    /// Same as [`shortest_delay_path`], but intermediate hops must satisfy
    /// `allowed`. Endpoints are always admissible.
    pub fn shortest_path_filtered(
        &self,
        src: NodeId,
        dst: NodeId,
        allowed: impl Fn(NodeId) -> bool,
    ) -> Option<Path> {
        if src == dst {
            return Some(Path { nodes: vec![src], total_cost: 0.0 });
        }
        let n = self.node_count();
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry { cost: 0.0, nodes: vec![src] });
        while let Some(entry) = heap.pop() {
            let last = *entry.nodes.last().expect("entry paths are non-empty");
            if settled[last.index()] {
                continue;
            }
            settled[last.index()] = true;
            if last == dst {
                return Some(Path { nodes: entry.nodes, total_cost: entry.cost });
            }
            for &nb in &self.adjacency[last.index()] {
                if settled[nb.index()] || (nb != dst && !allowed(nb)) {
                    continue;
                }
                let mut nodes = entry.nodes.clone();
                nodes.push(nb);
                heap.push(HeapEntry { cost: entry.cost + self.delay_index[nb.index()], nodes });
            }
        }
        None
    }

    /// Single-source variant: minimum-cost (then lexicographically smallest)
    /// path to every reachable node that satisfies `allowed`.
    pub fn shortest_paths_from(
        &self,
        src: NodeId,
        allowed: impl Fn(NodeId) -> bool,
    ) -> Vec<Option<Path>> {
        let n = self.node_count();
        let mut result: Vec<Option<Path>> = vec![None; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry { cost: 0.0, nodes: vec![src] });
        while let Some(entry) = heap.pop() {
            let last = *entry.nodes.last().expect("entry paths are non-empty");
            if settled[last.index()] {
                continue;
            }
            settled[last.index()] = true;
            for &nb in &self.adjacency[last.index()] {
                if settled[nb.index()] || !allowed(nb) {
                    continue;
                }
                let mut nodes = entry.nodes.clone();
                nodes.push(nb);
                heap.push(HeapEntry { cost: entry.cost + self.delay_index[nb.index()], nodes });
            }
            result[last.index()] = Some(Path { nodes: entry.nodes, total_cost: entry.cost });
        }
        result
    }

    /// Line-oriented text export. Positions carry exactly three fractional
    /// digits; ranges and delay indices use the shortest round-trip form.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("nodes {} range {}\n", self.node_count(), self.radio_range));
        for a in self.nodes() {
            let (x, y) = self.positions[a.index()];
            out.push_str(&format!("{} {:.3} {:.3} {}\n", a, x, y, self.delay_index[a.index()]));
        }
        out.push_str("edges\n");
        for a in self.nodes() {
            for &b in &self.adjacency[a.index()] {
                if a < b {
                    out.push_str(&format!("{} {}\n", a, b));
                }
            }
        }
        out
    }

    /// Parses the text format produced by [`export_text`]. The edge section
    /// is validated against adjacency recomputed from positions and range.
    pub fn import_text(text: &str) -> Result<Self, TopologyError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| TopologyError::Parse("empty file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "nodes" || parts[2] != "range" {
            return Err(TopologyError::Parse(format!("bad header: {header}")));
        }
        let n: usize = parts[1]
            .parse()
            .map_err(|_| TopologyError::Parse("bad node count".into()))?;
        let range: f64 = parts[3]
            .parse()
            .map_err(|_| TopologyError::Parse("bad range".into()))?;
        let mut positions = vec![(0.0, 0.0); n];
        let mut delays = vec![0.0; n];
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| TopologyError::Parse("truncated node list".into()))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(TopologyError::Parse(format!("bad node line: {line}")));
            }
            let id: usize = f[0].parse().map_err(|_| TopologyError::Parse("bad node id".into()))?;
            if id >= n {
                return Err(TopologyError::Parse(format!("node id {id} out of range")));
            }
            let x: f64 = f[1].parse().map_err(|_| TopologyError::Parse("bad x".into()))?;
            let y: f64 = f[2].parse().map_err(|_| TopologyError::Parse("bad y".into()))?;
            let d: f64 = f[3].parse().map_err(|_| TopologyError::Parse("bad delay index".into()))?;
            positions[id] = (x, y);
            delays[id] = d;
        }
        match lines.next() {
            Some("edges") => {}
            other => return Err(TopologyError::Parse(format!("expected edges section, got {other:?}"))),
        }
        let topo = Self::from_parts(positions, range, delays)?;
        let mut listed = 0usize;
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 2 {
                return Err(TopologyError::Parse(format!("bad edge line: {line}")));
            }
            let a: u32 = f[0].parse().map_err(|_| TopologyError::Parse("bad edge".into()))?;
            let b: u32 = f[1].parse().map_err(|_| TopologyError::Parse("bad edge".into()))?;
            if !topo.are_adjacent(NodeId(a), NodeId(b)) {
                return Err(TopologyError::Parse(format!(
                    "edge {a} {b} inconsistent with positions and range"
                )));
            }
            listed += 1;
        }
        let actual: usize = topo.adjacency.iter().map(|l| l.len()).sum::<usize>() / 2;
        if listed != actual {
            return Err(TopologyError::Parse(format!(
                "edge section lists {listed} edges, adjacency has {actual}"
            )));
        }
        Ok(topo)
    }
}

/// Radio range that yields a target mean degree at the given node density.
pub fn range_for_density(density: f64, target_mean_degree: f64) -> f64 {
    (target_mean_degree / (std::f64::consts::PI * density)).sqrt()
}

struct HeapEntry {
    cost: f64,
    nodes: Vec<NodeId>,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cost.total_cmp(&other.cost) == Ordering::Equal && self.nodes == other.nodes
    }
}
impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the cheapest (then
        // lexicographically smallest) path pops first
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.nodes.cmp(&self.nodes))
    }
}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_nodes_in_range_are_adjacent() {
        let t = Topology::generate(2, (10.0, 10.0), 20.0, (1.0, 1.0), 0).unwrap();
        assert_eq!(t.neighbors(NodeId(0)).unwrap(), &[NodeId(1)]);
        assert_eq!(t.neighbors(NodeId(1)).unwrap(), &[NodeId(0)]);
    }

    #[test]
    fn tiny_range_fails_connectivity() {
        let err = Topology::generate(50, (1000.0, 1000.0), 1.0, (1.0, 10.0), 3).unwrap_err();
        assert!(matches!(err, TopologyError::ConnectivityFailure { .. }));
    }

    #[test]
    fn large_generation_is_connected() {
        let t = Topology::generate(200, (1500.0, 1500.0), 190.0, (1.0, 10.0), 7).unwrap();
        assert_eq!(t.node_count(), 200);
        assert!(t.is_connected());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = Topology::generate(60, (800.0, 800.0), 150.0, (1.0, 10.0), 42).unwrap();
        let b = Topology::generate(60, (800.0, 800.0), 150.0, (1.0, 10.0), 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn isolated_node_fixture() {
        // node 2 placed far away; connectivity is only enforced by generate()
        let t = Topology::from_parts(
            vec![(0.0, 0.0), (1.0, 0.0), (50.0, 50.0)],
            1.5,
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        assert!(t.neighbors(NodeId(2)).unwrap().is_empty());
        assert!(!t.is_connected());
    }

    #[test]
    fn line_middle_neighbors() {
        let t = line3();
        assert_eq!(t.neighbors(NodeId(1)).unwrap(), &[NodeId(0), NodeId(2)]);
    }

    #[test]
    fn unknown_node_is_rejected() {
        let t = line3();
        assert!(matches!(t.neighbors(NodeId(9)), Err(TopologyError::UnknownNode(_))));
        assert!(matches!(
            t.shortest_delay_path(NodeId(0), NodeId(9)),
            Err(TopologyError::UnknownNode(_))
        ));
    }

    #[test]
    fn path_to_self_is_free() {
        let t = line3();
        let p = t.shortest_delay_path(NodeId(1), NodeId(1)).unwrap();
        assert_eq!(p.nodes, vec![NodeId(1)]);
        assert_eq!(p.total_cost, 0.0);
        assert_eq!(p.hops(), 0);
    }

    #[test]
    fn line_cost_counts_all_but_source() {
        let t = line3();
        let p = t.shortest_delay_path(NodeId(0), NodeId(2)).unwrap();
        assert_eq!(p.nodes, vec![NodeId(0), NodeId(1), NodeId(2)]);
        assert_eq!(p.total_cost, 5.0); // 3 + 2
    }

    #[test]
    fn diamond_prefers_cheap_branch() {
        // 0-1-3 and 0-2-3 with no 0-3 or 1-2 edge
        let t = Topology::from_parts(
            vec![(0.0, 0.0), (1.0, 0.6), (1.0, -0.6), (2.0, 0.0)],
            1.18,
            vec![1.0, 10.0, 1.0, 1.0],
        )
        .unwrap();
        assert!(t.are_adjacent(NodeId(0), NodeId(1)));
        assert!(t.are_adjacent(NodeId(2), NodeId(3)));
        assert!(!t.are_adjacent(NodeId(0), NodeId(3)));
        assert!(!t.are_adjacent(NodeId(1), NodeId(2)));
        let p = t.shortest_delay_path(NodeId(0), NodeId(3)).unwrap();
        assert_eq!(p.nodes, vec![NodeId(0), NodeId(2), NodeId(3)]);
        assert_eq!(p.total_cost, 2.0);
        let oracle = brute_force_best_path(&t, NodeId(0), NodeId(3)).unwrap();
        assert_eq!(p, oracle);
    }

    #[test]
    fn equal_cost_tie_breaks_lexicographically() {
        // square 0-1-3 / 0-2-3 with uniform delays: both routes cost 2
        let t = Topology::from_parts(
            vec![(0.0, 0.0), (1.0, 0.6), (1.0, -0.6), (2.0, 0.0)],
            1.18,
            vec![1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        let p = t.shortest_delay_path(NodeId(0), NodeId(3)).unwrap();
        assert_eq!(p.nodes, vec![NodeId(0), NodeId(1), NodeId(3)]);
    }

    #[test]
    fn unreachable_is_reported() {
        let t = Topology::from_parts(
            vec![(0.0, 0.0), (1.0, 0.0), (50.0, 50.0)],
            1.5,
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        assert!(matches!(
            t.shortest_delay_path(NodeId(0), NodeId(2)),
            Err(TopologyError::Unreachable { .. })
        ));
    }

    #[test]
    fn filtered_path_avoids_excluded_relays() {
        let t = line3();
        assert!(t.shortest_path_filtered(NodeId(0), NodeId(2), |v| v != NodeId(1)).is_none());
        let p = t.shortest_path_filtered(NodeId(0), NodeId(1), |v| v != NodeId(1)).unwrap();
        assert_eq!(p.nodes, vec![NodeId(0), NodeId(1)]); // destination is always admissible
    }

    #[test]
    fn single_source_matches_per_pair_queries() {
        let t = Topology::generate(24, (400.0, 400.0), 120.0, (1.0, 10.0), 11).unwrap();
        let from0 = t.shortest_paths_from(NodeId(0), |_| true);
        for dst in t.nodes() {
            let direct = t.shortest_delay_path(NodeId(0), dst).unwrap();
            let cached = from0[dst.index()].as_ref().unwrap();
            assert_eq!(&direct, cached);
        }
    }

    #[test]
    fn small_graphs_match_brute_force() {
        let mut checked = 0;
        for seed in 0..40u64 {
            let n = 4 + (seed as usize % 7);
            let t = match Topology::generate(n, (100.0, 100.0), 45.0, (1.0, 10.0), seed) {
                Ok(t) => t,
                Err(_) => continue,
            };
            for src in t.nodes() {
                for dst in t.nodes() {
                    let got = t.shortest_delay_path(src, dst).unwrap();
                    let want = brute_force_best_path(&t, src, dst).unwrap();
                    assert_eq!(got.total_cost, want.total_cost, "seed {seed} {src}->{dst}");
                    assert_eq!(got.nodes, want.nodes, "seed {seed} {src}->{dst}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 200);
    }

    #[test]
    fn export_import_round_trip() {
        let t = Topology::generate(30, (500.0, 500.0), 140.0, (1.0, 10.0), 5).unwrap();
        let text = t.export_text();
        let back = Topology::import_text(&text).unwrap();
        assert_eq!(t, back);
        assert_eq!(text, back.export_text());
    }

    #[test]
    fn import_rejects_inconsistent_edges() {
        let t = Topology::from_parts(
            vec![(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)],
            1.5,
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        let mut text = t.export_text();
        text.push_str("0 2\n");
        assert!(Topology::import_text(&text).is_err());
    }

    proptest! {
        #[test]
        fn adjacency_is_symmetric_and_irreflexive(seed in 0u64..500, n in 2usize..40) {
            if let Ok(t) = Topology::generate(n, (300.0, 300.0), 110.0, (1.0, 10.0), seed) {
                for a in t.nodes() {
                    prop_assert!(!t.are_adjacent(a, a));
                    for &b in t.neighbors(a).unwrap() {
                        prop_assert!(t.neighbors(b).unwrap().contains(&a));
                    }
                }
            }
        }

        #[test]
        fn path_cost_equals_sum_of_non_source_delays(seed in 0u64..200) {
            if let Ok(t) = Topology::generate(12, (200.0, 200.0), 90.0, (1.0, 10.0), seed) {
                let p = t.shortest_delay_path(NodeId(0), NodeId(11)).unwrap();
                let sum: f64 = p.nodes[1..].iter().map(|v| t.delay_index(*v)).sum();
                prop_assert_eq!(p.total_cost, sum);
                for w in p.nodes.windows(2) {
                    prop_assert!(t.are_adjacent(w[0], w[1]));
                }
            }
        }
    }
}
