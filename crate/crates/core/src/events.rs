//! Append-only record of everything a run did: packet outcomes, fairness
//! report transits, server decisions, notifications, and cross-server
//! syncs. Serialized as newline-delimited records with a fixed field order
//! per record type; the header echoes the full configuration.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::config::SimConfig;
use crate::topology::NodeId;
use crate::zoning::ZoneId;

/// Role of the management server an event refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServerRole {
    Central,
    Zone(ZoneId),
}

impl ServerRole {
    fn tag(&self) -> String {
        match self {
            ServerRole::Central => "cms".to_string(),
            ServerRole::Zone(z) => format!("zms{z}"),
        }
    }
}

/// How a data packet's journey ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketOutcome {
    Delivered,
    /// Lost to a link failure while entering this node.
    DroppedLink(NodeId),
    /// Deliberately discarded by this malicious relay.
    DroppedMalicious(NodeId),
    /// This hop refused to handle traffic for a blacklisted node.
    Refused(NodeId),
    /// The origin found no route that avoids blacklisted nodes.
    NoRoute,
}

impl PacketOutcome {
    fn tag(&self) -> String {
        match self {
            PacketOutcome::Delivered => "delivered".to_string(),
            PacketOutcome::DroppedLink(v) => format!("drop-link:{v}"),
            PacketOutcome::DroppedMalicious(v) => format!("drop-malicious:{v}"),
            PacketOutcome::Refused(v) => format!("refused:{v}"),
            PacketOutcome::NoRoute => "no-route".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// One data packet. `bytes` is the offered payload size (zero when the
    /// packet was never transmitted); `path` the intended route.
    Packet {
        time: f64,
        interval: u64,
        src: NodeId,
        dst: NodeId,
        bytes: u64,
        outcome: PacketOutcome,
        path: Vec<NodeId>,
    },
    /// One fairness report transit, retransmissions included.
    Report {
        time: f64,
        interval: u64,
        reporter: NodeId,
        server: ServerRole,
        server_host: NodeId,
        entries: usize,
        hops: usize,
        attempts: u32,
        delay: f64,
        bytes: u64,
    },
    /// One server decision round.
    Decision {
        time: f64,
        round: u64,
        server: ServerRole,
        server_host: NodeId,
        reports: usize,
        failures: usize,
        max_row_sum: f64,
        newly_blacklisted: Vec<NodeId>,
    },
    /// Status message from a server to one member.
    Notification {
        time: f64,
        round: u64,
        server: ServerRole,
        member: NodeId,
        listed: usize,
        bytes: u64,
        delay: f64,
        blacklisted: Vec<NodeId>,
    },
    /// A border node relaying blacklist facts to an out-of-zone neighbor.
    BorderForward {
        time: f64,
        round: u64,
        from: NodeId,
        to: NodeId,
        entries: usize,
        bytes: u64,
    },
    /// Periodic zone-server to central-server state transfer.
    Sync {
        time: f64,
        interval: u64,
        zone: ZoneId,
        cms_host: NodeId,
        entries: usize,
        bytes: u64,
        delay: f64,
    },
    /// Per-interval byte totals by traffic category.
    IntervalSummary {
        time: f64,
        interval: u64,
        data_bytes: u64,
        report_bytes: u64,
        notify_bytes: u64,
        sync_bytes: u64,
    },
}

impl Event {
    pub fn time(&self) -> f64 {
        match self {
            Event::Packet { time, .. }
            | Event::Report { time, .. }
            | Event::Decision { time, .. }
            | Event::Notification { time, .. }
            | Event::BorderForward { time, .. }
            | Event::Sync { time, .. }
            | Event::IntervalSummary { time, .. } => *time,
        }
    }
}

/// Complete log of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub header: Vec<(String, String)>,
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn for_run(cfg: &SimConfig, truth: &BTreeSet<NodeId>) -> Self {
        let mut header: Vec<(String, String)> = cfg.to_key_values();
        header.push((
            "truth_malicious".to_string(),
            truth.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","),
        ));
        Self { header, events: Vec::new() }
    }

    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn truth_malicious(&self) -> BTreeSet<NodeId> {
        self.header
            .iter()
            .find(|(k, _)| k == "truth_malicious")
            .map(|(_, v)| {
                v.split(',')
                    .filter(|s| !s.is_empty())
                    .filter_map(|s| s.parse().ok().map(NodeId))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Total bytes carried for the fairness protocol (reports,
    /// notifications with border forwards, and syncs) and for user data.
    pub fn byte_totals(&self) -> ByteTotals {
        let mut t = ByteTotals::default();
        for e in &self.events {
            match e {
                Event::Packet { bytes, .. } => t.data += bytes,
                Event::Report { bytes, .. } => t.reports += bytes,
                Event::Notification { bytes, .. } | Event::BorderForward { bytes, .. } => {
                    t.notifications += bytes
                }
                Event::Sync { bytes, .. } => t.sync += bytes,
                _ => {}
            }
        }
        t
    }

    /// Newline-delimited text form, records ordered by timestamp (ties keep
    /// insertion order). Identical runs serialize identically.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("# fpms event log v1\n");
        for (k, v) in &self.header {
            let _ = writeln!(out, "config {k} {v}");
        }
        let mut order: Vec<usize> = (0..self.events.len()).collect();
        order.sort_by(|a, b| {
            self.events[*a]
                .time()
                .total_cmp(&self.events[*b].time())
                .then(a.cmp(b))
        });
        for i in order {
            match &self.events[i] {
                Event::Packet { time, interval, src, dst, bytes, outcome, path } => {
                    let p: Vec<String> = path.iter().map(|v| v.to_string()).collect();
                    let _ = writeln!(
                        out,
                        "pkt {time} {interval} {src} {dst} {bytes} {} {}",
                        outcome.tag(),
                        p.join(",")
                    );
                }
                Event::Report {
                    time, interval, reporter, server, server_host,
                    entries, hops, attempts, delay, bytes,
                } => {
                    let _ = writeln!(
                        out,
                        "rpt {time} {interval} {reporter} {} {server_host} {entries} {hops} {attempts} {delay} {bytes}",
                        server.tag()
                    );
                }
                Event::Decision {
                    time, round, server, server_host, reports, failures, max_row_sum, newly_blacklisted,
                } => {
                    let b: Vec<String> = newly_blacklisted.iter().map(|v| v.to_string()).collect();
                    let _ = writeln!(
                        out,
                        "dec {time} {round} {} {server_host} {reports} {failures} {max_row_sum} {}",
                        server.tag(),
                        b.join(",")
                    );
                }
                Event::Notification { time, round, server, member, listed, bytes, delay, blacklisted } => {
                    let b: Vec<String> = blacklisted.iter().map(|v| v.to_string()).collect();
                    let _ = writeln!(
                        out,
                        "ntf {time} {round} {} {member} {listed} {bytes} {delay} {}",
                        server.tag(),
                        b.join(",")
                    );
                }
                Event::BorderForward { time, round, from, to, entries, bytes } => {
                    let _ = writeln!(out, "fwd {time} {round} {from} {to} {entries} {bytes}");
                }
                Event::Sync { time, interval, zone, cms_host, entries, bytes, delay } => {
                    let _ = writeln!(out, "syn {time} {interval} {zone} {cms_host} {entries} {bytes} {delay}");
                }
                Event::IntervalSummary { time, interval, data_bytes, report_bytes, notify_bytes, sync_bytes } => {
                    let _ = writeln!(
                        out,
                        "sum {time} {interval} {data_bytes} {report_bytes} {notify_bytes} {sync_bytes}"
                    );
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ByteTotals {
    pub data: u64,
    pub reports: u64,
    pub notifications: u64,
    pub sync: u64,
}

impl ByteTotals {
    pub fn fairness(&self) -> u64 {
        self.reports + self.notifications + self.sync
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serialization_orders_by_time() {
        let mut log = EventLog::default();
        log.push(Event::IntervalSummary {
            time: 20.0, interval: 2, data_bytes: 1, report_bytes: 0, notify_bytes: 0, sync_bytes: 0,
        });
        log.push(Event::Decision {
            time: 15.0,
            round: 1,
            server: ServerRole::Central,
            server_host: NodeId(3),
            reports: 4,
            failures: 0,
            max_row_sum: 0.0,
            newly_blacklisted: vec![],
        });
        let text = log.serialize();
        let dec = text.find("dec ").unwrap();
        let sum = text.find("sum ").unwrap();
        assert!(dec < sum);
    }

    #[test]
    fn byte_totals_split_by_category() {
        let mut log = EventLog::default();
        log.push(Event::Packet {
            time: 0.0, interval: 1, src: NodeId(0), dst: NodeId(1),
            bytes: 700, outcome: PacketOutcome::Delivered, path: vec![NodeId(0), NodeId(1)],
        });
        log.push(Event::Report {
            time: 1.0, interval: 1, reporter: NodeId(0), server: ServerRole::Central,
            server_host: NodeId(1), entries: 1, hops: 1, attempts: 1, delay: 2.0, bytes: 200,
        });
        log.push(Event::BorderForward {
            time: 2.0, round: 1, from: NodeId(0), to: NodeId(1), entries: 1, bytes: 40,
        });
        log.push(Event::Sync {
            time: 3.0, interval: 1, zone: ZoneId(0), cms_host: NodeId(1),
            entries: 0, bytes: 32, delay: 1.0,
        });
        let totals = log.byte_totals();
        assert_eq!(totals.data, 700);
        assert_eq!(totals.fairness(), 272);
    }

    #[test]
    fn truth_round_trips_through_header() {
        let truth: BTreeSet<NodeId> = [NodeId(3), NodeId(7)].into_iter().collect();
        let log = EventLog::for_run(&SimConfig::default(), &truth);
        assert_eq!(log.truth_malicious(), truth);
        assert_eq!(log.header_value("scheme"), Some("hybrid"));
    }
}
