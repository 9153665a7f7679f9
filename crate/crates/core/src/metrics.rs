//! The three evaluation metrics extracted from an event log: mean fairness
//! report transit delay, time to blacklist 90% of the truly malicious
//! nodes, and the share of carried bytes spent on the fairness protocol.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::events::{Event, EventLog};
use crate::topology::NodeId;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("event log holds no completed interval")]
    EmptyLog,
    #[error("table is empty")]
    EmptyTable,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed table: {0}")]
    Parse(String),
}

/// Metrics of one run, keyed by its scheme, size, density, and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub scheme: String,
    pub n: usize,
    pub density: f64,
    pub seed: u64,
    /// Mean accumulated transit delay over all fairness reports.
    pub avg_update_delay: f64,
    /// First interval index at which at least 90% of the truly malicious
    /// nodes are blacklisted; 0 when there is nothing to detect, infinite
    /// when the run never got there.
    pub detection_time_90: f64,
    /// Fairness bytes over total carried bytes.
    pub overhead_ratio: f64,
}

/// Computes the metric triple from a completed run's log.
pub fn compute_metrics(
    log: &EventLog,
    truth: &BTreeSet<NodeId>,
) -> Result<MetricsReport, MetricsError> {
    let intervals = log
        .events
        .iter()
        .filter(|e| matches!(e, Event::IntervalSummary { .. }))
        .count();
    if intervals == 0 {
        return Err(MetricsError::EmptyLog);
    }
    let update_interval: f64 = log
        .header_value("update_interval")
        .and_then(|v| v.parse().ok())
        .unwrap_or(1.0);

    let mut delay_sum = 0.0;
    let mut delay_count = 0usize;
    for e in &log.events {
        if let Event::Report { delay, .. } = e {
            delay_sum += delay;
            delay_count += 1;
        }
    }
    let avg_update_delay = if delay_count == 0 { 0.0 } else { delay_sum / delay_count as f64 };

    let detection_time_90 = if truth.is_empty() {
        0.0
    } else {
        let needed = truth.len() * 9; // covered * 10 >= |truth| * 9
        let mut decisions: Vec<(f64, &Vec<NodeId>)> = log
            .events
            .iter()
            .filter_map(|e| match e {
                Event::Decision { time, newly_blacklisted, .. } if !newly_blacklisted.is_empty() => {
                    Some((*time, newly_blacklisted))
                }
                _ => None,
            })
            .collect();
        decisions.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut covered: BTreeSet<NodeId> = BTreeSet::new();
        let mut found = f64::INFINITY;
        for (time, newly) in decisions {
            covered.extend(newly.iter().filter(|b| truth.contains(b)));
            if covered.len() * 10 >= needed {
                found = (time / update_interval).ceil().max(1.0);
                break;
            }
        }
        found
    };

    let totals = log.byte_totals();
    let fairness = totals.fairness() as f64;
    let denom = fairness + totals.data as f64;
    let overhead_ratio = if denom == 0.0 { 0.0 } else { fairness / denom };

    Ok(MetricsReport {
        scheme: log.header_value("scheme").unwrap_or("?").to_string(),
        n: log.header_value("n").and_then(|v| v.parse().ok()).unwrap_or(0),
        density: {
            let ax: f64 = log.header_value("area_x").and_then(|v| v.parse().ok()).unwrap_or(1.0);
            let ay: f64 = log.header_value("area_y").and_then(|v| v.parse().ok()).unwrap_or(1.0);
            let n: f64 = log.header_value("n").and_then(|v| v.parse().ok()).unwrap_or(0.0);
            n / (ax * ay)
        },
        seed: log.header_value("seed").and_then(|v| v.parse().ok()).unwrap_or(0),
        avg_update_delay,
        detection_time_90,
        overhead_ratio,
    })
}
