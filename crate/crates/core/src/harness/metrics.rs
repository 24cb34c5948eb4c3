//! Metrics derived from finished runs.
//!
//! Convergence is expressed in RTTs of the slowest link, where one RTT is
//! two propagations, two 64-byte transmissions and two pipeline passes.

use serde::Serialize;

use crate::engine::{PhaseReport, Synchronizer};
use crate::error::{Error, Result};
use crate::simcore::Nanos;
use crate::topo::Topology;

/// Frame size used for the RTT denominator.
pub const RTT_FRAME_BYTES: u32 = 64;

/// Longest single-link round trip.
pub fn rtt_ns(t: &Topology, processing: Nanos) -> Nanos {
    t.max_link_rtt(RTT_FRAME_BYTES, processing)
}

/// Run duration in RTTs; `None` when the run did not converge.
pub fn convergence_time_rtt(report: &PhaseReport, rtt: Nanos) -> Option<f64> {
    if !report.converged {
        return None;
    }
    if rtt == 0 {
        return Some(0.0);
    }
    Some(report.duration() as f64 / rtt as f64)
}

/// RTTs divided by the β tree height; undefined for α runs, which have no
/// tree-shaped round structure.
pub fn normalized_convergence_time(rtts: f64, sync: Synchronizer, tree_height: u32) -> Option<f64> {
    match sync {
        Synchronizer::Alpha => None,
        Synchronizer::Beta => Some(rtts / tree_height.max(1) as f64),
    }
}

pub fn avg_message_count(messages: u64, nodes: usize) -> f64 {
    if nodes == 0 {
        0.0
    } else {
        messages as f64 / nodes as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricScope {
    Global,
    Node(u32),
    Link(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub t_ns: Nanos,
    pub scope: MetricScope,
    pub name: String,
    pub value: f64,
}

/// Append-only record list, time-monotone within each scope.
#[derive(Debug, Clone, Default)]
pub struct MetricLog {
    records: Vec<MetricRecord>,
    last: std::collections::HashMap<MetricScope, Nanos>,
}

impl MetricLog {
    pub fn push(&mut self, t_ns: Nanos, scope: MetricScope, name: impl Into<String>, value: f64) -> Result<()> {
        let last = self.last.entry(scope).or_insert(0);
        if t_ns < *last {
            return Err(Error::Contract(format!("metric at {t_ns} ns goes back in time for {scope:?}")));
        }
        *last = t_ns;
        self.records.push(MetricRecord { t_ns, scope, name: name.into(), value });
        Ok(())
    }

    pub fn records(&self) -> &[MetricRecord] {
        &self.records
    }

    pub fn named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a MetricRecord> + 'a {
        self.records.iter().filter(move |r| r.name == name)
    }
}
