//! Parent-liveness monitoring.
//!
//! A node checks its parent once per sync interval. If nothing arrived since
//! the previous check it sends a probe upstream; a probe still unanswered at
//! the next check counts as lost, and enough consecutive losses declare the
//! parent failed.

use crate::simcore::Nanos;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckAction {
    /// The parent was heard from since the previous check.
    Quiet,
    SendProbe,
    Detect,
}

#[derive(Debug, Clone)]
pub struct ProbeMonitor {
    threshold: u32,
    heard: bool,
    outstanding: bool,
    lost: u32,
}

impl ProbeMonitor {
    pub fn new(threshold: u32) -> Self {
        ProbeMonitor { threshold, heard: false, outstanding: false, lost: 0 }
    }

    /// A sync message or a probe reply arrived from the parent.
    pub fn heard(&mut self) {
        self.heard = true;
        self.outstanding = false;
        self.lost = 0;
    }

    pub fn lost(&self) -> u32 {
        self.lost
    }

    pub fn check(&mut self) -> CheckAction {
        if std::mem::take(&mut self.heard) {
            return CheckAction::Quiet;
        }
        if self.outstanding {
            self.lost += 1;
            if self.lost >= self.threshold {
                return CheckAction::Detect;
            }
        }
        self.outstanding = true;
        CheckAction::SendProbe
    }
}

/// Runs the monitor for a node whose syncs stopped after `last_heard`.
/// Checks happen at `last_heard + j·interval`; `answered(t)` tells whether a
/// probe sent at `t` gets a reply before the next check. Returns the
/// detection time, or `None` if the parent keeps answering for `max_checks`.
pub fn detection_time(
    last_heard: Nanos,
    interval: Nanos,
    threshold: u32,
    max_checks: u32,
    answered: impl Fn(Nanos) -> bool,
) -> Option<Nanos> {
    let mut m = ProbeMonitor::new(threshold);
    for j in 1..=max_checks as u64 {
        let t = last_heard + j * interval;
        match m.check() {
            CheckAction::Detect => return Some(t),
            CheckAction::SendProbe if answered(t) => m.heard(),
            _ => {}
        }
    }
    None
}
