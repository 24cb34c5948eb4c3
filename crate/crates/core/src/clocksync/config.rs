use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::{Nanos, MICROS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClockConfig {
    /// Uncertainty added per hop of the sync tree, in ns.
    pub eps0_ns: f64,
    /// Worst-case drift of a free-running clock, ns per ns.
    pub max_drift_rate: f64,
    pub sync_interval_ns: Nanos,
    /// Consecutive unanswered probes that declare the parent failed.
    pub probe_loss_threshold: u32,
    /// Expected number of candidate roots sampled by the optimization.
    pub sample_expect: f64,
    /// Messages per packet during the optimization phases.
    pub opt_batch: usize,
    /// Resolution of the sampled ε series.
    pub series_step_ns: Nanos,
    /// How long the run continues after the optimized tree takes over.
    pub tail_ns: Nanos,
}

impl Default for ClockConfig {
    fn default() -> Self {
        ClockConfig {
            eps0_ns: 5.0,
            max_drift_rate: 2e-6,
            sync_interval_ns: 50 * MICROS,
            probe_loss_threshold: 3,
            sample_expect: 5.0,
            opt_batch: 24,
            series_step_ns: MICROS,
            tail_ns: 200 * MICROS,
        }
    }
}

impl ClockConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.eps0_ns, self.max_drift_rate, self.sample_expect];
        if positive.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::config("eps0, drift rate and sample_expect must be positive"));
        }
        if self.sync_interval_ns == 0 || self.series_step_ns == 0 {
            return Err(Error::config("sync interval and series step must be positive"));
        }
        if self.probe_loss_threshold == 0 {
            return Err(Error::config("probe_loss_threshold must be at least 1"));
        }
        if self.opt_batch == 0 {
            return Err(Error::config("opt_batch must be at least 1"));
        }
        Ok(())
    }

    /// Time uncertainty of a node `depth` hops below the root that last
    /// synchronized at `tau`; infinite if it never did.
    pub fn epsilon(&self, depth: u32, tau: Option<Nanos>, t: Nanos) -> f64 {
        match tau {
            None => f64::INFINITY,
            Some(tau) => self.eps0_ns * depth as f64 + t.saturating_sub(tau) as f64 * self.max_drift_rate,
        }
    }
}
