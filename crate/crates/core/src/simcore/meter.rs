//! Per-link control overhead accounting.
//!
//! Each paced control packet occupies a slot `[start, end)` on its egress
//! port; its bits are attributed uniformly over that slot. Slots on one port
//! never overlap, so the governor's guarantee is checkable as "bits inside
//! any window ≤ budget × window".

use std::collections::{BTreeMap, VecDeque};

use super::Nanos;
use crate::topo::LinkId;

#[derive(Debug, Clone, Default)]
struct PortMeter {
    bin: u64,
    bits: f64,
    link: u32,
    /// Slots whose end lies within the trailing window.
    recent: VecDeque<(Nanos, Nanos, f64)>,
}

#[derive(Debug, Clone)]
pub struct OverheadMeter {
    bin_ns: Nanos,
    window_ns: Nanos,
    ports: Vec<PortMeter>,
    /// bin index → (max bits on any port, that port's link)
    max_per_bin: BTreeMap<u64, (f64, u32)>,
    max_window_bits: f64,
}

impl OverheadMeter {
    pub fn new(port_count: usize, bin_ns: Nanos, window_ns: Nanos) -> Self {
        OverheadMeter {
            bin_ns,
            window_ns,
            ports: vec![PortMeter { bin: u64::MAX, ..Default::default() }; port_count],
            max_per_bin: BTreeMap::new(),
            max_window_bits: 0.0,
        }
    }

    pub fn window_ns(&self) -> Nanos {
        self.window_ns
    }

    fn flush(&mut self, port: usize) {
        let p = &mut self.ports[port];
        if p.bin != u64::MAX && p.bits > 0.0 {
            let e = self.max_per_bin.entry(p.bin).or_insert((0.0, p.link));
            if p.bits > e.0 {
                *e = (p.bits, p.link);
            }
        }
        p.bits = 0.0;
    }

    /// Records a slot on `port` (flat port index). Slots on a port must be
    /// recorded in start order.
    pub fn record(&mut self, port: usize, link: LinkId, start: Nanos, end: Nanos, bits: f64) {
        let end = end.max(start + 1);
        let dur = (end - start) as f64;
        let mut b = start / self.bin_ns;
        loop {
            let lo = (b * self.bin_ns).max(start);
            let hi = ((b + 1) * self.bin_ns).min(end);
            if lo >= hi {
                break;
            }
            if self.ports[port].bin != b {
                self.flush(port);
                self.ports[port].bin = b;
            }
            self.ports[port].link = link.0;
            self.ports[port].bits += bits * (hi - lo) as f64 / dur;
            b += 1;
        }

        // Sliding window ending at this slot's end.
        let w = self.window_ns;
        let p = &mut self.ports[port];
        p.recent.push_back((start, end, bits));
        let from = end.saturating_sub(w);
        while p.recent.front().is_some_and(|&(_, e, _)| e <= from) {
            p.recent.pop_front();
        }
        let inside: f64 = p
            .recent
            .iter()
            .map(|&(s, e, bits)| {
                let lo = s.max(from);
                bits * (e - lo) as f64 / (e - s) as f64
            })
            .sum();
        if inside > self.max_window_bits {
            self.max_window_bits = inside;
        }
    }

    /// Highest rate observed on any port over any sliding window, in bps.
    pub fn max_window_bps(&self) -> f64 {
        self.max_window_bits * 1e9 / self.window_ns as f64
    }

    /// `(bin start, link, bps)` of the busiest link in every bin with traffic.
    pub fn series(&mut self) -> Vec<(Nanos, LinkId, f64)> {
        for p in 0..self.ports.len() {
            self.flush(p);
        }
        self.max_per_bin
            .iter()
            .map(|(&b, &(bits, link))| (b * self.bin_ns, LinkId(link), bits * 1e9 / self.bin_ns as f64))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn back_to_back_slots_at_budget_stay_at_budget() {
        let mut m = OverheadMeter::new(1, 10_000, 100_000);
        // 100-byte packets at 100 Mbps occupy 8 µs each.
        let mut t = 0;
        for _ in 0..100 {
            m.record(0, LinkId(0), t, t + 8_000, 800.0);
            t += 8_000;
        }
        assert!((m.max_window_bps() - 100e6).abs() < 1.0);
        let s = m.series();
        assert!(s.iter().all(|&(_, _, bps)| bps <= 100e6 + 1.0));
    }
}
