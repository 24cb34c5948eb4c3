use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::meter::OverheadMeter;
use super::rng::{stream, SimRng};
use super::trace::TraceRow;
use super::{serialization_ns, Nanos, PacketKind, PacketMeta, MICROS};
use crate::error::{Error, Result};
use crate::topo::{LinkId, NodeId, Port, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Constant per-packet switch pipeline latency.
    pub processing_delay: Nanos,
    /// Control-plane budget per egress port; `None` disables pacing.
    pub control_budget_bps: Option<f64>,
    pub min_frame: u32,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { processing_delay: 400, control_budget_bps: None, min_frame: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    LinkDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryOutcome {
    Delivered { at: Nanos },
    Lost,
    Dropped(DropReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FailureTarget {
    Link { link: u32 },
    Switch { node: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureSpec {
    pub time: Nanos,
    pub target: FailureTarget,
}

impl FailureSpec {
    pub fn link(time: Nanos, link: LinkId) -> Self {
        FailureSpec { time, target: FailureTarget::Link { link: link.0 } }
    }

    pub fn switch(time: Nanos, node: NodeId) -> Self {
        FailureSpec { time, target: FailureTarget::Switch { node: node.0 } }
    }
}

/// Counters over everything handed to [`Network::transmit`].
#[derive(Debug, Clone, Default)]
pub struct WireStats {
    pub packets: [u64; 6],
    pub bytes: [u64; 6],
    pub lost: u64,
    pub dropped: u64,
    /// Control bytes per link, both directions.
    pub control_bytes_per_link: Vec<u64>,
}

impl WireStats {
    pub fn control_packets(&self) -> u64 {
        PacketKind::ALL.iter().filter(|k| k.is_control()).map(|k| self.packets[k.index()]).sum()
    }

    pub fn control_bytes(&self) -> u64 {
        PacketKind::ALL.iter().filter(|k| k.is_control()).map(|k| self.bytes[k.index()]).sum()
    }

    pub fn packets_of(&self, k: PacketKind) -> u64 {
        self.packets[k.index()]
    }
}

/// Link model: per-port FIFO, control pacing, loss, jitter and failures.
pub struct Network {
    topo: Arc<Topology>,
    cfg: NetConfig,
    port_base: Vec<usize>,
    fifo_free: Vec<Nanos>,
    ctrl_next: Vec<Nanos>,
    down_at: Vec<Option<Nanos>>,
    loss: Vec<f64>,
    loss_rng: SimRng,
    jitter_rng: SimRng,
    stats: WireStats,
    meter: Option<OverheadMeter>,
    trace: Option<Vec<TraceRow>>,
    last_departure: Nanos,
}

impl Network {
    pub fn new(topo: Arc<Topology>, cfg: NetConfig, seed: u64) -> Self {
        let mut port_base = Vec::with_capacity(topo.node_count() + 1);
        let mut acc = 0;
        for n in topo.nodes() {
            port_base.push(acc);
            acc += topo.degree(n);
        }
        port_base.push(acc);
        let links = topo.edge_count();
        let down_at = topo.links().iter().map(|l| (!l.params.up).then_some(0)).collect();
        let loss = topo.links().iter().map(|l| l.params.loss_rate).collect();
        Network {
            cfg,
            port_base,
            fifo_free: vec![0; acc],
            ctrl_next: vec![0; acc],
            down_at,
            loss,
            loss_rng: stream(seed, "net.loss"),
            jitter_rng: stream(seed, "net.jitter"),
            stats: WireStats { control_bytes_per_link: vec![0; links], ..Default::default() },
            meter: None,
            trace: None,
            last_departure: 0,
            topo,
        }
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topo
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &WireStats {
        &self.stats
    }

    /// Starts metering paced control traffic in 10 µs bins and 100 µs windows.
    pub fn enable_meter(&mut self) {
        let ports = *self.port_base.last().unwrap();
        self.meter = Some(OverheadMeter::new(ports, 10 * MICROS, 100 * MICROS));
    }

    pub fn meter_mut(&mut self) -> Option<&mut OverheadMeter> {
        self.meter.as_mut()
    }

    pub fn take_meter(&mut self) -> Option<OverheadMeter> {
        self.meter.take()
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<TraceRow> {
        self.trace.take().unwrap_or_default()
    }

    /// Overrides the loss probability of one link; `1.0` is accepted here.
    pub fn set_link_loss(&mut self, link: LinkId, p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param(format!("loss probability {p} outside [0, 1]")));
        }
        self.loss[link.idx()] = p;
        Ok(())
    }

    /// Schedules a failure; returns the links it takes down.
    pub fn inject_failure(&mut self, f: &FailureSpec, now: Nanos) -> Result<Vec<LinkId>> {
        if f.time < now {
            return Err(Error::config(format!("failure at {} ns lies before current time {now} ns", f.time)));
        }
        let links: Vec<LinkId> = match f.target {
            FailureTarget::Link { link } => {
                if link as usize >= self.topo.edge_count() {
                    return Err(Error::config(format!("unknown link {link}")));
                }
                vec![LinkId(link)]
            }
            FailureTarget::Switch { node } => {
                if node as usize >= self.topo.node_count() {
                    return Err(Error::config(format!("unknown switch {node}")));
                }
                self.topo.ports(NodeId(node)).iter().map(|a| a.link).collect()
            }
        };
        for &l in &links {
            let d = &mut self.down_at[l.idx()];
            *d = Some(d.map_or(f.time, |old| old.min(f.time)));
        }
        Ok(links)
    }

    pub fn is_up(&self, link: LinkId, at: Nanos) -> bool {
        self.down_at[link.idx()].is_none_or(|d| at < d)
    }

    /// Whether a packet that arrives over `link` at `at` survives failures
    /// that happened while it was in flight.
    pub fn arrival_survives(&self, link: LinkId, at: Nanos) -> bool {
        self.is_up(link, at)
    }

    pub fn failed_links(&self) -> Vec<LinkId> {
        (0..self.down_at.len()).filter(|&i| self.down_at[i].is_some()).map(|i| LinkId(i as u32)).collect()
    }

    fn flat(&self, n: NodeId, port: Port) -> usize {
        self.port_base[n.idx()] + port
    }

    /// Sends `meta` out of `from`'s `port` at `now`.
    pub fn transmit(&mut self, from: NodeId, port: Port, meta: PacketMeta, now: Nanos) -> DeliveryOutcome {
        let adj = self.topo.ports(from)[port];
        let link = adj.link;
        let size = meta.size.max(self.cfg.min_frame);
        let outcome = self.transmit_inner(from, port, link, meta.kind, size, now);
        if let Some(tr) = self.trace.as_mut() {
            tr.push(TraceRow { time_ns: now, src: from, dst: adj.neighbor, kind: meta.kind, size, outcome });
        }
        outcome
    }

    fn transmit_inner(
        &mut self,
        from: NodeId,
        port: Port,
        link: LinkId,
        kind: PacketKind,
        size: u32,
        now: Nanos,
    ) -> DeliveryOutcome {
        self.last_departure = now;
        if !self.is_up(link, now) {
            self.stats.dropped += 1;
            return DeliveryOutcome::Dropped(DropReason::LinkDown);
        }
        let params = self.topo.link(link).params;
        let fp = self.flat(from, port);
        let mut start = now.max(self.fifo_free[fp]);
        if kind.is_control() {
            if let Some(budget) = self.cfg.control_budget_bps {
                start = start.max(self.ctrl_next[fp]);
                let slot_end = start + serialization_ns(size, budget);
                self.ctrl_next[fp] = slot_end;
                if let Some(m) = self.meter.as_mut() {
                    m.record(fp, link, start, slot_end, size as f64 * 8.0);
                }
            }
            self.stats.control_bytes_per_link[link.idx()] += size as u64;
        }
        let tx = serialization_ns(size, params.bandwidth_bps);
        self.fifo_free[fp] = start + tx;
        self.last_departure = start;
        self.stats.packets[kind.index()] += 1;
        self.stats.bytes[kind.index()] += size as u64;

        let p = self.loss[link.idx()];
        if p > 0.0 && self.loss_rng.gen::<f64>() < p {
            self.stats.lost += 1;
            return DeliveryOutcome::Lost;
        }
        let j = params.prop_jitter;
        let prop = if j == 0 {
            params.base_prop_delay
        } else {
            params.base_prop_delay - j + self.jitter_rng.gen_range(0..=2 * j)
        };
        DeliveryOutcome::Delivered { at: start + tx + prop + self.cfg.processing_delay }
    }

    /// Time the most recent [`Network::transmit`] call started serializing.
    pub fn last_departure(&self) -> Nanos {
        self.last_departure
    }

    /// Lower bound on the latency of any packet over `link`.
    pub fn min_latency(&self, link: LinkId) -> Nanos {
        let p = self.topo.link(link).params;
        serialization_ns(self.cfg.min_frame, p.bandwidth_bps) + p.base_prop_delay - p.prop_jitter + self.cfg.processing_delay
    }
}
