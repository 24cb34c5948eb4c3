use std::fmt::Debug;

use super::program::Ctx;
use super::transport::{Class, Delivery, Frame, Runtime};
use super::{batch_by_port, PhaseEnv, PhaseReport};
use crate::simcore::{Nanos, Network, PacketKind};
use crate::topo::{NodeId, Port};

/// An event-driven algorithm with no round structure.
pub trait AsyncProgram {
    type Msg: Clone + Debug;

    fn payload_bytes(&self, msg: &Self::Msg) -> u32;

    /// Called once on every live node when the phase starts.
    fn start(&mut self, _ctx: &mut Ctx<Self::Msg>) {}

    fn on_message(&mut self, ctx: &mut Ctx<Self::Msg>, port: Port, msg: Self::Msg);

    /// A local timer to arm when the phase starts.
    fn wake_at(&self) -> Option<Nanos> {
        None
    }

    fn on_wake(&mut self, _ctx: &mut Ctx<Self::Msg>) {}
}

enum Input<M> {
    Start,
    Wake,
    Msg(Port, M),
}

/// Runs until no message is left in flight. The phase ends at the last
/// delivery to a program.
pub fn run_async<P: AsyncProgram>(net: Network, env: PhaseEnv, progs: &mut [P]) -> (Network, PhaseReport) {
    let topo = net.topology().clone();
    let cfg = env.cfg;
    let mut rt: Runtime<Vec<P::Msg>> = Runtime::new(net, env.scope, cfg.rto(&topo), env.start);
    rt.set_horizon(env.horizon);
    let live: Vec<Vec<Port>> = topo.nodes().map(|v| rt.live_ports(v)).collect();
    let neighbors: Vec<Vec<NodeId>> = topo.nodes().map(|v| topo.neighbors(v).collect()).collect();

    let dispatch = |rt: &mut Runtime<Vec<P::Msg>>, progs: &mut [P], node: NodeId, input: Input<P::Msg>| {
        let i = node.idx();
        let mut out = Vec::new();
        let (mut logical, mut wasted) = (0, 0);
        {
            let mut ctx = Ctx::new(node, 0, rt.now(), cfg.arithmetic, &live[i], &neighbors[i], &mut out, &mut logical, &mut wasted);
            match input {
                Input::Start => progs[i].start(&mut ctx),
                Input::Wake => progs[i].on_wake(&mut ctx),
                Input::Msg(port, m) => progs[i].on_message(&mut ctx, port, m),
            }
        }
        rt.counters.logical_sends += logical;
        rt.counters.wasted_copies += wasted;
        for (port, msgs) in batch_by_port(out, cfg.p_batch) {
            let payload: u32 = msgs.iter().map(|m| progs[i].payload_bytes(m)).sum();
            let size = cfg.packet_size(payload);
            rt.send(node, port, Frame { class: Class::Algo, kind: PacketKind::Algo, size, body: msgs });
        }
    };

    for v in topo.nodes() {
        if rt.alive(v) {
            if let Some(t) = progs[v.idx()].wake_at() {
                rt.schedule(v, t.max(env.start), 0);
            }
            dispatch(&mut rt, progs, v, Input::Start);
        }
    }
    let mut end = env.start;
    while let Some((t, d)) = rt.next() {
        match d {
            Delivery::Msg { node, port, body } => {
                end = t;
                for m in body {
                    dispatch(&mut rt, progs, node, Input::Msg(port, m));
                }
            }
            Delivery::App { node, .. } => dispatch(&mut rt, progs, node, Input::Wake),
            Delivery::Acked { .. } => {}
        }
    }
    let converged = !rt.hit_horizon();
    let report = PhaseReport {
        start: env.start,
        end,
        converged,
        rounds: 0,
        halted_at: vec![None; topo.node_count()],
        counters: rt.counters.clone(),
    };
    (rt.into_network(), report)
}
