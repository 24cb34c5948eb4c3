use std::sync::Arc;

use super::*;
use crate::simcore::{Network, PacketKind};
use crate::topo::{build_fat_tree, load_edge_list, LinkParams, Port};

/// BFS-style flood: the seed broadcasts in round 0, every node adopts the
/// lowest-id sender among the first round that reaches it and rebroadcasts.
#[derive(Clone, Default)]
struct Flood {
    seed: bool,
    father: Option<NodeId>,
    visited: bool,
    received: Vec<usize>,
}

impl Program for Flood {
    type Msg = u32;
    fn payload_bytes(&self, _: &u32) -> u32 {
        4
    }
    fn round(&mut self, ctx: &mut Ctx<u32>, inbox: &[(Port, u32)]) {
        self.received.push(inbox.len());
        if ctx.round == 0 && self.seed {
            self.visited = true;
            ctx.broadcast(0);
            return;
        }
        if self.visited || inbox.is_empty() {
            return;
        }
        self.visited = true;
        self.father = inbox.iter().map(|&(p, _)| ctx.neighbor(p)).min();
        ctx.broadcast(ctx.round as u32);
    }
    fn done(&self) -> bool {
        true
    }
}

fn net(t: Topology, cfg: &EngineConfig, seed: u64) -> Network {
    Network::new(Arc::new(t), cfg.net_config(), seed)
}

fn flood_progs(n: usize, seed: usize) -> Vec<Flood> {
    let mut v = vec![Flood::default(); n];
    v[seed].seed = true;
    v
}

#[test]
fn single_node_beta_needs_no_messages() {
    let t = Topology::with_nodes(1);
    let cfg = EngineConfig::default();
    let tree = build_sync_tree(&t, &Scope::full(&t)).unwrap();
    let mut progs = flood_progs(1, 0);
    let (n, rep) = run_beta(net(t.clone(), &cfg, 1), PhaseEnv::new(&cfg, Scope::full(&t), 0), &tree, &mut progs);
    assert!(rep.converged);
    assert_eq!(n.stats().control_packets(), 0);
    assert_eq!(rep.end, 0);
}

#[test]
fn path_of_three_one_round_sync_complete_counts() {
    let t = load_edge_list("0 1\n1 2").unwrap();
    let cfg = EngineConfig::default();
    let tree = build_sync_tree(&t, &Scope::full(&t)).unwrap();
    assert_eq!(tree.root, NodeId(1));
    // Nobody seeded: round 0 is already quiet.
    let mut progs = vec![Flood::default(); 3];
    let (n, rep) = run_beta(net(t.clone(), &cfg, 1), PhaseEnv::new(&cfg, Scope::full(&t), 0), &tree, &mut progs);
    assert!(rep.converged);
    // One round: two SYNC and two COMPLETE, then the two terminating SYNCs.
    assert_eq!(n.stats().packets_of(PacketKind::Complete), 2);
    assert_eq!(n.stats().packets_of(PacketKind::Sync), 2 + 2);
    assert_eq!(n.stats().packets_of(PacketKind::Algo), 0);
}

#[test]
fn beta_flood_path_depths_and_rounds() {
    let t = load_edge_list("0 1\n1 2").unwrap();
    let cfg = EngineConfig::default();
    let tree = build_sync_tree(&t, &Scope::full(&t)).unwrap();
    let mut progs = flood_progs(3, 0);
    let (_, rep) = run_beta(net(t.clone(), &cfg, 1), PhaseEnv::new(&cfg, Scope::full(&t), 0), &tree, &mut progs);
    assert!(rep.converged);
    assert_eq!(progs[1].father, Some(NodeId(0)));
    assert_eq!(progs[2].father, Some(NodeId(1)));
    assert_eq!(rep.rounds, 2);
}

#[test]
fn alpha_and_beta_agree_on_fat_tree_flood() {
    let t = build_fat_tree(4).unwrap();
    let n = t.node_count();
    let tree = build_sync_tree(&t, &Scope::full(&t)).unwrap();
    let mut fathers = Vec::new();
    for sync in [Synchronizer::Alpha, Synchronizer::Beta] {
        let cfg = EngineConfig { synchronizer: sync, ..Default::default() };
        let mut progs = flood_progs(n, 7);
        let env = PhaseEnv::new(&cfg, Scope::full(&t), 0);
        let (_, rep) = match sync {
            Synchronizer::Alpha => run_alpha(net(t.clone(), &cfg, 3), env, &tree, &mut progs),
            Synchronizer::Beta => run_beta(net(t.clone(), &cfg, 3), env, &tree, &mut progs),
        };
        assert!(rep.converged, "{sync:?}");
        assert!(progs.iter().all(|p| p.visited));
        fathers.push(progs.iter().map(|p| p.father).collect::<Vec<_>>());
    }
    assert_eq!(fathers[0], fathers[1]);
}

#[test]
fn alpha_two_nodes_lockstep() {
    let t = load_edge_list("0 1").unwrap();
    let cfg = EngineConfig { synchronizer: Synchronizer::Alpha, ..Default::default() };
    let tree = build_sync_tree(&t, &Scope::full(&t)).unwrap();
    let mut progs = flood_progs(2, 0);
    let (_, rep) = run_alpha(net(t.clone(), &cfg, 1), PhaseEnv::new(&cfg, Scope::full(&t), 0), &tree, &mut progs);
    assert!(rep.converged);
    assert_eq!(progs[1].father, Some(NodeId(0)));
    // Both executed the same number of rounds up to termination, give or take one.
    let (a, b) = (progs[0].received.len() as i64, progs[1].received.len() as i64);
    assert!((a - b).abs() <= 1);
}

/// Leaves 1 and 2 send a real message in round 0, leaf 3 stays silent.
#[derive(Clone, Default)]
struct Talk {
    speak: bool,
    inboxes: Vec<usize>,
}

impl Program for Talk {
    type Msg = u8;
    fn payload_bytes(&self, _: &u8) -> u32 {
        1
    }
    fn round(&mut self, ctx: &mut Ctx<u8>, inbox: &[(Port, u8)]) {
        self.inboxes.push(inbox.len());
        if ctx.round == 0 && self.speak {
            ctx.broadcast(1);
        }
    }
    fn done(&self) -> bool {
        true
    }
}

#[test]
fn alpha_waits_for_no_msg_from_silent_neighbor() {
    let t = load_edge_list("0 1\n0 2\n0 3").unwrap();
    let cfg = EngineConfig { synchronizer: Synchronizer::Alpha, ..Default::default() };
    let tree = build_sync_tree(&t, &Scope::full(&t)).unwrap();
    let mut progs = vec![Talk::default(); 4];
    progs[1].speak = true;
    progs[2].speak = true;
    let (n, rep) = run_alpha(net(t.clone(), &cfg, 1), PhaseEnv::new(&cfg, Scope::full(&t), 0), &tree, &mut progs);
    assert!(rep.converged);
    assert_eq!(progs[0].inboxes[1], 2);
    // Round 0 puts one envelope on each direction of every link; the hub's
    // envelope from leaf 3 is the single no-msg it must wait for.
    assert!(n.stats().packets_of(PacketKind::Algo) >= 6);
}

#[test]
fn one_send_lossless_is_one_frame_and_one_ack() {
    let t = load_edge_list("0 1").unwrap();
    let cfg = EngineConfig::default();
    let nw = net(t.clone(), &cfg, 1);
    let mut rt: Runtime<u8> = Runtime::new(nw, Scope::full(&t), cfg.rto(&t), 0);
    rt.send(NodeId(0), 0, Frame { class: Class::Algo, kind: PacketKind::Algo, size: 64, body: 9 });
    let mut got = Vec::new();
    while let Some((_, d)) = rt.next() {
        if let Delivery::Msg { body, .. } = d {
            got.push(body);
        }
    }
    assert_eq!(got, vec![9]);
    let s = rt.network().stats();
    assert_eq!((s.packets_of(PacketKind::Algo), s.packets_of(PacketKind::Ack)), (1, 1));
}

#[test]
fn lost_first_copy_is_retransmitted_and_delivered_once() {
    let t = load_edge_list("0 1").unwrap();
    let cfg = EngineConfig { t_rto_ns: Some(30_000), ..Default::default() };
    let mut nw = net(t.clone(), &cfg, 1);
    nw.set_link_loss(LinkId(0), 1.0).unwrap();
    let mut rt: Runtime<u8> = Runtime::new(nw, Scope::full(&t), cfg.rto(&t), 0);
    rt.send(NodeId(0), 0, Frame { class: Class::Algo, kind: PacketKind::Algo, size: 64, body: 5 });
    rt.set_horizon(20_000);
    assert!(rt.next().is_none());
    rt.network_mut().set_link_loss(LinkId(0), 0.0).unwrap();
    rt.set_horizon(u64::MAX);
    let mut got = Vec::new();
    while let Some((t, d)) = rt.next() {
        if let Delivery::Msg { body, .. } = d {
            assert!(t >= 30_000);
            got.push(body);
        }
    }
    assert_eq!(got, vec![5]);
    assert!(rt.counters.retransmissions >= 1);
}

#[test]
fn duplicates_are_suppressed_when_acks_are_lost() {
    let t = load_edge_list("0 1").unwrap();
    let cfg = EngineConfig { t_rto_ns: Some(5_000), ..Default::default() };
    let params = LinkParams { loss_rate: 0.3, ..Default::default() };
    let mut topo = t.clone();
    topo.set_all_link_params(params).unwrap();
    let nw = net(topo.clone(), &cfg, 11);
    let mut rt: Runtime<u32> = Runtime::new(nw, Scope::full(&topo), cfg.rto(&topo), 0);
    for i in 0..200 {
        rt.send(NodeId(0), 0, Frame { class: Class::Algo, kind: PacketKind::Algo, size: 64, body: i });
    }
    let mut got = Vec::new();
    while let Some((_, d)) = rt.next() {
        if let Delivery::Msg { body, .. } = d {
            got.push(body);
        }
    }
    assert_eq!(got, (0..200).collect::<Vec<_>>());
    assert!(rt.counters.duplicates > 0);
}

/// Hub multicasts to a subset of its ports.
struct Mc {
    mask: Vec<bool>,
}

impl Program for Mc {
    type Msg = u8;
    fn payload_bytes(&self, _: &u8) -> u32 {
        1
    }
    fn round(&mut self, ctx: &mut Ctx<u8>, _inbox: &[(Port, u8)]) {
        if ctx.round == 0 && !self.mask.is_empty() {
            let mask = self.mask.clone();
            ctx.multicast(|p| mask[p], 1);
        }
    }
    fn done(&self) -> bool {
        true
    }
}

#[test]
fn dynamic_multicast_accounting() {
    let t = load_edge_list("0 1\n0 2\n0 3\n0 4").unwrap();
    let cfg = EngineConfig::default();
    let tree = build_sync_tree(&t, &Scope::full(&t)).unwrap();
    for (mask, wire, wasted) in [(vec![true; 4], 4, 0), (vec![false; 4], 0, 4)] {
        let mut progs: Vec<Mc> = (0..5).map(|i| Mc { mask: if i == 0 { mask.clone() } else { vec![] } }).collect();
        let (n, rep) = run_beta(net(t.clone(), &cfg, 1), PhaseEnv::new(&cfg, Scope::full(&t), 0), &tree, &mut progs);
        assert_eq!(n.stats().packets_of(PacketKind::Algo), wire);
        assert_eq!(rep.counters.wasted_copies, wasted);
        assert_eq!(rep.counters.logical_sends, 1);
    }
}

#[test]
fn batching_with_p1_matches_unbatched_wire() {
    let t = load_edge_list("0 1\n1 2\n1 3").unwrap();
    let tree = build_sync_tree(&t, &Scope::full(&t)).unwrap();
    let run = |p_batch| {
        let cfg = EngineConfig { p_batch, ..Default::default() };
        let mut progs = flood_progs(4, 0);
        let (n, _) = run_beta(net(t.clone(), &cfg, 1), PhaseEnv::new(&cfg, Scope::full(&t), 0), &tree, &mut progs);
        (n.stats().packets_of(PacketKind::Algo), n.stats().bytes[PacketKind::Algo.index()])
    };
    assert_eq!(run(1), run(1));
    assert_eq!(run(1).0, run(24).0);
}

#[test]
fn beta_under_loss_still_converges_to_same_answer() {
    let mut t = build_fat_tree(4).unwrap();
    let tree = build_sync_tree(&t, &Scope::full(&t)).unwrap();
    let cfg = EngineConfig::default();
    let mut clean = flood_progs(t.node_count(), 3);
    let (_, r0) = run_beta(net(t.clone(), &cfg, 5), PhaseEnv::new(&cfg, Scope::full(&t), 0), &tree, &mut clean);
    t.set_loss_rate(0.05).unwrap();
    let mut lossy = flood_progs(t.node_count(), 3);
    let (_, r1) = run_beta(net(t.clone(), &cfg, 5), PhaseEnv::new(&cfg, Scope::full(&t), 0), &tree, &mut lossy);
    assert!(r0.converged && r1.converged);
    let f = |v: &[Flood]| v.iter().map(|p| p.father).collect::<Vec<_>>();
    assert_eq!(f(&clean), f(&lossy));
    assert!(r1.counters.retransmissions > 0);
}

/// Async echo: every node forwards the first token it sees.
#[derive(Default)]
struct Echo {
    origin: bool,
    seen: bool,
}

impl AsyncProgram for Echo {
    type Msg = ();
    fn payload_bytes(&self, _: &()) -> u32 {
        0
    }
    fn start(&mut self, ctx: &mut Ctx<()>) {
        if self.origin {
            self.seen = true;
            ctx.broadcast(());
        }
    }
    fn on_message(&mut self, ctx: &mut Ctx<()>, port: Port, _msg: ()) {
        if !self.seen {
            self.seen = true;
            ctx.multicast(|p| p != port, ());
        }
    }
}

#[test]
fn async_flood_reaches_everyone() {
    let t = build_fat_tree(4).unwrap();
    let cfg = EngineConfig::default();
    let mut progs: Vec<Echo> = (0..t.node_count()).map(|i| Echo { origin: i == 0, seen: false }).collect();
    let (_, rep) = run_async(net(t.clone(), &cfg, 1), PhaseEnv::new(&cfg, Scope::full(&t), 0), &mut progs);
    assert!(rep.converged);
    assert!(progs.iter().all(|p| p.seen));
    assert!(rep.end > 0);
}
