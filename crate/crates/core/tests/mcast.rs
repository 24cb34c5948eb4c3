mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use reactsim::mcast::{self, probe_detection, Deployment, GroupConfig, McastConfig, McastScenario};
use reactsim::simcore::{FailureSpec, MICROS};
use reactsim::topo::{build_fat_tree, LinkId, NodeId, Topology};

fn fat(k: usize) -> Arc<Topology> {
    Arc::new(build_fat_tree(k).unwrap())
}

fn setup(k: usize, groups: usize, avg_frac: f64, seed: u64) -> (Arc<Topology>, McastConfig, Deployment) {
    let t = fat(k);
    let cfg = McastConfig { groups: GroupConfig { count: groups, avg_frac, ..Default::default() }, ..Default::default() };
    let sc = McastScenario::new(cfg, vec![], seed);
    let dep = mcast::deploy(&t, &cfg, &sc.engine, seed).unwrap();
    (t, cfg, dep)
}

fn scenario(cfg: McastConfig, failures: Vec<FailureSpec>, seed: u64) -> McastScenario {
    McastScenario::new(cfg, failures, seed)
}

/// Groups whose deployed tree has an edge between the ends of one of `links`.
fn scan_affected(t: &Topology, dep: &Deployment, links: &[LinkId]) -> Vec<u32> {
    let ends: BTreeSet<(NodeId, NodeId)> = links
        .iter()
        .flat_map(|&l| {
            let e = t.link(l);
            [(e.a, e.b), (e.b, e.a)]
        })
        .collect();
    dep.trees
        .iter()
        .enumerate()
        .filter(|(_, tr)| tr.edges.iter().any(|e| ends.contains(e)))
        .map(|(g, _)| g as u32)
        .collect()
}

#[test]
fn affected_groups_match_a_scan_of_tree_edges() {
    let (t, _, dep) = setup(8, 400, 0.05, 2);
    for start in [0usize, 37, 101, 200] {
        let links: Vec<LinkId> = (start..start + 3).map(|i| LinkId((i % t.edge_count()) as u32)).collect();
        assert_eq!(dep.index.lookup(&links), scan_affected(&t, &dep, &links));
    }
}

#[test]
fn deployed_trees_reach_every_receiver_on_shortest_spanner_paths() {
    let (t, _, dep) = setup(8, 200, 0.05, 5);
    for (g, tr) in dep.groups.iter().zip(&dep.trees) {
        assert!(tr.links(&t).is_ok());
        let depth = mcast::layers(&t, &dep.spanner, g.src_tor());
        for d in g.dst_tors() {
            assert_eq!(tr.depth_of(d), depth[d.idx()]);
        }
    }
}

#[test]
fn probe_detection_closed_form() {
    let i = 50 * MICROS;
    // Last answered probe at 150 µs, three misses, noticed at the next check.
    assert_eq!(probe_detection(157 * MICROS, i, 3), 350 * MICROS);
    // A failure exactly at a probe instant loses that probe.
    assert_eq!(probe_detection(150 * MICROS, i, 3), 300 * MICROS);
    assert_eq!(probe_detection(150 * MICROS + 1, i, 1), 250 * MICROS);
}

#[test]
fn switch_failure_recovers_with_consistent_bitmaps() {
    let (t, cfg, dep) = setup(8, 300, 0.05, 7);
    let (victim, count) = mcast::worst_switch(&t, &dep);
    assert!(count > 0);
    let r = mcast::run(t.clone(), &dep, &scenario(cfg, vec![FailureSpec::switch(157 * MICROS, victim)], 7)).unwrap();
    let links: Vec<LinkId> = t.ports(victim).iter().map(|a| a.link).collect();
    assert_eq!(r.affected, scan_affected(&t, &dep, &links));
    assert!(r.unrecoverable.is_empty());
    assert_eq!(r.first_detection, Some(350 * MICROS));
    // Detectors: the live neighbors of the victim over links that carry groups.
    let mut want: Vec<NodeId> =
        t.ports(victim).iter().filter(|a| dep.index.is_active(a.link)).map(|a| a.neighbor).collect();
    want.sort();
    let mut got: Vec<NodeId> = r.detections.iter().map(|d| d.node).collect();
    got.sort();
    assert_eq!(got, want);

    let tree = r.recovery_tree.as_ref().unwrap();
    assert!(!tree.contains(victim));
    for (i, &g) in r.affected.iter().enumerate() {
        // Oracle: a switch is marked iff its recovery-subtree holds a member.
        let mut marked = BTreeSet::new();
        for v in dep.groups[g as usize].member_tors() {
            let mut x = v;
            loop {
                if !marked.insert(x) {
                    break;
                }
                match tree.parent[x.idx()] {
                    Some((p, _)) => x = p,
                    None => break,
                }
            }
        }
        for v in t.nodes().filter(|&v| v != victim) {
            let b = &r.bitmaps[v.idx()];
            assert_eq!(b.in_tree.get(i), marked.contains(&v), "group {g} switch {v:?}");
            let or = b.own.get(i) || b.is_son.iter().any(|(_, s)| s.get(i));
            assert_eq!(b.in_tree.get(i), or);
        }
    }
    assert!(r.delivery_ok);
    assert!(r.bitmaps_consistent);
    let fast = r.fast_recovery_ns().unwrap();
    let full = r.full_recovery_ns().unwrap();
    assert!(fast < full);
    assert!(fast > 150 * MICROS, "fast recovery includes detection: {fast}");
}

#[test]
fn new_trees_are_shortest_paths_on_the_new_spanner() {
    let (t, cfg, dep) = setup(8, 300, 0.05, 11);
    let (victim, _) = mcast::worst_switch(&t, &dep);
    let r = mcast::run(t.clone(), &dep, &scenario(cfg, vec![FailureSpec::switch(157 * MICROS, victim)], 11)).unwrap();
    assert!(r.spt_ok);
    assert_eq!(r.new_trees.len(), r.affected.len() - r.unrecoverable.len());
    for (g, tr) in &r.new_trees {
        let links = tr.links(&t).unwrap();
        assert!(links.iter().all(|l| {
            let e = t.link(*l);
            e.a != victim && e.b != victim
        }));
        for d in dep.groups[*g as usize].dst_tors() {
            assert!(tr.depth_of(d).is_some());
        }
    }
    assert!(r.stretch.iter().all(|s| s.2 >= 1.0));
    assert!(r.max_stretch() <= 3.0);
}

#[test]
fn unused_link_failure_needs_no_recovery() {
    let (t, cfg, dep) = setup(8, 50, 0.05, 3);
    let idle = (0..t.edge_count() as u32).map(LinkId).find(|&l| !dep.index.is_active(l)).expect("an idle link");
    let r = mcast::run(t.clone(), &dep, &scenario(cfg, vec![FailureSpec::link(157 * MICROS, idle)], 3)).unwrap();
    assert!(r.affected.is_empty());
    assert!(r.detections.is_empty());
    assert_eq!(r.fast_done, None);
}

#[test]
fn isolated_tor_makes_its_groups_unrecoverable() {
    let (t, cfg, dep) = setup(4, 60, 0.3, 4);
    let tor = dep.groups[0].src_tor();
    let fails: Vec<FailureSpec> = t.ports(tor).iter().map(|a| FailureSpec::link(157 * MICROS, a.link)).collect();
    let r = mcast::run(t.clone(), &dep, &scenario(cfg, fails, 4)).unwrap();
    let want: Vec<u32> = r
        .affected
        .iter()
        .copied()
        .filter(|&g| dep.groups[g as usize].member_tors().contains(&tor))
        .collect();
    assert!(!want.is_empty());
    assert_eq!(r.unrecoverable, want);
    assert!(r.delivery_ok);
    assert!(r.new_trees.iter().all(|(g, _)| !want.contains(g)));
}

#[test]
fn failure_after_detection_is_rejected() {
    let (t, cfg, dep) = setup(4, 40, 0.3, 1);
    let (a, _) = mcast::busiest_links(&dep)[0];
    let (b, _) = mcast::busiest_links(&dep)[1];
    let fails = vec![FailureSpec::link(100 * MICROS, a), FailureSpec::link(900 * MICROS, b)];
    assert!(mcast::run(t, &dep, &scenario(cfg, fails, 1)).is_err());
}

#[test]
fn spanner_headers_are_smaller_than_naive_ones() {
    let (t, _, dep) = setup(8, 300, 0.1, 9);
    let h = mcast::header_sizes(&t, &dep, 9).unwrap();
    let naive: u32 = h.iter().map(|r| r.1).sum();
    let span: u32 = h.iter().map(|r| r.2).sum();
    assert!(naive > span, "naive {naive} spanner {span}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn any_single_link_failure_recovers_exactly(seed in 0u64..1000, pick in 0usize..1000) {
        let (t, cfg, dep) = setup(4, 40, 0.3, seed);
        let busy = mcast::busiest_links(&dep);
        let active: Vec<LinkId> = busy.iter().filter(|b| b.1 > 0).map(|b| b.0).collect();
        let l = active[pick % active.len()];
        let r = mcast::run(t.clone(), &dep, &scenario(cfg, vec![FailureSpec::link(157 * MICROS, l)], seed)).unwrap();
        prop_assert_eq!(r.affected.clone(), scan_affected(&t, &dep, &[l]));
        prop_assert!(r.delivery_ok);
        prop_assert!(r.bitmaps_consistent);
        prop_assert!(r.spt_ok);
        prop_assert!(r.fast_recovery_ns().unwrap() <= r.full_recovery_ns().unwrap());
    }
}
