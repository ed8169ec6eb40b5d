//! Stable-solution enumeration checked against brute force over next-hop
//! assignments, plus the protocol-independent invariants of solutions.

use std::collections::BTreeSet;

use cpcompress::config::{NetworkSpec, Protocol};
use cpcompress::ecs::{compute_ecs, specialize};
use cpcompress::protocols::{BgpAttr, RipAttr};
use cpcompress::srp::{Attr, Edge, NodeId, Pref, Srp, SrpError, TieBreak};
use cpcompress::topo_gen;
use proptest::prelude::*;

type Labels = Vec<Option<Attr>>;

fn srps(spec: &NetworkSpec) -> Vec<Srp> {
    compute_ecs(spec)
        .iter()
        .flat_map(|ec| specialize(spec, ec).unwrap())
        .map(|n| n.srp())
        .collect()
}

fn offer(srp: &Srp, labels: &Labels, u: NodeId, v: NodeId) -> Option<Attr> {
    srp.model.transfer(Edge::new(u, v), labels[v.index()].as_ref())
}

/// Every labelling where each node takes the offer of one chosen neighbor
/// (or nothing) and no node is offered something strictly better.
fn brute_force(srp: &Srp) -> BTreeSet<Labels> {
    let t = &srp.topology;
    let n = t.num_nodes();
    let d = t.dest();
    let options: Vec<Vec<Option<NodeId>>> = t
        .nodes()
        .map(|u| {
            if u == d {
                vec![None]
            } else {
                std::iter::once(None).chain(t.neighbors(u).iter().copied().map(Some)).collect()
            }
        })
        .collect();
    let mut out = BTreeSet::new();
    let mut idx = vec![0usize; n];
    loop {
        let hop: Vec<Option<NodeId>> = (0..n).map(|u| options[u][idx[u]]).collect();
        // labels induced by the choice, as a fixed point from all-bottom
        let mut labels: Labels = vec![None; n];
        labels[d.index()] = Some(srp.model.initial());
        let mut fixed = false;
        for _ in 0..2 * n + 2 {
            let next: Labels = t
                .nodes()
                .map(|u| match hop[u.index()] {
                    _ if u == d => Some(srp.model.initial()),
                    None => None,
                    Some(v) => offer(srp, &labels, u, v),
                })
                .collect();
            if next == labels {
                fixed = true;
                break;
            }
            labels = next;
        }
        if fixed && stable(srp, &labels) {
            out.insert(labels);
        }
        let mut k = 0;
        while k < n {
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == n {
            return out;
        }
    }
}

fn stable(srp: &Srp, labels: &Labels) -> bool {
    let t = &srp.topology;
    t.nodes().filter(|&u| u != t.dest()).all(|u| {
        let offers: Vec<Attr> = t.neighbors(u).iter().filter_map(|&v| offer(srp, labels, u, v)).collect();
        match &labels[u.index()] {
            None => offers.is_empty(),
            Some(l) => offers.contains(l) && offers.iter().all(|o| srp.model.compare(o, l) != Pref::Better),
        }
    })
}

fn enumerated(srp: &Srp) -> BTreeSet<Labels> {
    srp.enumerate_solutions(8).unwrap().into_iter().map(|s| s.labels).collect()
}

fn acyclic_and_rooted(srp: &Srp, fwd: &[Vec<NodeId>], labels: &Labels) -> bool {
    let n = fwd.len();
    // Kahn's algorithm over the fwd union
    let mut indeg = vec![0usize; n];
    for hops in fwd {
        for v in hops {
            indeg[v.index()] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&u| indeg[u] == 0).collect();
    let mut seen = 0;
    while let Some(u) = queue.pop() {
        seen += 1;
        for v in &fwd[u] {
            indeg[v.index()] -= 1;
            if indeg[v.index()] == 0 {
                queue.push(v.index());
            }
        }
    }
    let d = srp.topology.dest();
    let reaches = |mut u: usize| {
        while u != d.index() {
            match fwd[u].first() {
                Some(v) => u = v.index(),
                None => return false,
            }
        }
        true
    };
    seen == n && (0..n).all(|u| labels[u].is_none() || reaches(u))
}

#[test]
fn rip_diamond_has_one_solution() {
    let srp = srps(&topo_gen::rip_diamond()).remove(0);
    let sols = srp.enumerate_solutions(8).unwrap();
    assert_eq!(sols.len(), 1);
    let hops: Vec<u8> = sols[0]
        .labels
        .iter()
        .map(|l| match l {
            Some(Attr::Rip(RipAttr { hops })) => *hops,
            other => panic!("{other:?}"),
        })
        .collect();
    assert_eq!(hops, [0, 1, 1, 2]);
    // a splits over both b nodes
    assert_eq!(sols[0].fwd[3], [NodeId(1), NodeId(2)]);
}

#[test]
fn local_pref_gadget_has_one_solution_per_direct_node() {
    let srp = srps(&topo_gen::lp_gadget()).remove(0);
    let sols = srp.enumerate_solutions(8).unwrap();
    assert_eq!(sols, {
        let mut v = sols.clone();
        v.sort();
        v
    });
    assert_eq!(sols.len(), 3);
    for s in &sols {
        let direct: Vec<usize> = (2..5).filter(|&b| s.fwd[b] == [NodeId(0)]).collect();
        assert_eq!(direct.len(), 1);
        let b = direct[0];
        assert_eq!(s.fwd[1], [NodeId(b as u32)]);
        for other in (2..5).filter(|&x| x != b) {
            let Some(Attr::Bgp(BgpAttr { local_pref, as_path, .. })) = &s.labels[other] else { panic!() };
            assert_eq!(*local_pref, 200);
            assert_eq!(as_path, &[NodeId(1), NodeId(b as u32), NodeId(0)]);
        }
    }
    assert_eq!(enumerated(&srp), brute_force(&srp));
}

#[test]
fn bad_gadget_diverges() {
    let srp = srps(&topo_gen::bad_gadget()).remove(0);
    assert!(srp.enumerate_solutions(8).unwrap().is_empty());
    assert!(brute_force(&srp).is_empty());
    let r = srp.simulate(&TieBreak::lowest_id(4));
    assert!(matches!(r, Err(SrpError::Divergence { .. })), "{r:?}");
}

#[test]
fn static_loop_is_stable() {
    let srp = srps(&topo_gen::static_loop()).remove(0);
    let sols = srp.enumerate_solutions(8).unwrap();
    assert_eq!(sols.len(), 1);
    assert_eq!(sols[0].fwd, [vec![], vec![NodeId(2)], vec![NodeId(1)]]);
}

#[test]
fn enumeration_refuses_large_instances() {
    let srp = srps(&topo_gen::ring(12)).remove(0);
    assert_eq!(
        srp.enumerate_solutions(10).unwrap_err(),
        SrpError::InstanceTooLarge { nodes: 12, limit: 10 }
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn enumeration_matches_brute_force(seed in 0u64..100_000) {
        let spec = topo_gen::random_network(seed, 6);
        for srp in srps(&spec) {
            prop_assert_eq!(enumerated(&srp), brute_force(&srp));
        }
    }

    #[test]
    fn solutions_are_stable_and_simulation_finds_one(seed in 0u64..100_000) {
        let spec = topo_gen::random_network(seed, 7);
        let protocol = spec.protocol().unwrap();
        for srp in srps(&spec) {
            let sols = srp.enumerate_solutions(8).unwrap();
            for s in &sols {
                prop_assert!(srp.is_stable(&s.labels));
                if protocol != Protocol::Static {
                    prop_assert!(acyclic_and_rooted(&srp, &s.fwd, &s.labels));
                }
            }
            if let Ok(sim) = srp.simulate(&TieBreak::lowest_id(srp.topology.num_nodes())) {
                prop_assert!(sols.contains(&sim));
            }
        }
    }
}

