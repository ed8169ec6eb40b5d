//! Destination classes checked address by address: every originated
//! address lands in exactly one class, and all addresses of a class see
//! the same origins, policies, ACLs and static routes.

use std::collections::BTreeSet;

use cpcompress::config::{Acl, AclEntry, Clause, Match, NetworkSpec, Prefix, Protocol, RoutePolicy, StaticRoute, Verdict};
use cpcompress::ecs::{compute_ecs, specialize, DestEquivClass};
use cpcompress::srp::NodeId;
use cpcompress::topo_gen::{self, Kind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn host(addr: u32) -> Prefix {
    Prefix::new(addr, 32).unwrap()
}

fn random_prefix(rng: &mut ChaCha8Rng) -> Prefix {
    let len = rng.random_range(16..=26u8);
    let addr = (10 << 24) | (rng.random_range(0..1u32 << 16) & (u32::MAX << (32 - len)));
    Prefix::new(addr, len).unwrap()
}

/// Four BGP nodes in a line with random nested originations, prefix-list
/// policies, ACLs and static routes under 10.0.0.0/16.
fn random_spec(seed: u64) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = NetworkSpec::new();
    let v: Vec<NodeId> = (0..4).map(|i| spec.add_node(&format!("n{i}"), i + 1, &[Protocol::Bgp])).collect();
    for w in v.windows(2) {
        spec.add_link(w[0], w[1]);
    }
    for _ in 0..rng.random_range(1..=5) {
        let u = rng.random_range(0..4);
        let p = random_prefix(&mut rng);
        if !spec.origins[u].contains(&p) {
            spec.origins[u].push(p);
        }
    }
    for i in 0..rng.random_range(0..=3) {
        let k = rng.random_range(1..=2);
        let prefixes = (0..k).map(|_| random_prefix(&mut rng)).collect();
        let clause = Clause {
            matches: Match { prefixes: Some(prefixes), ..Match::default() },
            action: if rng.random_bool(0.5) { Verdict::Deny } else { Verdict::Permit },
            set_local_pref: rng.random_bool(0.5).then_some(200),
            ..Clause::permit()
        };
        let name = format!("p{i}");
        spec.policies.insert(name.clone(), RoutePolicy { clauses: vec![clause, Clause::permit()] });
        let (a, b) = (rng.random_range(0..3), rng.random_range(0..2));
        spec.interface_mut(v[a], v[a + 1]).unwrap().import_policy = (b == 0).then(|| name.clone());
        spec.interface_mut(v[a + 1], v[a]).unwrap().export_policy = (b == 1).then_some(name);
    }
    if rng.random_bool(0.5) {
        let entries = vec![
            AclEntry { prefix: random_prefix(&mut rng), action: Verdict::Deny },
            AclEntry { prefix: Prefix::new(10 << 24, 8).unwrap(), action: Verdict::Permit },
        ];
        spec.acls.insert("acl".into(), Acl { entries });
        spec.interface_mut(v[1], v[2]).unwrap().acl = Some("acl".into());
    }
    for _ in 0..rng.random_range(0..=2) {
        let u = rng.random_range(1..4);
        spec.static_routes[u].push(StaticRoute { prefix: random_prefix(&mut rng), next_hop: v[u - 1] });
    }
    spec
}

/// Everything that can depend on the destination address.
fn behavior(spec: &NetworkSpec, p: Prefix) -> String {
    let lpm = |list: &[Prefix]| list.iter().filter(|q| q.contains(p)).map(|q| q.len()).max();
    let best = spec.origins.iter().filter_map(|o| lpm(o)).max();
    let origins: Vec<usize> = (0..spec.num_nodes()).filter(|&u| best.is_some() && lpm(&spec.origins[u]) == best).collect();
    let policies: Vec<_> = spec.policies.values().map(|pol| pol.specialize(p, Protocol::Bgp)).collect();
    let acls: Vec<bool> = spec.acls.values().map(|a| a.permits(p)).collect();
    let statics: Vec<BTreeSet<NodeId>> = spec
        .static_routes
        .iter()
        .map(|routes| {
            let prefixes: Vec<Prefix> = routes.iter().map(|r| r.prefix).collect();
            let best = lpm(&prefixes);
            routes
                .iter()
                .filter(|r| r.prefix.contains(p) && Some(r.prefix.len()) == best)
                .map(|r| r.next_hop)
                .collect()
        })
        .collect();
    format!("{origins:?} {policies:?} {acls:?} {statics:?}")
}

fn class_of(ecs: &[DestEquivClass], addr: u32) -> Vec<usize> {
    (0..ecs.len()).filter(|&i| ecs[i].ranges.iter().any(|r| r.contains(host(addr)))).collect()
}

fn check(spec: &NetworkSpec, seed: u64) -> Result<(), TestCaseError> {
    let ecs = compute_ecs(spec);
    let originated: Vec<Prefix> = spec.origins.iter().flatten().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    // ends of every interesting prefix, their neighbors, and random points
    let mut probes: BTreeSet<u32> = BTreeSet::new();
    let mut marks: Vec<Prefix> = originated.clone();
    marks.extend(ecs.iter().flat_map(|ec| ec.ranges.iter().copied()));
    for q in marks {
        let last = q.addr() | !(u32::MAX.checked_shl(32 - q.len() as u32).unwrap_or(0));
        probes.extend([q.addr(), q.addr().wrapping_sub(1), last, last.wrapping_add(1)]);
    }
    probes.extend((0..64).map(|_| (10 << 24) | rng.random_range(0..1u32 << 16)));
    for addr in probes {
        let inside = originated.iter().any(|q| q.contains(host(addr)));
        let hits = class_of(&ecs, addr);
        prop_assert_eq!(hits.len(), usize::from(inside), "address {} in classes {:?}", host(addr), hits);
        if let Some(&i) = hits.first() {
            let rep = ecs[i].representative();
            prop_assert_eq!(behavior(spec, host(addr)), behavior(spec, rep), "address {}", host(addr));
        }
    }
    for ec in &ecs {
        let origins: Vec<NodeId> = specialize(spec, ec).unwrap().iter().map(|n| n.dest).collect();
        prop_assert_eq!(&origins, &ec.origins);
        prop_assert!(!ec.origins.is_empty());
    }
    let mut reps: Vec<Prefix> = ecs.iter().map(|e| e.representative()).collect();
    let sorted = {
        let mut s = reps.clone();
        s.sort();
        s
    };
    prop_assert_eq!(&reps, &sorted);
    reps.dedup();
    prop_assert_eq!(reps.len(), ecs.len());
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn classes_partition_and_agree(seed: u64) {
        check(&random_spec(seed), seed)?;
    }
}

#[test]
fn fattree_has_one_class_per_tor() {
    let spec = topo_gen::gen(Kind::Fattree, 180, 0).unwrap();
    let ecs = compute_ecs(&spec);
    assert_eq!(ecs.len(), 72);
    assert!(ecs.iter().all(|ec| ec.origins.len() == 1 && ec.ranges.len() == 1));
    check(&spec, 0).unwrap();
}

#[test]
fn nested_origin_is_carved_out() {
    let mut spec = NetworkSpec::new();
    let a = spec.add_node("a", 1, &[Protocol::Bgp]);
    let b = spec.add_node("b", 2, &[Protocol::Bgp]);
    spec.add_link(a, b);
    spec.origins[0] = vec!["10.0.0.0/16".parse().unwrap()];
    spec.origins[1] = vec!["10.0.128.0/17".parse().unwrap()];
    let ecs = compute_ecs(&spec);
    assert_eq!(ecs.len(), 2);
    assert_eq!(ecs[0].origins, [a]);
    assert_eq!(ecs[0].ranges, ["10.0.0.0/17".parse::<Prefix>().unwrap()]);
    assert_eq!(ecs[1].origins, [b]);
    check(&spec, 1).unwrap();
}
