//! Deterministic network generators: data-center and synthetic topologies,
//! small policy gadgets, and random networks for differential testing.
//!
//! Fat-tree sizing: a fat-tree of size `5m²` has `2m` pods, each with `m`
//! ToRs and `m` aggregation switches, plus `m²` core switches. ToRs and
//! aggregation switches of a pod form a complete bipartite graph (`2m³`
//! links), aggregation switches of a pod are fully meshed (`m³ - m²`
//! links) and every aggregation switch has `2.5m + 6` core uplinks
//! (rounded down and up alternately over all aggregation switches when `m`
//! is odd). That totals
//! `8m³ + 11m²` links: 180/2124, 500/9100 and 1125/29475 for m = 6, 10, 15.
//! The uplinks go to distinct cores, which needs m >= 4.
//! Only ToRs originate prefixes.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::compress::Mapping;
use crate::config::{Acl, AclEntry, Clause, Community, Match, NetworkSpec, Prefix, Protocol, RoutePolicy, StaticRoute, Verdict};
use crate::srp::NodeId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("unsupported size {size} for {kind}")]
    UnsupportedSize { kind: Kind, size: usize },
    #[error("unknown generator `{0}`")]
    UnknownKind(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Fattree,
    Ring,
    Mesh,
    RipDiamond,
    LpGadget,
    TagPref,
    Chain,
    BadGadget,
    StaticLoop,
    Random,
}

impl Kind {
    pub const ALL: [Kind; 10] = [
        Kind::Fattree,
        Kind::Ring,
        Kind::Mesh,
        Kind::RipDiamond,
        Kind::LpGadget,
        Kind::TagPref,
        Kind::Chain,
        Kind::BadGadget,
        Kind::StaticLoop,
        Kind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Fattree => "fattree",
            Kind::Ring => "ring",
            Kind::Mesh => "mesh",
            Kind::RipDiamond => "rip-diamond",
            Kind::LpGadget => "lp-gadget",
            Kind::TagPref => "tag-pref",
            Kind::Chain => "chain",
            Kind::BadGadget => "bad-gadget",
            Kind::StaticLoop => "static-loop",
            Kind::Random => "random",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Kind {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, GenError> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| GenError::UnknownKind(s.to_string()))
    }
}

/// Generates a network. `size` is the node count for fattree, ring, mesh
/// and random (an upper bound there), the number of preference levels for
/// the chain, and ignored by the fixed gadgets.
pub fn gen(kind: Kind, size: usize, seed: u64) -> Result<NetworkSpec, GenError> {
    let unsupported = || GenError::UnsupportedSize { kind, size };
    match kind {
        Kind::Fattree => {
            // the uplink width needs at least 2.5m + 6 cores
            let m = (4..=64).find(|m| 5 * m * m == size).ok_or_else(unsupported)?;
            Ok(fattree(m))
        }
        Kind::Ring if size >= 3 => Ok(ring(size)),
        Kind::Mesh if size >= 2 => Ok(mesh(size)),
        Kind::RipDiamond => Ok(rip_diamond()),
        Kind::LpGadget => Ok(lp_gadget()),
        Kind::TagPref => Ok(tag_pref()),
        Kind::Chain if (2..=3).contains(&size) => Ok(chain(size)),
        Kind::BadGadget => Ok(bad_gadget()),
        Kind::StaticLoop => Ok(static_loop()),
        Kind::Random if size >= 2 => Ok(random_network(seed, size)),
        _ => Err(unsupported()),
    }
}

/// `10.x.y.0/24` for node index `i`.
pub fn node_prefix(i: usize) -> Prefix {
    Prefix::new(0x0a00_0000 | ((i as u32) << 8), 24).expect("aligned")
}

fn comm(v: u16) -> Community {
    Community::new(1, v)
}

fn policy(clauses: Vec<Clause>) -> RoutePolicy {
    RoutePolicy { clauses }
}

fn matching(communities: &[Community]) -> Match {
    Match { communities: Some(communities.to_vec()), ..Match::default() }
}

fn set_import(spec: &mut NetworkSpec, at: NodeId, from: NodeId, name: &str) {
    spec.interface_mut(at, from).expect("link").import_policy = Some(name.to_string());
}

fn set_export(spec: &mut NetworkSpec, at: NodeId, to: NodeId, name: &str) {
    spec.interface_mut(at, to).expect("link").export_policy = Some(name.to_string());
}

/// Shortest-path eBGP where every node accepts only originated prefixes.
fn with_dest_filter(mut spec: NetworkSpec) -> NetworkSpec {
    let prefixes: Vec<Prefix> = spec.origins.iter().flatten().copied().collect();
    spec.policies.insert(
        "dest-filter".into(),
        policy(vec![Clause {
            matches: Match { prefixes: Some(prefixes), ..Match::default() },
            ..Clause::permit()
        }]),
    );
    for link in &mut spec.links {
        for iface in &mut link.interfaces {
            iface.import_policy = Some("dest-filter".into());
        }
    }
    spec
}

fn bgp_nodes(spec: &mut NetworkSpec, names: impl IntoIterator<Item = String>) -> Vec<NodeId> {
    names
        .into_iter()
        .map(|n| {
            let asn = spec.num_nodes() as u32 + 1;
            spec.add_node(&n, asn, &[Protocol::Bgp])
        })
        .collect()
}

pub fn fattree(m: usize) -> NetworkSpec {
    let mut spec = NetworkSpec::new();
    let pods = 2 * m;
    let mut tors = Vec::new();
    let mut aggs = Vec::new();
    for p in 0..pods {
        tors.push(bgp_nodes(&mut spec, (0..m).map(|i| format!("tor{p}_{i}"))));
    }
    for p in 0..pods {
        aggs.push(bgp_nodes(&mut spec, (0..m).map(|i| format!("agg{p}_{i}"))));
    }
    let cores = bgp_nodes(&mut spec, (0..m * m).map(|i| format!("core{i}")));
    for p in 0..pods {
        for &t in &tors[p] {
            for &a in &aggs[p] {
                spec.add_link(t, a);
            }
        }
        for i in 0..m {
            for j in i + 1..m {
                spec.add_link(aggs[p][i], aggs[p][j]);
            }
        }
        for (j, &a) in aggs[p].iter().enumerate() {
            // 2.5m + 6 uplinks; odd m alternates floor and ceil
            let width = (5 * m + 12 + (p * m + j) % 2) / 2;
            for k in 0..width {
                spec.add_link(a, cores[(j * m + k) % (m * m)]);
            }
        }
    }
    for t in tors.iter().flatten() {
        spec.origins[t.index()] = vec![node_prefix(t.index())];
    }
    with_dest_filter(spec)
}

pub fn ring(n: usize) -> NetworkSpec {
    let mut spec = NetworkSpec::new();
    let nodes = bgp_nodes(&mut spec, (0..n).map(|i| format!("r{i}")));
    for i in 0..n {
        spec.add_link(nodes[i], nodes[(i + 1) % n]);
        spec.origins[i] = vec![node_prefix(i)];
    }
    with_dest_filter(spec)
}

pub fn mesh(n: usize) -> NetworkSpec {
    let mut spec = NetworkSpec::new();
    let nodes = bgp_nodes(&mut spec, (0..n).map(|i| format!("m{i}")));
    for i in 0..n {
        for j in i + 1..n {
            spec.add_link(nodes[i], nodes[j]);
        }
        spec.origins[i] = vec![node_prefix(i)];
    }
    with_dest_filter(spec)
}

fn named(spec: &mut NetworkSpec, protocol: Protocol, names: &[&str]) -> Vec<NodeId> {
    names
        .iter()
        .enumerate()
        .map(|(i, n)| spec.add_node(n, i as u32 + 1, &[protocol]))
        .collect()
}

/// RIP diamond: d - b1, d - b2, a - b1, a - b2.
pub fn rip_diamond() -> NetworkSpec {
    let mut spec = NetworkSpec::new();
    let v = named(&mut spec, Protocol::Rip, &["d", "b1", "b2", "a"]);
    for &(x, y) in &[(0, 1), (0, 2), (3, 1), (3, 2)] {
        spec.add_link(v[x], v[y]);
    }
    spec.origins[0] = vec![node_prefix(0)];
    spec
}

/// Local-preference gadget: b1..b3 each link d and a, and prefer routes
/// learned from a.
pub fn lp_gadget() -> NetworkSpec {
    let mut spec = NetworkSpec::new();
    let v = named(&mut spec, Protocol::Bgp, &["d", "a", "b1", "b2", "b3"]);
    spec.policies.insert("prefer".into(), policy(vec![Clause { set_local_pref: Some(200), ..Clause::permit() }]));
    for &b in &v[2..] {
        spec.add_link(v[0], b);
        spec.add_link(v[1], b);
        set_import(&mut spec, b, v[1], "prefer");
    }
    spec.origins[0] = vec![node_prefix(0)];
    spec
}

/// The abstraction of the local-preference gadget that merges b1..b3 into
/// a single node, with its mapping sidecar. It is not sound.
pub fn lp_gadget_naive() -> (NetworkSpec, String) {
    let concrete = lp_gadget();
    let mut spec = NetworkSpec::new();
    let v = named(&mut spec, Protocol::Bgp, &["d", "a", "b1"]);
    spec.policies = concrete.policies.clone();
    spec.add_link(v[0], v[2]);
    spec.add_link(v[1], v[2]);
    set_import(&mut spec, v[2], v[1], "prefer");
    spec.origins[0] = vec![node_prefix(0)];
    let mapping = Mapping {
        block_of: vec![0, 1, 2, 2, 2],
        block_nodes: vec![vec![v[0]], vec![v[1]], vec![v[2]]],
        abstract_block: vec![0, 1, 2],
        bgp: true,
        unused_tags: Default::default(),
    };
    let names = vec!["d".to_string(), "a".to_string(), "b1".to_string()];
    let sidecar = mapping.to_json(&concrete, &spec, &names);
    (spec, sidecar)
}

/// Community-driven preference: a tags everything it exports and b2
/// prefers tagged routes.
pub fn tag_pref() -> NetworkSpec {
    let mut spec = NetworkSpec::new();
    let v = named(&mut spec, Protocol::Bgp, &["d", "a", "b1", "b2"]);
    spec.policies.insert(
        "tag".into(),
        policy(vec![Clause { add_communities: vec![comm(1)], ..Clause::permit() }]),
    );
    spec.policies.insert(
        "prefer-tagged".into(),
        policy(vec![
            Clause { matches: matching(&[comm(1)]), set_local_pref: Some(200), ..Clause::permit() },
            Clause::permit(),
        ]),
    );
    for &(x, y) in &[(0, 2), (0, 3), (1, 2), (1, 3)] {
        spec.add_link(v[x], v[y]);
    }
    for &b in &v[2..] {
        set_export(&mut spec, v[1], b, "tag");
    }
    set_import(&mut spec, v[3], v[0], "prefer-tagged");
    set_import(&mut spec, v[3], v[1], "prefer-tagged");
    spec.origins[0] = vec![node_prefix(0)];
    spec
}

/// Chain of `k` preference levels: every u links d, y (and x when k = 3).
/// Routes climb d → y → x through the u nodes, each step raising the local
/// preference, so one stable solution has u1, u2, u3 using x, y, d.
pub fn chain(k: usize) -> NetworkSpec {
    assert!((2..=3).contains(&k));
    let mut spec = NetworkSpec::new();
    let mut names = vec!["d".to_string()];
    names.extend((1..=k).map(|i| format!("u{i}")));
    names.push("y".into());
    if k == 3 {
        names.push("x".into());
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let v = named(&mut spec, Protocol::Bgp, &refs);
    let (s, t) = (comm(1), comm(2));
    spec.policies.insert(
        "from-d".into(),
        policy(vec![Clause { add_communities: vec![s], ..Clause::permit() }]),
    );
    spec.policies.insert(
        "from-y".into(),
        policy(vec![Clause {
            delete_communities: vec![s],
            add_communities: vec![t],
            set_local_pref: Some(200),
            ..Clause::permit()
        }]),
    );
    spec.policies.insert(
        "from-x".into(),
        policy(vec![Clause { delete_communities: vec![s, t], set_local_pref: Some(300), ..Clause::permit() }]),
    );
    spec.policies.insert("need-s".into(), policy(vec![Clause { matches: matching(&[s]), ..Clause::permit() }]));
    spec.policies.insert("need-t".into(), policy(vec![Clause { matches: matching(&[t]), ..Clause::permit() }]));
    let d = v[0];
    let y = v[k + 1];
    for &u in &v[1..=k] {
        spec.add_link(u, d);
        spec.add_link(u, y);
        set_import(&mut spec, u, d, "from-d");
        set_import(&mut spec, u, y, "from-y");
        set_import(&mut spec, y, u, "need-s");
        if k == 3 {
            let x = v[k + 2];
            spec.add_link(u, x);
            set_import(&mut spec, u, x, "from-x");
            set_import(&mut spec, x, u, "need-t");
        }
    }
    spec.origins[0] = vec![node_prefix(0)];
    spec
}

/// Three nodes around d, each preferring the clockwise neighbor's direct
/// route over its own. Has no stable solution.
pub fn bad_gadget() -> NetworkSpec {
    let mut spec = NetworkSpec::new();
    let v = named(&mut spec, Protocol::Bgp, &["d", "n1", "n2", "n3"]);
    let direct = comm(100);
    spec.policies.insert(
        "from-d".into(),
        policy(vec![Clause { add_communities: vec![direct], ..Clause::permit() }]),
    );
    spec.policies.insert(
        "from-next".into(),
        policy(vec![
            Clause {
                matches: matching(&[direct]),
                delete_communities: vec![direct],
                set_local_pref: Some(200),
                ..Clause::permit()
            },
            Clause::permit(),
        ]),
    );
    spec.policies.insert("deny".into(), policy(Vec::new()));
    for i in 1..=3 {
        spec.add_link(v[0], v[i]);
    }
    for i in 1..=3 {
        let next = v[i % 3 + 1];
        spec.add_link(v[i], next);
    }
    for i in 1..=3 {
        let (me, next, prev) = (v[i], v[i % 3 + 1], v[(i + 1) % 3 + 1]);
        set_import(&mut spec, me, v[0], "from-d");
        set_import(&mut spec, me, next, "from-next");
        set_import(&mut spec, me, prev, "deny");
    }
    spec.origins[0] = vec![node_prefix(0)];
    spec
}

/// d - a - b where a and b point static routes for d's prefix at each other.
pub fn static_loop() -> NetworkSpec {
    let mut spec = NetworkSpec::new();
    let v = named(&mut spec, Protocol::Static, &["d", "a", "b"]);
    spec.add_link(v[0], v[1]);
    spec.add_link(v[1], v[2]);
    let p = node_prefix(0);
    spec.static_routes[1].push(StaticRoute { prefix: p, next_hop: v[2] });
    spec.static_routes[2].push(StaticRoute { prefix: p, next_hop: v[1] });
    spec.origins[0] = vec![p];
    spec
}

const BGP_POLICIES: [&str; 6] = ["lp200", "tag", "prefer-tagged", "deny-tagged", "untag", "deny"];

fn random_policies(spec: &mut NetworkSpec, protocol: Protocol) {
    let t = comm(1);
    spec.policies.insert("deny".into(), policy(Vec::new()));
    if protocol == Protocol::Bgp {
        spec.policies.insert("lp200".into(), policy(vec![Clause { set_local_pref: Some(200), ..Clause::permit() }]));
        spec.policies.insert("tag".into(), policy(vec![Clause { add_communities: vec![t], ..Clause::permit() }]));
        spec.policies.insert(
            "prefer-tagged".into(),
            policy(vec![
                Clause { matches: matching(&[t]), set_local_pref: Some(200), ..Clause::permit() },
                Clause::permit(),
            ]),
        );
        spec.policies.insert(
            "deny-tagged".into(),
            policy(vec![Clause { matches: matching(&[t]), ..Clause::deny() }, Clause::permit()]),
        );
        spec.policies.insert("untag".into(), policy(vec![Clause { delete_communities: vec![t], ..Clause::permit() }]));
    }
    spec.acls.insert(
        "block".into(),
        Acl { entries: vec![AclEntry { prefix: node_prefix(0), action: Verdict::Deny }] },
    );
}

/// Per-direction configuration drawn for one edge (or one block pair).
#[derive(Clone, Copy)]
struct EdgeDraw {
    import: Option<&'static str>,
    export: Option<&'static str>,
    acl: bool,
    cost: u32,
}

fn draw_edge(rng: &mut ChaCha8Rng, protocol: Protocol) -> EdgeDraw {
    let pick = |rng: &mut ChaCha8Rng, p: f64| -> Option<&'static str> {
        if !rng.random_bool(p) {
            None
        } else if protocol == Protocol::Bgp {
            Some(BGP_POLICIES[rng.random_range(0..BGP_POLICIES.len())])
        } else {
            Some("deny")
        }
    };
    let (pi, pe) = match protocol {
        Protocol::Bgp => (0.4, 0.25),
        Protocol::Static => (0.0, 0.0),
        _ => (0.1, 0.1),
    };
    EdgeDraw {
        import: pick(rng, pi),
        export: pick(rng, pe),
        acl: rng.random_bool(0.08),
        cost: if protocol == Protocol::Ospf { rng.random_range(1..=3) } else { 1 },
    }
}

fn apply_draw(spec: &mut NetworkSpec, u: NodeId, v: NodeId, d: EdgeDraw) {
    let iface = spec.interface_mut(u, v).expect("link");
    iface.import_policy = d.import.map(str::to_string);
    iface.acl = d.acl.then(|| "block".to_string());
    if let Some(e) = d.export {
        spec.interface_mut(v, u).unwrap().export_policy = Some(e.to_string());
    }
    spec.link_mut(u, v).unwrap().ospf_cost = d.cost;
}

fn base_network(n: usize, protocol: Protocol) -> NetworkSpec {
    let mut spec = NetworkSpec::new();
    for i in 0..n {
        let name = if i == 0 { "d".to_string() } else { format!("n{i}") };
        spec.add_node(&name, i as u32 + 1, &[protocol]);
    }
    random_policies(&mut spec, protocol);
    spec.origins[0] = vec![node_prefix(0)];
    spec
}

/// A random well-formed network with at most `max_nodes` nodes and one
/// destination, `d`. About half are symmetric blow-ups of a small quotient
/// graph, so they actually compress; the rest are unstructured.
pub fn random_network(seed: u64, max_nodes: usize) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protocol = [Protocol::Rip, Protocol::Ospf, Protocol::Bgp, Protocol::Static][rng.random_range(0..4)];
    let max_nodes = max_nodes.max(2);
    if max_nodes >= 3 && rng.random_bool(0.5) {
        blow_up(&mut rng, protocol, max_nodes)
    } else {
        unstructured(&mut rng, protocol, max_nodes)
    }
}

fn unstructured(rng: &mut ChaCha8Rng, protocol: Protocol, max_nodes: usize) -> NetworkSpec {
    let n = rng.random_range(2..=max_nodes);
    let mut spec = base_network(n, protocol);
    let mut links = Vec::new();
    for i in 1..n {
        links.push((rng.random_range(0..i), i));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !links.contains(&(i, j)) && rng.random_bool(0.25) {
                links.push((i, j));
            }
        }
    }
    for &(i, j) in &links {
        spec.add_link(NodeId(i as u32), NodeId(j as u32));
    }
    for &(i, j) in &links {
        let (a, b) = (NodeId(i as u32), NodeId(j as u32));
        let d1 = draw_edge(rng, protocol);
        apply_draw(&mut spec, a, b, d1);
        let d2 = draw_edge(rng, protocol);
        apply_draw(&mut spec, b, a, EdgeDraw { cost: d1.cost, ..d2 });
    }
    if protocol == Protocol::Ospf {
        for (i, link) in spec.links.iter_mut().enumerate() {
            link.ospf_area = (i % 3 == 2) as u32;
        }
    }
    if protocol == Protocol::Static {
        let adj = spec.adjacency();
        for u in 1..n {
            if rng.random_bool(0.8) {
                let hop = adj[u][rng.random_range(0..adj[u].len())];
                spec.static_routes[u].push(StaticRoute { prefix: node_prefix(0), next_hop: hop });
            }
        }
    }
    spec
}

fn blow_up(rng: &mut ChaCha8Rng, protocol: Protocol, max_nodes: usize) -> NetworkSpec {
    // block 0 is the destination
    let mut sizes = vec![1usize];
    let mut total = 1;
    while total < max_nodes && sizes.len() < 5 {
        let s = rng.random_range(1..=3).min(max_nodes - total);
        sizes.push(s);
        total += s;
        if sizes.len() >= 3 && rng.random_bool(0.3) {
            break;
        }
    }
    let q = sizes.len();
    let mut members = Vec::new();
    let mut next = 0u32;
    for &s in &sizes {
        members.push((next..next + s as u32).map(NodeId).collect::<Vec<_>>());
        next += s as u32;
    }
    let mut spec = base_network(total, protocol);
    let mut qedges = Vec::new();
    for b in 1..q {
        qedges.push((rng.random_range(0..b), b));
    }
    for b in 0..q {
        for c in b + 1..q {
            if !qedges.contains(&(b, c)) && rng.random_bool(0.3) {
                qedges.push((b, c));
            }
        }
    }
    for &(b, c) in &qedges {
        let fwd = draw_edge(rng, protocol);
        let back = EdgeDraw { cost: fwd.cost, ..draw_edge(rng, protocol) };
        let area = (protocol == Protocol::Ospf && rng.random_bool(0.3)) as u32;
        for &x in &members[b] {
            for &y in &members[c] {
                spec.add_link(x, y);
                apply_draw(&mut spec, x, y, fwd);
                apply_draw(&mut spec, y, x, back);
                spec.link_mut(x, y).unwrap().ospf_area = area;
            }
        }
    }
    if protocol != Protocol::Bgp {
        for b in 1..q {
            if members[b].len() > 1 && rng.random_bool(0.3) {
                let list = members[b].clone();
                let draw = draw_edge(rng, protocol);
                for i in 0..list.len() {
                    for j in i + 1..list.len() {
                        spec.add_link(list[i], list[j]);
                        apply_draw(&mut spec, list[i], list[j], draw);
                        apply_draw(&mut spec, list[j], list[i], draw);
                    }
                }
            }
        }
    }
    if protocol == Protocol::Static {
        let adj = spec.adjacency();
        for b in 1..q {
            let targets: Vec<usize> = qedges
                .iter()
                .filter_map(|&(x, y)| if x == b { Some(y) } else if y == b { Some(x) } else { None })
                .collect();
            if targets.is_empty() || !rng.random_bool(0.85) {
                continue;
            }
            let t = targets[rng.random_range(0..targets.len())];
            for &u in &members[b] {
                for &v in &adj[u.index()] {
                    if members[t].contains(&v) {
                        spec.static_routes[u.index()].push(StaticRoute { prefix: node_prefix(0), next_hop: v });
                    }
                }
            }
        }
    }
    spec
}
