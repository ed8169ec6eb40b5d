//! Destination equivalence classes and specialization of a network to one
//! class and destination node.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::config::{ConfigError, NetworkSpec, Prefix, Protocol, SpecializedPolicy};
use crate::protocols::{BgpModel, EdgeConfig, EdgeTable, OspfModel, RipModel, StaticModel};
use crate::srp::{Edge, NodeId, RoutingModel, Srp, Topology};

/// Binary trie over IPv4 prefixes.
#[derive(Debug, Default)]
pub struct PrefixTrie {
    nodes: Vec<TrieNode>,
}

#[derive(Debug, Default, Clone)]
struct TrieNode {
    children: [Option<usize>; 2],
    marked: bool,
    /// Number of marked prefixes strictly below this node.
    below: usize,
}

fn bit(addr: u32, depth: u8) -> usize {
    ((addr >> (31 - depth)) & 1) as usize
}

impl PrefixTrie {
    pub fn new() -> Self {
        PrefixTrie { nodes: vec![TrieNode::default()] }
    }

    pub fn insert(&mut self, p: Prefix) {
        let mut path = vec![0usize];
        let mut cur = 0usize;
        for depth in 0..p.len() {
            let b = bit(p.addr(), depth);
            cur = match self.nodes[cur].children[b] {
                Some(c) => c,
                None => {
                    self.nodes.push(TrieNode::default());
                    let c = self.nodes.len() - 1;
                    self.nodes[cur].children[b] = Some(c);
                    c
                }
            };
            path.push(cur);
        }
        if self.nodes[cur].marked {
            return;
        }
        self.nodes[cur].marked = true;
        path.pop();
        for n in path {
            self.nodes[n].below += 1;
        }
    }

    fn find(&self, p: Prefix) -> Option<usize> {
        let mut cur = 0usize;
        for depth in 0..p.len() {
            cur = self.nodes[cur].children[bit(p.addr(), depth)]?;
        }
        Some(cur)
    }

    /// True when some stored prefix lies strictly inside `p`.
    pub fn splits(&self, p: Prefix) -> bool {
        self.find(p).is_some_and(|n| self.nodes[n].below > 0)
    }

    /// Stored prefixes containing `p` (including `p`), shortest first.
    pub fn containing(&self, p: Prefix) -> Vec<Prefix> {
        let mut out = Vec::new();
        let mut cur = 0usize;
        for depth in 0..=p.len() {
            if self.nodes[cur].marked {
                let mask = if depth == 0 { 0 } else { u32::MAX << (32 - depth) };
                out.push(Prefix::new(p.addr() & mask, depth).unwrap());
            }
            if depth == p.len() {
                break;
            }
            match self.nodes[cur].children[bit(p.addr(), depth)] {
                Some(c) => cur = c,
                None => break,
            }
        }
        out
    }
}

/// A set of address ranges that every router treats identically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DestEquivClass {
    pub ranges: Vec<Prefix>,
    pub origins: Vec<NodeId>,
}

impl DestEquivClass {
    pub fn representative(&self) -> Prefix {
        self.ranges[0]
    }

    /// Some range of the class overlaps `p`.
    pub fn overlaps(&self, p: Prefix) -> bool {
        self.ranges.iter().any(|r| r.contains(p) || p.contains(*r))
    }
}

/// Every prefix at which forwarding behavior may change.
fn boundaries(spec: &NetworkSpec) -> BTreeSet<Prefix> {
    let mut out = BTreeSet::new();
    for o in &spec.origins {
        out.extend(o.iter().copied());
    }
    for p in spec.policies.values() {
        out.extend(p.prefixes());
    }
    for a in spec.acls.values() {
        out.extend(a.entries.iter().map(|e| e.prefix));
    }
    for routes in &spec.static_routes {
        out.extend(routes.iter().map(|r| r.prefix));
    }
    out
}

/// Partitions the originated address space into classes, ordered by their
/// lowest range.
pub fn compute_ecs(spec: &NetworkSpec) -> Vec<DestEquivClass> {
    let mut origin_of: BTreeMap<Prefix, Vec<NodeId>> = BTreeMap::new();
    for (u, prefixes) in spec.origins.iter().enumerate() {
        for p in prefixes {
            origin_of.entry(*p).or_default().push(NodeId(u as u32));
        }
    }
    let mut trie = PrefixTrie::new();
    for p in boundaries(spec) {
        trie.insert(p);
    }
    let roots: Vec<Prefix> = origin_of
        .keys()
        .copied()
        .filter(|p| !origin_of.keys().any(|q| q != p && q.contains(*p)))
        .collect();
    let mut atoms = Vec::new();
    let mut stack: Vec<Prefix> = roots.into_iter().rev().collect();
    while let Some(p) = stack.pop() {
        match p.halves() {
            Some((lo, hi)) if trie.splits(p) => {
                stack.push(hi);
                stack.push(lo);
            }
            _ => atoms.push(p),
        }
    }
    let mut groups: BTreeMap<(Vec<NodeId>, Vec<Prefix>), Vec<Prefix>> = BTreeMap::new();
    for atom in atoms {
        let containing = trie.containing(atom);
        let origins = containing
            .iter()
            .rev()
            .find_map(|p| origin_of.get(p))
            .cloned()
            .unwrap_or_default();
        groups.entry((origins, containing)).or_default().push(atom);
    }
    let mut out: Vec<DestEquivClass> = groups
        .into_iter()
        .map(|((origins, _), mut ranges)| {
            ranges.sort();
            DestEquivClass { ranges, origins }
        })
        .collect();
    out.sort_by_key(|ec| ec.representative());
    out
}

/// A network restricted to one class and one destination node.
#[derive(Clone, Debug)]
pub struct SpecializedNetwork {
    pub ec: DestEquivClass,
    pub dest: NodeId,
    pub protocol: Protocol,
    pub topology: Topology,
    pub edges: EdgeTable,
}

impl SpecializedNetwork {
    pub fn edge(&self, e: Edge) -> &EdgeConfig {
        &self.edges[&e]
    }

    pub fn model(&self) -> Arc<dyn RoutingModel> {
        let table = self.edges.clone();
        match self.protocol {
            Protocol::Rip => Arc::new(RipModel::new(table)),
            Protocol::Ospf => Arc::new(OspfModel::new(table)),
            Protocol::Bgp => Arc::new(BgpModel::new(table)),
            Protocol::Static => Arc::new(StaticModel::new(table)),
        }
    }

    pub fn srp(&self) -> Srp {
        Srp::new(self.topology.clone(), self.model())
    }
}

/// Next hops of the longest-matching static routes at every node.
fn static_next_hops(spec: &NetworkSpec, prefix: Prefix) -> Vec<BTreeSet<NodeId>> {
    spec.static_routes
        .iter()
        .map(|routes| {
            let best = routes
                .iter()
                .filter(|r| r.prefix.contains(prefix))
                .map(|r| r.prefix.len())
                .max();
            routes
                .iter()
                .filter(|r| Some(r.prefix.len()) == best && r.prefix.contains(prefix))
                .map(|r| r.next_hop)
                .collect()
        })
        .collect()
}

/// One specialized network per origin node of the class.
pub fn specialize(spec: &NetworkSpec, ec: &DestEquivClass) -> Result<Vec<SpecializedNetwork>, ConfigError> {
    let protocol = spec.protocol()?;
    let prefix = ec.representative();
    let mut cache: HashMap<String, Arc<SpecializedPolicy>> = HashMap::new();
    let mut policy = |name: &Option<String>| -> Option<Arc<SpecializedPolicy>> {
        let name = name.as_deref()?;
        Some(
            cache
                .entry(name.to_string())
                .or_insert_with(|| Arc::new(spec.policies[name].specialize(prefix, protocol)))
                .clone(),
        )
    };
    let statics = static_next_hops(spec, prefix);
    let mut base = EdgeTable::with_capacity(spec.links.len() * 2);
    let mut links = Vec::with_capacity(spec.links.len());
    for link in &spec.links {
        links.push((link.a, link.b));
        for (side, (u, v)) in [(0, (link.a, link.b)), (1, (link.b, link.a))] {
            let mine = &link.interfaces[side];
            let theirs = &link.interfaces[1 - side];
            let blocked = mine
                .acl
                .as_ref()
                .is_some_and(|a| !spec.acls[a].permits(prefix));
            base.insert(
                Edge::new(u, v),
                EdgeConfig {
                    blocked,
                    export: policy(&theirs.export_policy),
                    import: policy(&mine.import_policy),
                    ospf_cost: link.ospf_cost,
                    crosses_area: false,
                    static_route: statics[u.index()].contains(&v),
                },
            );
        }
    }
    let mut out = Vec::new();
    for &dest in &ec.origins {
        let topology = Topology::undirected(spec.num_nodes(), links.iter().copied(), dest)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let dest_area = spec.nodes[dest.index()].ospf_area;
        let mut edges = base.clone();
        if protocol == Protocol::Ospf {
            for (e, cfg) in edges.iter_mut() {
                cfg.crosses_area = spec.link(e.node, e.neighbor).unwrap().ospf_area != dest_area;
            }
        }
        out.push(SpecializedNetwork { ec: ec.clone(), dest, protocol, topology, edges });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Clause, Match, RoutePolicy};

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    #[test]
    fn trie_reports_containment() {
        let mut t = PrefixTrie::new();
        t.insert(p("10.0.0.0/16"));
        t.insert(p("10.0.1.0/24"));
        assert!(t.splits(p("10.0.0.0/16")));
        assert!(!t.splits(p("10.0.1.0/24")));
        assert_eq!(t.containing(p("10.0.1.0/24")), vec![p("10.0.0.0/16"), p("10.0.1.0/24")]);
        assert_eq!(t.containing(p("10.0.2.0/24")), vec![p("10.0.0.0/16")]);
    }

    #[test]
    fn distinct_origins_give_distinct_classes() {
        let mut spec = NetworkSpec::new();
        let d1 = spec.add_node("d1", 1, &[Protocol::Bgp]);
        let d2 = spec.add_node("d2", 2, &[Protocol::Bgp]);
        spec.add_link(d1, d2);
        spec.origins[0] = vec![p("10.0.0.0/24")];
        spec.origins[1] = vec![p("10.0.1.0/24")];
        let ecs = compute_ecs(&spec);
        assert_eq!(ecs.len(), 2);
        assert_eq!(ecs[0].origins, vec![d1]);
        assert_eq!(ecs[1].origins, vec![d2]);
    }

    #[test]
    fn filter_boundary_splits_an_origin() {
        let mut spec = NetworkSpec::new();
        let d = spec.add_node("d", 1, &[Protocol::Bgp]);
        let a = spec.add_node("a", 2, &[Protocol::Bgp]);
        spec.add_link(d, a);
        spec.origins[0] = vec![p("10.0.0.0/16")];
        spec.policies.insert(
            "f".into(),
            RoutePolicy {
                clauses: vec![Clause {
                    matches: Match { prefixes: Some(vec![p("10.0.0.0/24")]), ..Match::default() },
                    ..Clause::permit()
                }],
            },
        );
        let ecs = compute_ecs(&spec);
        assert_eq!(ecs.len(), 2);
        assert_eq!(ecs[0].ranges, vec![p("10.0.0.0/24")]);
        assert_eq!(ecs[1].ranges.len(), 8);
        let covered: u64 = ecs.iter().flat_map(|e| &e.ranges).map(|r| 1u64 << (32 - r.len())).sum();
        assert_eq!(covered, 1 << 16);
    }

    #[test]
    fn no_origins_no_classes() {
        let mut spec = NetworkSpec::new();
        spec.add_node("a", 1, &[Protocol::Rip]);
        assert!(compute_ecs(&spec).is_empty());
    }

    #[test]
    fn anycast_yields_one_network_per_origin() {
        let mut spec = NetworkSpec::new();
        let a = spec.add_node("a", 1, &[Protocol::Rip]);
        let b = spec.add_node("b", 2, &[Protocol::Rip]);
        spec.add_link(a, b);
        spec.origins[0] = vec![p("10.0.0.0/24")];
        spec.origins[1] = vec![p("10.0.0.0/24")];
        let ecs = compute_ecs(&spec);
        assert_eq!(ecs.len(), 1);
        let nets = specialize(&spec, &ecs[0]).unwrap();
        assert_eq!(nets.len(), 2);
        assert_eq!(nets[1].dest, b);
    }
}
