//! Stable routing problems: topology, attributes, solutions, simulation and
//! exhaustive enumeration of stable solutions.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::protocols::{BgpAttr, OspfAttr, RipAttr};

/// Dense node index into a topology.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Directed edge: `node` receives routes from `neighbor` and forwards
/// traffic to it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub node: NodeId,
    pub neighbor: NodeId,
}

impl Edge {
    pub fn new(node: NodeId, neighbor: NodeId) -> Self {
        Edge { node, neighbor }
    }
}

/// A route message value, tagged by protocol.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attr {
    Rip(RipAttr),
    Ospf(OspfAttr),
    Bgp(BgpAttr),
    Static,
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Attr::Rip(a) => write!(f, "hops={}", a.hops),
            Attr::Ospf(a) => write!(f, "cost={}{}", a.cost, if a.inter_area { " inter-area" } else { "" }),
            Attr::Bgp(a) => {
                write!(f, "lp={}", a.local_pref)?;
                if !a.communities.is_empty() {
                    let cs: Vec<String> = a.communities.iter().map(|c| c.to_string()).collect();
                    write!(f, " comms={}", cs.join(","))?;
                }
                let path: Vec<String> = a.as_path.iter().map(|n| n.to_string()).collect();
                write!(f, " path=[{}]", path.join(" "))
            }
            Attr::Static => write!(f, "static"),
        }
    }
}

/// Outcome of comparing `a` against `b` under the preference relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pref {
    /// `a` is strictly preferred (a ≺ b).
    Better,
    /// `b` is strictly preferred.
    Worse,
    /// Neither is preferred (a ≈ b).
    Equivalent,
}

/// The protocol-specific part of an SRP: initial route, ranking and
/// per-edge transfer. `None` stands for ⊥ (no route).
pub trait RoutingModel: Send + Sync {
    fn initial(&self) -> Attr;
    fn compare(&self, a: &Attr, b: &Attr) -> Pref;
    fn transfer(&self, edge: Edge, attr: Option<&Attr>) -> Option<Attr>;
    /// Static routes produce a route on ⊥ input by design.
    fn spontaneous(&self) -> bool {
        false
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SrpError {
    #[error("node {0} out of range")]
    UnknownNode(u32),
    #[error("no stable solution within {rounds} rounds")]
    Divergence { rounds: usize },
    #[error("instance has {nodes} nodes, enumeration limit is {limit}")]
    InstanceTooLarge { nodes: usize, limit: usize },
}

/// Directed graph with a destination. `neighbors[u]` lists every `v` with
/// an edge (u, v), sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    neighbors: Vec<Vec<NodeId>>,
    receivers: Vec<Vec<NodeId>>,
    dest: NodeId,
}

impl Topology {
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
        dest: NodeId,
    ) -> Result<Self, SrpError> {
        if dest.index() >= num_nodes {
            return Err(SrpError::UnknownNode(dest.0));
        }
        let mut neighbors = vec![Vec::new(); num_nodes];
        for (u, v) in edges {
            for n in [u, v] {
                if n.index() >= num_nodes {
                    return Err(SrpError::UnknownNode(n.0));
                }
            }
            neighbors[u.index()].push(v);
        }
        for list in &mut neighbors {
            list.sort();
            list.dedup();
        }
        let mut receivers = vec![Vec::new(); num_nodes];
        for (u, list) in neighbors.iter().enumerate() {
            for v in list {
                receivers[v.index()].push(NodeId(u as u32));
            }
        }
        Ok(Topology { neighbors, receivers, dest })
    }

    /// Builds a topology with both directions of every undirected link.
    pub fn undirected(
        num_nodes: usize,
        links: impl IntoIterator<Item = (NodeId, NodeId)>,
        dest: NodeId,
    ) -> Result<Self, SrpError> {
        let mut edges = Vec::new();
        for (a, b) in links {
            edges.push((a, b));
            edges.push((b, a));
        }
        Self::new(num_nodes, edges, dest)
    }

    pub fn num_nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    pub fn dest(&self) -> NodeId {
        self.dest
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.neighbors.len() as u32).map(NodeId)
    }

    /// Nodes `v` with an edge (u, v).
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.neighbors[u.index()]
    }

    /// Nodes `w` with an edge (w, u), i.e. nodes that receive from `u`.
    pub fn receivers(&self, u: NodeId) -> &[NodeId] {
        &self.receivers[u.index()]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors[u.index()].binary_search(&v).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().map(move |&v| Edge::new(NodeId(u as u32), v)))
    }
}

/// A stable routing problem instance.
#[derive(Clone)]
pub struct Srp {
    pub topology: Topology,
    pub model: Arc<dyn RoutingModel>,
}

impl fmt::Debug for Srp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Srp").field("topology", &self.topology).finish()
    }
}

/// Labelling plus the forwarding relation it induces.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Solution {
    pub labels: Vec<Option<Attr>>,
    pub fwd: Vec<Vec<NodeId>>,
}

impl Solution {
    pub fn label(&self, u: NodeId) -> Option<&Attr> {
        self.labels[u.index()].as_ref()
    }

    pub fn forwards(&self, u: NodeId, v: NodeId) -> bool {
        self.fwd[u.index()].binary_search(&v).is_ok()
    }
}

/// A reason an SRP is not well formed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    SelfLoop(NodeId),
    Spontaneous(Edge),
    InitialIsBottom,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop(u) => write!(f, "self-loop at {u}"),
            Violation::Spontaneous(e) => {
                write!(f, "transfer on ({}, {}) produces a route from ⊥", e.node, e.neighbor)
            }
            Violation::InitialIsBottom => write!(f, "destination has no initial route"),
        }
    }
}

impl Srp {
    pub fn new(topology: Topology, model: Arc<dyn RoutingModel>) -> Self {
        Srp { topology, model }
    }

    pub fn validate_well_formed(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for e in self.topology.edges() {
            if e.node == e.neighbor {
                out.push(Violation::SelfLoop(e.node));
            }
        }
        if !self.model.spontaneous() {
            for e in self.topology.edges() {
                if e.node != e.neighbor && self.model.transfer(e, None).is_some() {
                    out.push(Violation::Spontaneous(e));
                }
            }
        }
        out
    }

    /// Every (neighbor, attribute) offered to `u` under `labels`.
    pub fn choices(&self, labels: &[Option<Attr>], u: NodeId) -> Vec<(NodeId, Attr)> {
        self.topology
            .neighbors(u)
            .iter()
            .filter_map(|&v| {
                self.model
                    .transfer(Edge::new(u, v), labels[v.index()].as_ref())
                    .map(|a| (v, a))
            })
            .collect()
    }

    /// Neighbors whose offer is equally good as `u`'s label.
    pub fn fwd(&self, labels: &[Option<Attr>], u: NodeId) -> Vec<NodeId> {
        let Some(own) = labels[u.index()].as_ref() else {
            return Vec::new();
        };
        self.choices(labels, u)
            .into_iter()
            .filter(|(_, a)| self.model.compare(a, own) == Pref::Equivalent)
            .map(|(v, _)| v)
            .collect()
    }

    pub fn is_stable(&self, labels: &[Option<Attr>]) -> bool {
        let topo = &self.topology;
        if labels.len() != topo.num_nodes() {
            return false;
        }
        for u in topo.nodes() {
            let label = labels[u.index()].as_ref();
            if u == topo.dest() {
                if label != Some(&self.model.initial()) {
                    return false;
                }
                continue;
            }
            let choices = self.choices(labels, u);
            match label {
                None => {
                    if !choices.is_empty() {
                        return false;
                    }
                }
                Some(own) => {
                    if !choices.iter().any(|(_, a)| a == own) {
                        return false;
                    }
                    if choices.iter().any(|(_, a)| self.model.compare(a, own) == Pref::Better) {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn solution_from_labels(&self, labels: Vec<Option<Attr>>) -> Solution {
        let fwd = self
            .topology
            .nodes()
            .map(|u| self.fwd(&labels, u))
            .collect();
        Solution { labels, fwd }
    }

    fn minimal<'a>(&self, choices: &'a [(NodeId, Attr)]) -> Vec<&'a (NodeId, Attr)> {
        choices
            .iter()
            .filter(|(_, a)| {
                !choices
                    .iter()
                    .any(|(_, b)| self.model.compare(b, a) == Pref::Better)
            })
            .collect()
    }

    /// Round-robin asynchronous iteration from the all-⊥ labelling. A node
    /// keeps its label while it stays optimal, otherwise it takes the
    /// optimal offer from the neighbor ranked first by `tie`.
    pub fn simulate(&self, tie: &TieBreak) -> Result<Solution, SrpError> {
        let topo = &self.topology;
        let n = topo.num_nodes();
        let mut labels: Vec<Option<Attr>> = vec![None; n];
        labels[topo.dest().index()] = Some(self.model.initial());
        let mut observed: BTreeSet<Attr> = BTreeSet::new();
        observed.insert(self.model.initial());
        let mut rounds = 0usize;
        loop {
            let mut changed = false;
            for &u in &tie.order {
                if u == topo.dest() {
                    continue;
                }
                let choices = self.choices(&labels, u);
                let best = self.minimal(&choices);
                let current = labels[u.index()].as_ref();
                let keep = current.is_some_and(|c| best.iter().any(|(_, a)| a == c));
                if keep {
                    continue;
                }
                let next = best
                    .iter()
                    .min_by_key(|(v, _)| tie.rank[v.index()])
                    .map(|(_, a)| a.clone());
                if next.as_ref() != current {
                    if let Some(a) = &next {
                        observed.insert(a.clone());
                    }
                    labels[u.index()] = next;
                    changed = true;
                }
            }
            rounds += 1;
            if !changed {
                return Ok(self.solution_from_labels(labels));
            }
            let bound = 2 * n * observed.len().max(1);
            if rounds > bound {
                return Err(SrpError::Divergence { rounds });
            }
        }
    }

    /// Every stable solution, found by branching over each node's next hop
    /// (or ⊥) and pruning with pairwise stability constraints.
    pub fn enumerate_solutions(&self, max_nodes: usize) -> Result<Vec<Solution>, SrpError> {
        let n = self.topology.num_nodes();
        if n > max_nodes {
            return Err(SrpError::InstanceTooLarge { nodes: n, limit: max_nodes });
        }
        let mut search = Enumerator::new(self);
        search.run();
        let found = std::mem::take(&mut search.found);
        Ok(found
            .into_iter()
            .map(|labels| self.solution_from_labels(labels))
            .collect())
    }
}

/// Deterministic tie-breaking: `order` is the update order, `rank[v]` the
/// priority of neighbor `v` (lower wins).
#[derive(Clone, Debug)]
pub struct TieBreak {
    order: Vec<NodeId>,
    rank: Vec<usize>,
}

impl TieBreak {
    pub fn lowest_id(num_nodes: usize) -> Self {
        TieBreak {
            order: (0..num_nodes as u32).map(NodeId).collect(),
            rank: (0..num_nodes).collect(),
        }
    }

    /// `priority` lists nodes from most to least preferred; it doubles as
    /// the update order.
    pub fn from_priority(priority: &[NodeId]) -> Self {
        let mut rank = vec![usize::MAX; priority.len()];
        for (i, v) in priority.iter().enumerate() {
            rank[v.index()] = i;
        }
        TieBreak { order: priority.to_vec(), rank }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Hop {
    Unset,
    Bottom,
    Via(NodeId),
}

struct Enumerator<'a> {
    srp: &'a Srp,
    order: Vec<NodeId>,
    hop: Vec<Hop>,
    labels: Vec<Option<Option<Attr>>>,
    trail: Vec<NodeId>,
    found: BTreeSet<Vec<Option<Attr>>>,
}

impl<'a> Enumerator<'a> {
    fn new(srp: &'a Srp) -> Self {
        let topo = &srp.topology;
        let n = topo.num_nodes();
        let mut order = vec![topo.dest()];
        let mut seen = vec![false; n];
        seen[topo.dest().index()] = true;
        let mut queue = VecDeque::from([topo.dest()]);
        while let Some(v) = queue.pop_front() {
            for &w in topo.receivers(v) {
                if !seen[w.index()] {
                    seen[w.index()] = true;
                    order.push(w);
                    queue.push_back(w);
                }
            }
        }
        for u in topo.nodes() {
            if !seen[u.index()] {
                order.push(u);
            }
        }
        let mut labels = vec![None; n];
        labels[topo.dest().index()] = Some(Some(srp.model.initial()));
        Enumerator {
            srp,
            order,
            hop: vec![Hop::Unset; n],
            labels,
            trail: Vec::new(),
            found: BTreeSet::new(),
        }
    }

    fn run(&mut self) {
        self.descend(1);
    }

    fn descend(&mut self, idx: usize) {
        if idx == self.order.len() {
            self.leaf();
            return;
        }
        let u = self.order[idx];
        let mut options = vec![Hop::Bottom];
        options.extend(self.srp.topology.neighbors(u).iter().filter(|&&v| v != u).map(|&v| Hop::Via(v)));
        for opt in options {
            let mark = self.trail.len();
            self.hop[u.index()] = opt;
            if self.resolve(u) {
                self.descend(idx + 1);
            }
            self.undo(mark);
            self.hop[u.index()] = Hop::Unset;
        }
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let x = self.trail.pop().unwrap();
            self.labels[x.index()] = None;
        }
    }

    /// Computes every label that became determined after assigning `u`'s
    /// hop and checks local constraints. Returns false on a conflict.
    fn resolve(&mut self, u: NodeId) -> bool {
        let mut stack = vec![u];
        while let Some(x) = stack.pop() {
            if self.labels[x.index()].is_some() {
                continue;
            }
            let value = match self.hop[x.index()] {
                Hop::Unset => continue,
                Hop::Bottom => None,
                Hop::Via(v) => match &self.labels[v.index()] {
                    None => continue,
                    Some(lv) => {
                        match self.srp.model.transfer(Edge::new(x, v), lv.as_ref()) {
                            None => return false,
                            some => some,
                        }
                    }
                },
            };
            self.labels[x.index()] = Some(value);
            self.trail.push(x);
            if !self.check_local(x) {
                return false;
            }
            for &w in self.srp.topology.receivers(x) {
                if self.hop[w.index()] == Hop::Via(x) && self.labels[w.index()].is_none() {
                    stack.push(w);
                }
            }
        }
        true
    }

    fn violates(&self, receiver: NodeId, sender: NodeId) -> bool {
        let (Some(lr), Some(ls)) = (&self.labels[receiver.index()], &self.labels[sender.index()])
        else {
            return false;
        };
        if receiver == self.srp.topology.dest() {
            return false;
        }
        match self.srp.model.transfer(Edge::new(receiver, sender), ls.as_ref()) {
            None => false,
            Some(offer) => match lr {
                None => true,
                Some(own) => self.srp.model.compare(&offer, own) == Pref::Better,
            },
        }
    }

    fn check_local(&self, x: NodeId) -> bool {
        let topo = &self.srp.topology;
        if topo.neighbors(x).iter().any(|&w| self.violates(x, w)) {
            return false;
        }
        !topo.receivers(x).iter().any(|&w| self.violates(w, x))
    }

    fn leaf(&mut self) {
        let n = self.srp.topology.num_nodes();
        let mut labels: Vec<Option<Attr>> = self
            .labels
            .iter()
            .map(|l| l.clone().unwrap_or(None))
            .collect();
        let pending: Vec<NodeId> = self
            .srp
            .topology
            .nodes()
            .filter(|u| self.labels[u.index()].is_none())
            .collect();
        if !pending.is_empty() {
            for _ in 0..n {
                for &u in &pending {
                    if let Hop::Via(v) = self.hop[u.index()] {
                        let next = self
                            .srp
                            .model
                            .transfer(Edge::new(u, v), labels[v.index()].as_ref());
                        labels[u.index()] = next;
                    }
                }
            }
            for &u in &pending {
                if labels[u.index()].is_none() {
                    return;
                }
            }
        }
        if self.srp.is_stable(&labels) {
            self.found.insert(labels);
        }
    }
}
