use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::mapping::Mapping;
use super::refine::Mode;
use crate::config::Protocol;
use crate::ecs::SpecializedNetwork;
use crate::policy_bdd::EdgeKey;
use crate::srp::{Edge, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    Shape,
    DestEquivalence,
    OrigEquivalence,
    ForallExists,
    ForallForall,
    TransEquivalence,
    TransferApprox,
    RequiresBgpMode,
    CaseSplit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertViolation {
    pub condition: Condition,
    pub detail: String,
}

impl fmt::Display for CertViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.condition, self.detail)
    }
}

/// Outcome of checking the effectiveness conditions of an abstraction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub mode: Mode,
    pub violations: Vec<CertViolation>,
}

impl Certificate {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Both sides of an abstraction with their edge keys, compiled by the
/// same policy compiler.
pub struct Pair<'a> {
    pub concrete: &'a SpecializedNetwork,
    pub concrete_keys: &'a HashMap<Edge, EdgeKey>,
    pub abstract_net: &'a SpecializedNetwork,
    pub abstract_keys: &'a HashMap<Edge, EdgeKey>,
    pub mapping: &'a Mapping,
    pub prefs: &'a [BTreeSet<u32>],
    pub statics: &'a dyn Fn(EdgeKey) -> bool,
}

struct Log(Vec<CertViolation>);

impl Log {
    fn push(&mut self, condition: Condition, detail: String) {
        self.0.push(CertViolation { condition, detail });
    }
}

fn members(p: &Pair) -> Vec<Vec<NodeId>> {
    let mut out = vec![Vec::new(); p.mapping.num_blocks()];
    for u in p.concrete.topology.nodes() {
        out[p.mapping.block(u)].push(u);
    }
    out
}

fn common(p: &Pair, log: &mut Log) -> Option<Vec<Vec<NodeId>>> {
    let m = p.mapping;
    let cn = p.concrete.topology.num_nodes();
    let an = p.abstract_net.topology.num_nodes();
    if m.block_of.len() != cn || m.abstract_block.len() != an {
        log.push(Condition::Shape, "mapping does not cover both networks".into());
        return None;
    }
    if p.concrete.protocol != p.abstract_net.protocol {
        log.push(Condition::Shape, "networks run different protocols".into());
        return None;
    }
    let members = members(p);
    for (b, list) in members.iter().enumerate() {
        if list.is_empty() {
            log.push(Condition::Shape, format!("block {b} has no concrete member"));
        }
    }
    let d = p.concrete.dest;
    let db = m.block(d);
    if members[db] != [d] {
        log.push(Condition::DestEquivalence, "destination shares its block".into());
    }
    if m.block_nodes[db] != [p.abstract_net.dest] {
        log.push(Condition::DestEquivalence, "destination block is not the abstract destination".into());
    }
    let srp_c = p.concrete.model();
    let srp_a = p.abstract_net.model();
    let h = m.h(vec![NodeId(0); cn]);
    if h.apply(&srp_c.initial()).ok() != Some(srp_a.initial()) {
        log.push(Condition::OrigEquivalence, "initial routes differ".into());
    }
    Some(members)
}

/// Effectiveness without case splitting: dest-, orig-, trans-equivalence
/// and forall-exists edges.
pub fn check_effective(p: &Pair) -> Certificate {
    let mut log = Log(Vec::new());
    let Some(members) = common(p, &mut log) else {
        return Certificate { mode: Mode::ForallExists, violations: log.0 };
    };
    let m = p.mapping;
    if m.is_split() {
        log.push(Condition::Shape, "split blocks need the BGP check".into());
    }
    let f = m.f();
    let protocol = p.concrete.protocol;
    for e in p.concrete.topology.edges() {
        let (bu, bv) = (m.block(e.node), m.block(e.neighbor));
        let key = p.concrete_keys[&e];
        if bu == bv {
            if protocol == Protocol::Static && (p.statics)(key) {
                log.push(
                    Condition::ForallExists,
                    format!("static route {} -> {} stays inside a block", e.node, e.neighbor),
                );
            }
            continue;
        }
        let ae = Edge::new(f[e.node.index()], f[e.neighbor.index()]);
        match p.abstract_keys.get(&ae) {
            None => log.push(
                Condition::ForallExists,
                format!("edge {} -> {} has no abstract image", e.node, e.neighbor),
            ),
            Some(&k) if k != key => log.push(
                Condition::TransEquivalence,
                format!("edge {} -> {} differs from its abstract edge", e.node, e.neighbor),
            ),
            _ => {}
        }
    }
    for ae in p.abstract_net.topology.edges() {
        let (ba, bb) = (m.abstract_block[ae.node.index()] as usize, m.abstract_block[ae.neighbor.index()] as usize);
        for &u in &members[ba] {
            let ok = p.concrete.topology.neighbors(u).iter().any(|&v| m.block(v) == bb);
            if !ok {
                log.push(
                    Condition::ForallExists,
                    format!("{u} has no neighbor in block {bb}"),
                );
            }
        }
    }
    if protocol == Protocol::Bgp {
        for list in members.iter().filter(|l| l.len() > 1) {
            if let Some(u) = list.iter().find(|u| p.prefs[u.index()].len() > 1) {
                log.push(
                    Condition::RequiresBgpMode,
                    format!("{u} has several local preferences but shares a block without case splitting"),
                );
            }
        }
    }
    Certificate { mode: Mode::ForallExists, violations: log.0 }
}

/// BGP effectiveness: forall-forall edges, transfer approximation and one
/// copy per reachable local preference.
pub fn check_bgp_effective(p: &Pair) -> Certificate {
    let mut log = Log(Vec::new());
    let Some(members) = common(p, &mut log) else {
        return Certificate { mode: Mode::ForallForall, violations: log.0 };
    };
    let m = p.mapping;
    for (b, list) in members.iter().enumerate() {
        let prefs: BTreeSet<u32> = list.iter().flat_map(|u| p.prefs[u.index()].iter().copied()).collect();
        let want = prefs.len().min(list.len()).max(1);
        if m.block_nodes[b].len() != want {
            log.push(
                Condition::CaseSplit,
                format!("block {b} has {} copies, needs {want}", m.block_nodes[b].len()),
            );
        }
    }
    let mut concrete_pairs: HashMap<(usize, usize), usize> = HashMap::new();
    for e in p.concrete.topology.edges() {
        let (bu, bv) = (m.block(e.node), m.block(e.neighbor));
        if bu == bv {
            log.push(
                Condition::ForallForall,
                format!("edge {} -> {} stays inside a block", e.node, e.neighbor),
            );
            continue;
        }
        *concrete_pairs.entry((bu, bv)).or_default() += 1;
        let key = p.concrete_keys[&e];
        for &a in &m.block_nodes[bu] {
            for &b in &m.block_nodes[bv] {
                match p.abstract_keys.get(&Edge::new(a, b)) {
                    Some(&k) if k == key => {}
                    Some(_) => log.push(
                        Condition::TransferApprox,
                        format!("edge {} -> {} differs from abstract {a} -> {b}", e.node, e.neighbor),
                    ),
                    None => {}
                }
            }
        }
    }
    let mut abstract_pairs: HashMap<(usize, usize), usize> = HashMap::new();
    for ae in p.abstract_net.topology.edges() {
        let (ba, bb) = (m.abstract_block[ae.node.index()] as usize, m.abstract_block[ae.neighbor.index()] as usize);
        if ba == bb {
            log.push(Condition::ForallForall, format!("abstract edge {} -> {} inside a block", ae.node, ae.neighbor));
            continue;
        }
        *abstract_pairs.entry((ba, bb)).or_default() += 1;
    }
    let mut pairs: BTreeSet<(usize, usize)> = concrete_pairs.keys().copied().collect();
    pairs.extend(abstract_pairs.keys().copied());
    for (b, c) in pairs {
        let cc = concrete_pairs.get(&(b, c)).copied().unwrap_or(0);
        let ac = abstract_pairs.get(&(b, c)).copied().unwrap_or(0);
        let full_c = members[b].len() * members[c].len();
        let full_a = m.block_nodes[b].len() * m.block_nodes[c].len();
        if cc != 0 && cc != full_c {
            log.push(Condition::ForallForall, format!("blocks {b} and {c} are not fully connected"));
        }
        if (cc == 0) != (ac == 0) || (ac != 0 && ac != full_a) {
            log.push(Condition::ForallForall, format!("abstract edges between {b} and {c} do not match"));
        }
    }
    Certificate { mode: Mode::ForallForall, violations: log.0 }
}

/// Picks the check matching the network: BGP networks with several local
/// preferences need the case-split conditions.
pub fn certify(p: &Pair) -> Certificate {
    let ff = p.concrete.protocol == Protocol::Bgp && p.prefs.iter().any(|s| s.len() > 1);
    if ff || p.mapping.is_split() {
        check_bgp_effective(p)
    } else {
        check_effective(p)
    }
}
