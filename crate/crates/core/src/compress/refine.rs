use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::partition::Partition;
use crate::config::{Protocol, DEFAULT_LOCAL_PREF};
use crate::ecs::SpecializedNetwork;
use crate::policy_bdd::EdgeKey;
use crate::srp::{Edge, NodeId};

/// How abstract edges relate to concrete ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Every member of a block has some edge into each adjacent block.
    ForallExists,
    /// Every member of a block is adjacent to every member of each adjacent
    /// block; blocks are later split into preference cases.
    ForallForall,
}

/// Result of the refinement: a partition of concrete nodes into blocks and
/// the number of abstract copies of each block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractionMap {
    pub mode: Mode,
    pub block_of: Vec<u32>,
    pub blocks: Vec<Vec<NodeId>>,
    pub prefs: Vec<BTreeSet<u32>>,
    pub copies: Vec<usize>,
}

impl AbstractionMap {
    pub fn num_abstract_nodes(&self) -> usize {
        self.copies.iter().sum()
    }

    pub fn block(&self, u: NodeId) -> usize {
        self.block_of[u.index()] as usize
    }
}

/// Local preferences a node may assign: the default plus every value set
/// by a permitting clause of one of its import policies.
pub fn node_prefs(net: &SpecializedNetwork) -> Vec<BTreeSet<u32>> {
    let mut out = vec![BTreeSet::from([DEFAULT_LOCAL_PREF]); net.topology.num_nodes()];
    if net.protocol != Protocol::Bgp {
        return out;
    }
    for e in net.topology.edges() {
        if let Some(p) = &net.edge(e).import {
            out[e.node.index()].extend(p.local_prefs());
        }
    }
    out
}

struct Refiner<'a> {
    adj: Vec<Vec<(u32, EdgeKey)>>,
    statics: &'a dyn Fn(EdgeKey) -> bool,
    concrete: bool,
}

impl Refiner<'_> {
    /// Edge keys towards each neighbor block. Without case splitting an
    /// edge inside the node's own block offers at best the block's own
    /// route one hop longer, so it is left out; the emitted network has no
    /// such edges either.
    fn signature(&self, p: &Partition, u: u32) -> Vec<u64> {
        let own = p.block(u);
        let mut sig: Vec<u64> = self.adj[u as usize]
            .iter()
            .filter(|&&(v, k)| self.concrete || (self.statics)(k) || p.block(v) != own)
            .map(|&(v, k)| {
                let n = if self.concrete || (self.statics)(k) {
                    (1u64 << 32) | v as u64
                } else {
                    p.block(v) as u64
                };
                ((k as u64) << 33) | n
            })
            .collect();
        sig.sort_unstable();
        sig.dedup();
        sig
    }

    fn refine(&self, p: &mut Partition, b: usize) -> bool {
        let sigs: HashMap<u32, Vec<u64>> = p
            .members(b)
            .iter()
            .map(|&u| (u, self.signature(p, u)))
            .collect();
        p.split_by(b, |u| sigs[&u].clone())
    }

    /// Splits one block pair whose edges carry more than one key. Returns
    /// false when all pairs are consistent.
    fn fix_key_conflict(&self, p: &mut Partition) -> bool {
        let mut seen: BTreeMap<(u32, u32), BTreeSet<EdgeKey>> = BTreeMap::new();
        for (u, list) in self.adj.iter().enumerate() {
            let bu = p.block(u as u32);
            for &(v, k) in list {
                let bv = p.block(v);
                if bu != bv {
                    seen.entry((bu, bv)).or_default().insert(k);
                }
            }
        }
        let Some((&(bb, bc), _)) = seen.iter().find(|(_, keys)| keys.len() > 1) else {
            return false;
        };
        let mut received: HashMap<u32, BTreeSet<EdgeKey>> = HashMap::new();
        let mut sent: HashMap<u32, BTreeSet<(EdgeKey, u32)>> = HashMap::new();
        for &u in p.members(bb as usize) {
            for &(v, k) in &self.adj[u as usize] {
                if p.block(v) == bc {
                    received.entry(v).or_default().insert(k);
                    sent.entry(u).or_default().insert((k, v));
                }
            }
        }
        if p.split_by(bc as usize, |v| received.get(&v).cloned().unwrap_or_default()) {
            return true;
        }
        let split = p.split_by(bb as usize, |u| sent.get(&u).cloned().unwrap_or_default());
        debug_assert!(split, "key conflict could not be resolved");
        split
    }
}

/// Partition refinement from `{{d}, V \ {d}}` until every block is
/// stable under the edge-key signature, followed by preference-case
/// splitting for BGP.
pub fn find_abstraction(
    net: &SpecializedNetwork,
    keys: &HashMap<Edge, EdgeKey>,
    statics: &dyn Fn(EdgeKey) -> bool,
) -> AbstractionMap {
    let topo = &net.topology;
    let n = topo.num_nodes();
    let prefs = node_prefs(net);
    let mode = if prefs.iter().any(|p| p.len() > 1) { Mode::ForallForall } else { Mode::ForallExists };
    let adj: Vec<Vec<(u32, EdgeKey)>> = topo
        .nodes()
        .map(|u| {
            topo.neighbors(u)
                .iter()
                .map(|&v| (v.0, keys[&Edge::new(u, v)]))
                .collect()
        })
        .collect();
    let refiner = Refiner { adj, statics, concrete: mode == Mode::ForallForall };
    let mut p = Partition::initial(n, topo.dest());
    loop {
        loop {
            let before = p.len();
            let mut b = 0;
            while b < p.len() {
                if p.members(b).len() > 1 {
                    refiner.refine(&mut p, b);
                }
                b += 1;
            }
            if p.len() == before {
                break;
            }
        }
        if !refiner.fix_key_conflict(&mut p) {
            break;
        }
    }
    let (block_of, blocks) = p.canonical();
    let block_prefs: Vec<BTreeSet<u32>> = blocks
        .iter()
        .map(|members| members.iter().flat_map(|u| prefs[u.index()].iter().copied()).collect())
        .collect();
    let copies = blocks
        .iter()
        .zip(&block_prefs)
        .map(|(m, pr)| match mode {
            Mode::ForallExists => 1,
            Mode::ForallForall => pr.len().min(m.len()).max(1),
        })
        .collect();
    AbstractionMap { mode, block_of, blocks, prefs: block_prefs, copies }
}
