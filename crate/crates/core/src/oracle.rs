//! Exhaustive control-plane equivalence check between a concrete SRP and
//! an abstract one, by enumerating every stable solution of both.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::compress::Mapping;
use crate::protocols::{AbstractionError, AttrAbstraction};
use crate::srp::{Attr, NodeId, Pref, Solution, Srp, SrpError, Topology};

pub const DEFAULT_BOUND: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error(transparent)]
    Srp(#[from] SrpError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// A concrete solution has no abstract counterpart.
    ConcreteUnmatched,
    /// An abstract solution has no concrete counterpart.
    AbstractUnmatched,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub direction: Direction,
    pub solution: Solution,
    /// The solution's forwarding, projected onto blocks, contains a cycle.
    pub projected_loop: bool,
}

/// A concrete and an abstract solution related by `refinement`, which maps
/// each concrete node to an abstract node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionMatch {
    pub concrete: usize,
    pub abstract_index: usize,
    pub refinement: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub equivalent: bool,
    pub concrete_solutions: Vec<Solution>,
    pub abstract_solutions: Vec<Solution>,
    /// One match per concrete solution, in order (when equivalent).
    pub matches: Vec<SolutionMatch>,
    pub counterexample: Option<Counterexample>,
}

/// h(L(u)) = L̂(f(u)) for every concrete node.
pub fn check_label_equivalence(
    concrete: &Solution,
    abs: &Solution,
    h: &AttrAbstraction,
    f: &[NodeId],
) -> Result<bool, AbstractionError> {
    for (u, label) in concrete.labels.iter().enumerate() {
        let mapped = h.apply_label(label.as_ref())?;
        if mapped.as_ref() != abs.labels[f[u].index()].as_ref() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// (u, v) ∈ fwd(u) ⟺ (f(u), f(v)) ∈ fwd̂(f(u)) for every concrete edge.
pub fn check_fwd_equivalence(topology: &Topology, concrete: &Solution, abs: &Solution, f: &[NodeId]) -> bool {
    topology.edges().all(|e| {
        let (fu, fv) = (f[e.node.index()], f[e.neighbor.index()]);
        let abstract_fwd = fu != fv && abs.forwards(fu, fv);
        concrete.forwards(e.node, e.neighbor) == abstract_fwd
    })
}

/// True when the block-level projection of `sol`'s forwarding has a cycle.
pub fn projected_loop(sol: &Solution, block_of: &[u32]) -> bool {
    let n = block_of.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut adj = vec![std::collections::BTreeSet::new(); n];
    for (u, hops) in sol.fwd.iter().enumerate() {
        for v in hops {
            adj[block_of[u] as usize].insert(block_of[v.index()] as usize);
        }
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    fn visit(b: usize, adj: &[std::collections::BTreeSet<usize>], state: &mut [u8]) -> bool {
        state[b] = 1;
        for &c in &adj[b] {
            if state[c] == 1 || (state[c] == 0 && visit(c, adj, state)) {
                return true;
            }
        }
        state[b] = 2;
        false
    }
    (0..n).any(|b| state[b] == 0 && visit(b, &adj, &mut state))
}

/// The attributes tied with `u`'s label among its choices (the label
/// itself at the destination). Equals `{L(u)}` when the ranking has no
/// ties between distinct attributes.
pub fn best_choices(srp: &Srp, sol: &Solution, u: NodeId) -> BTreeSet<Attr> {
    let Some(own) = sol.labels[u.index()].as_ref() else {
        return BTreeSet::new();
    };
    if u == srp.topology.dest() {
        return BTreeSet::from([own.clone()]);
    }
    srp.choices(&sol.labels, u)
        .into_iter()
        .filter(|(_, a)| srp.model.compare(a, own) == Pref::Equivalent)
        .map(|(_, a)| a)
        .collect()
}

/// Per-node summary used to prune refinement candidates: the best
/// choices mapped to block level, and the blocks forwarded to.
type Signature = (BTreeSet<Attr>, BTreeSet<u32>);

struct Matcher<'a> {
    concrete: &'a Srp,
    abs: &'a Srp,
    mapping: &'a Mapping,
}

impl Matcher<'_> {
    fn signatures(
        &self,
        srp: &Srp,
        sol: &Solution,
        h: &AttrAbstraction,
        block: &[u32],
    ) -> Result<Vec<Signature>, AbstractionError> {
        srp.topology
            .nodes()
            .map(|u| {
                let best = best_choices(srp, sol, u)
                    .iter()
                    .map(|a| h.apply(a))
                    .collect::<Result<_, _>>()?;
                let fwd = sol.fwd[u.index()].iter().map(|v| block[v.index()]).collect();
                Ok((best, fwd))
            })
            .collect()
    }

    fn concrete_signatures(&self, c: &Solution) -> Result<Vec<Signature>, AbstractionError> {
        let m = self.mapping;
        let h = m.h(m.block_of.iter().map(|&b| NodeId(b)).collect());
        self.signatures(self.concrete, c, &h, &m.block_of)
    }

    fn abstract_signatures(&self, a: &Solution) -> Result<Vec<Signature>, AbstractionError> {
        let m = self.mapping;
        let h = if m.bgp {
            AttrAbstraction::BgpPathRename { map: m.abstract_block.iter().map(|&b| NodeId(b)).collect() }
        } else {
            AttrAbstraction::Identity
        };
        self.signatures(self.abs, a, &h, &m.abstract_block)
    }

    /// Searches an onto refinement relating `c` and `a`.
    ///
    /// Labels are compared through the best choices of each node, mapped
    /// to block level by (f, h). Ties let members of one block keep
    /// different but equally ranked labels, which a single abstract node
    /// cannot; what must agree is the set they choose from. Likewise, once
    /// a block is split its members' exact AS paths can name different
    /// copies, so paths are compared modulo f rather than the refinement.
    /// Forwarding is compared exactly, modulo the refinement.
    fn refinement(
        &self,
        c: &Solution,
        csig: &[Signature],
        a: &Solution,
        asig: &[Signature],
    ) -> Option<Vec<NodeId>> {
        let m = self.mapping;
        let mut candidates: Vec<Vec<NodeId>> = Vec::with_capacity(csig.len());
        for (u, sig) in csig.iter().enumerate() {
            let list: Vec<NodeId> = m.block_nodes[m.block_of[u] as usize]
                .iter()
                .copied()
                .filter(|x| &asig[x.index()] == sig)
                .collect();
            if list.is_empty() {
                return None;
            }
            candidates.push(list);
        }
        let mut assign = vec![NodeId(u32::MAX); csig.len()];
        let mut used = vec![0usize; m.abstract_block.len()];
        self.search(0, c, a, &candidates, &mut assign, &mut used)
    }

    fn search(
        &self,
        u: usize,
        c: &Solution,
        a: &Solution,
        candidates: &[Vec<NodeId>],
        assign: &mut Vec<NodeId>,
        used: &mut Vec<usize>,
    ) -> Option<Vec<NodeId>> {
        if u == candidates.len() {
            let onto = used.iter().all(|&k| k > 0);
            return (onto && check_fwd_equivalence(&self.concrete.topology, c, a, assign)).then(|| assign.clone());
        }
        for &x in &candidates[u] {
            assign[u] = x;
            used[x.index()] += 1;
            let r = self.search(u + 1, c, a, candidates, assign, used);
            used[x.index()] -= 1;
            if r.is_some() {
                return r;
            }
        }
        None
    }
}

/// Enumerates both SRPs (concrete up to `bound` nodes) and checks that
/// every concrete solution has a label- and forwarding-equivalent abstract
/// one and vice versa.
pub fn check_cp_equivalence(concrete: &Srp, abs: &Srp, mapping: &Mapping, bound: usize) -> Result<Verdict, OracleError> {
    let cs = concrete.enumerate_solutions(bound)?;
    let as_ = abs.enumerate_solutions(bound.max(abs.topology.num_nodes()))?;
    let matcher = Matcher { concrete, abs, mapping };
    let csigs: Vec<Vec<Signature>> = cs.iter().map(|c| matcher.concrete_signatures(c)).collect::<Result<_, _>>()?;
    let asigs: Vec<Vec<Signature>> = as_.iter().map(|a| matcher.abstract_signatures(a)).collect::<Result<_, _>>()?;
    let mut matches = Vec::new();
    let mut counterexample = None;
    for (i, c) in cs.iter().enumerate() {
        let found = as_.iter().enumerate().find_map(|(j, a)| {
            matcher
                .refinement(c, &csigs[i], a, &asigs[j])
                .map(|r| SolutionMatch { concrete: i, abstract_index: j, refinement: r })
        });
        match found {
            Some(m) => matches.push(m),
            None => {
                counterexample = Some(Counterexample {
                    direction: Direction::ConcreteUnmatched,
                    solution: c.clone(),
                    projected_loop: projected_loop(c, &mapping.block_of),
                });
                break;
            }
        }
    }
    if counterexample.is_none() {
        for (j, a) in as_.iter().enumerate() {
            let ok = cs
                .iter()
                .enumerate()
                .any(|(i, c)| matcher.refinement(c, &csigs[i], a, &asigs[j]).is_some());
            if !ok {
                counterexample = Some(Counterexample {
                    direction: Direction::AbstractUnmatched,
                    solution: a.clone(),
                    projected_loop: projected_loop(a, &mapping.abstract_block),
                });
                break;
            }
        }
    }
    Ok(Verdict {
        equivalent: counterexample.is_none(),
        concrete_solutions: cs,
        abstract_solutions: as_,
        matches,
        counterexample,
    })
}
