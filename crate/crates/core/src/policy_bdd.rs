//! Compilation of route policies into BDD relations between input and
//! output route fields, and the per-edge grouping keys built from them.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::bdd::{BddId, BddManager, FALSE, TRUE};
use crate::config::{Community, NetworkSpec, Protocol, RouteFields, SpecializedPolicy, Verdict, DEFAULT_LOCAL_PREF};
use crate::ecs::SpecializedNetwork;
use crate::protocols::EdgeConfig;
use crate::srp::Edge;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BddError {
    #[error("community {0} is not part of the variable layout")]
    LayoutMiss(Community),
    #[error("local preference {0} is not part of the variable layout")]
    LocalPrefMiss(u32),
    #[error("relations were compiled under different layouts")]
    LayoutMismatch,
}

/// Variable order: for each community its input then output bit, then
/// the same for each one-hot local-preference value, then the output drop
/// bit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VarLayout {
    pub communities: Vec<Community>,
    pub local_prefs: Vec<u32>,
    /// Communities that are deliberately not tracked.
    pub ignored: BTreeSet<Community>,
}

impl VarLayout {
    pub fn new(communities: impl IntoIterator<Item = Community>, local_prefs: impl IntoIterator<Item = u32>) -> Self {
        let communities: BTreeSet<Community> = communities.into_iter().collect();
        let mut lps: BTreeSet<u32> = local_prefs.into_iter().collect();
        lps.insert(DEFAULT_LOCAL_PREF);
        VarLayout {
            communities: communities.into_iter().collect(),
            local_prefs: lps.into_iter().collect(),
            ignored: BTreeSet::new(),
        }
    }

    /// Layout covering every community and local preference of `spec`;
    /// with `drop_unused`, communities no policy tests are ignored.
    pub fn for_spec(spec: &NetworkSpec, drop_unused: bool) -> Self {
        let (all, matched) = spec.communities();
        let lps: Vec<u32> = spec.policies.values().flat_map(|p| p.local_prefs()).collect();
        if drop_unused {
            let mut l = VarLayout::new(matched.iter().copied(), lps);
            l.ignored = all.difference(&matched).copied().collect();
            l
        } else {
            VarLayout::new(all, lps)
        }
    }

    pub fn num_vars(&self) -> u32 {
        2 * (self.communities.len() + self.local_prefs.len()) as u32 + 1
    }

    pub fn community_index(&self, c: Community) -> Option<usize> {
        self.communities.binary_search(&c).ok()
    }

    pub fn lp_index(&self, lp: u32) -> Option<usize> {
        self.local_prefs.binary_search(&lp).ok()
    }

    pub fn comm_in(&self, i: usize) -> u32 {
        2 * i as u32
    }

    pub fn comm_out(&self, i: usize) -> u32 {
        2 * i as u32 + 1
    }

    pub fn lp_in(&self, j: usize) -> u32 {
        2 * (self.communities.len() + j) as u32
    }

    pub fn lp_out(&self, j: usize) -> u32 {
        2 * (self.communities.len() + j) as u32 + 1
    }

    pub fn drop_out(&self) -> u32 {
        self.num_vars() - 1
    }

    pub fn var_name(&self, v: u32) -> String {
        if v == self.drop_out() {
            return "drop'".into();
        }
        let primed = if v % 2 == 1 { "'" } else { "" };
        let i = (v / 2) as usize;
        if i < self.communities.len() {
            format!("{}{primed}", self.communities[i])
        } else {
            format!("lp{}{primed}", self.local_prefs[i - self.communities.len()])
        }
    }

    pub fn input_vars(&self) -> Vec<u32> {
        (0..self.num_vars() - 1).filter(|v| v % 2 == 0).collect()
    }

    pub fn output_vars(&self) -> Vec<u32> {
        (0..self.num_vars()).filter(|v| v % 2 == 1 || *v == self.drop_out()).collect()
    }

    /// Input assignment encoding `route`.
    pub fn encode_input(&self, route: &RouteFields) -> Result<Vec<(u32, bool)>, BddError> {
        let mut out = Vec::new();
        for c in &route.communities {
            if self.community_index(*c).is_none() && !self.ignored.contains(c) {
                return Err(BddError::LayoutMiss(*c));
            }
        }
        for (i, c) in self.communities.iter().enumerate() {
            out.push((self.comm_in(i), route.communities.contains(c)));
        }
        let lp = self.lp_index(route.local_pref).ok_or(BddError::LocalPrefMiss(route.local_pref))?;
        for j in 0..self.local_prefs.len() {
            out.push((self.lp_in(j), j == lp));
        }
        Ok(out)
    }
}

/// A compiled relation together with the layout it refers to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolicyRelation {
    pub bdd: BddId,
    pub layout: Arc<VarLayout>,
}

/// Route fields as boolean functions of the input variables.
#[derive(Clone, Debug)]
struct SymRoute {
    comm: Vec<BddId>,
    lp: Vec<BddId>,
    drop: BddId,
}

/// Interned per-edge grouping key.
pub type EdgeKey = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct KeyParts {
    relation: BddId,
    ospf_cost: u32,
    crosses_area: bool,
    static_route: bool,
}

type EdgeCacheKey = (Option<Arc<SpecializedPolicy>>, Option<Arc<SpecializedPolicy>>, bool);

/// Owns a BDD manager and compiles policies under one layout.
#[derive(Debug)]
pub struct PolicyCompiler {
    pub mgr: BddManager,
    layout: Arc<VarLayout>,
    edge_cache: HashMap<EdgeCacheKey, BddId>,
    keys: HashMap<KeyParts, EdgeKey>,
    parts: Vec<KeyParts>,
}

impl PolicyCompiler {
    pub fn new(layout: VarLayout) -> Self {
        PolicyCompiler {
            mgr: BddManager::new(),
            layout: Arc::new(layout),
            edge_cache: HashMap::new(),
            keys: HashMap::new(),
            parts: Vec::new(),
        }
    }

    pub fn layout(&self) -> &Arc<VarLayout> {
        &self.layout
    }

    fn input(&mut self) -> SymRoute {
        let l = self.layout.clone();
        SymRoute {
            comm: (0..l.communities.len()).map(|i| self.mgr.var(l.comm_in(i))).collect(),
            lp: (0..l.local_prefs.len()).map(|j| self.mgr.var(l.lp_in(j))).collect(),
            drop: FALSE,
        }
    }

    fn comm_index(&self, c: Community) -> Result<Option<usize>, BddError> {
        match self.layout.community_index(c) {
            Some(i) => Ok(Some(i)),
            None if self.layout.ignored.contains(&c) => Ok(None),
            None => Err(BddError::LayoutMiss(c)),
        }
    }

    fn apply(&mut self, r: &SymRoute, p: &SpecializedPolicy) -> Result<SymRoute, BddError> {
        let mut out = SymRoute { comm: vec![FALSE; r.comm.len()], lp: vec![FALSE; r.lp.len()], drop: TRUE };
        let mut remaining = TRUE;
        for clause in &p.clauses {
            let cond = match &clause.communities {
                None => TRUE,
                Some(cs) => {
                    let mut any = FALSE;
                    for c in cs {
                        if let Some(i) = self.comm_index(*c)? {
                            any = self.mgr.or(any, r.comm[i]);
                        }
                    }
                    any
                }
            };
            let fire = self.mgr.and(remaining, cond);
            let ncond = self.mgr.not(cond);
            remaining = self.mgr.and(remaining, ncond);
            let mut next = r.clone();
            match clause.action {
                Verdict::Deny => next.drop = TRUE,
                Verdict::Permit => {
                    for c in &clause.delete {
                        if let Some(i) = self.comm_index(*c)? {
                            next.comm[i] = FALSE;
                        }
                    }
                    for c in &clause.add {
                        if let Some(i) = self.comm_index(*c)? {
                            next.comm[i] = TRUE;
                        }
                    }
                    if let Some(lp) = clause.set_local_pref {
                        let j = self.layout.lp_index(lp).ok_or(BddError::LocalPrefMiss(lp))?;
                        for (k, bit) in next.lp.iter_mut().enumerate() {
                            *bit = if k == j { TRUE } else { FALSE };
                        }
                    }
                }
            }
            for i in 0..out.comm.len() {
                out.comm[i] = self.mgr.ite(fire, next.comm[i], out.comm[i]);
            }
            for j in 0..out.lp.len() {
                out.lp[j] = self.mgr.ite(fire, next.lp[j], out.lp[j]);
            }
            out.drop = self.mgr.ite(fire, next.drop, out.drop);
            if remaining == FALSE {
                break;
            }
        }
        out.drop = self.mgr.or(out.drop, r.drop);
        Ok(out)
    }

    fn reset_lp(&mut self, r: &mut SymRoute) {
        let j = self.layout.lp_index(DEFAULT_LOCAL_PREF).expect("default lp in layout");
        for (k, bit) in r.lp.iter_mut().enumerate() {
            *bit = if k == j { TRUE } else { FALSE };
        }
    }

    fn relation(&mut self, r: &SymRoute) -> BddId {
        let l = self.layout.clone();
        let live = self.mgr.not(r.drop);
        let dv = self.mgr.var(l.drop_out());
        let mut rel = self.mgr.iff(dv, r.drop);
        for j in (0..r.lp.len()).rev() {
            let v = self.mgr.var(l.lp_out(j));
            let val = self.mgr.and(live, r.lp[j]);
            let eq = self.mgr.iff(v, val);
            rel = self.mgr.and(rel, eq);
        }
        for i in (0..r.comm.len()).rev() {
            let v = self.mgr.var(l.comm_out(i));
            let val = self.mgr.and(live, r.comm[i]);
            let eq = self.mgr.iff(v, val);
            rel = self.mgr.and(rel, eq);
        }
        rel
    }

    fn wrap(&self, bdd: BddId) -> PolicyRelation {
        PolicyRelation { bdd, layout: self.layout.clone() }
    }

    /// Relation of a single policy; `None` stands for permit-all.
    pub fn compile_policy(&mut self, p: Option<&SpecializedPolicy>) -> Result<PolicyRelation, BddError> {
        let input = self.input();
        let out = match p {
            Some(p) => self.apply(&input, p)?,
            None => input,
        };
        let rel = self.relation(&out);
        Ok(self.wrap(rel))
    }

    /// Relation of a whole edge: ACL, sender export, local-pref reset,
    /// receiver import.
    pub fn compile_edge(&mut self, cfg: &EdgeConfig) -> Result<PolicyRelation, BddError> {
        let cache_key = (cfg.export.clone(), cfg.import.clone(), cfg.blocked);
        if let Some(&b) = self.edge_cache.get(&cache_key) {
            return Ok(self.wrap(b));
        }
        let mut r = self.input();
        if cfg.blocked {
            r.drop = TRUE;
        }
        if let Some(p) = &cfg.export {
            r = self.apply(&r, p)?;
        }
        self.reset_lp(&mut r);
        if let Some(p) = &cfg.import {
            r = self.apply(&r, p)?;
        }
        let rel = self.relation(&r);
        self.edge_cache.insert(cache_key, rel);
        Ok(self.wrap(rel))
    }

    /// Drop decision of an edge for protocols whose routes carry no
    /// communities: the relation at the empty route, projected to drop'.
    fn drop_only(&mut self, rel: BddId) -> BddId {
        let l = self.layout.clone();
        let empty = l.encode_input(&RouteFields::default()).expect("empty route encodes");
        let r = self.mgr.restrict(rel, &empty);
        let outs: BTreeSet<u32> = l.output_vars().into_iter().filter(|&v| v != l.drop_out()).collect();
        self.mgr.exists(r, &outs)
    }

    pub fn edge_key(&mut self, protocol: Protocol, cfg: &EdgeConfig) -> Result<EdgeKey, BddError> {
        let parts = match protocol {
            Protocol::Bgp => KeyParts {
                relation: self.compile_edge(cfg)?.bdd,
                ospf_cost: 0,
                crosses_area: false,
                static_route: false,
            },
            Protocol::Rip | Protocol::Ospf => {
                let rel = self.compile_edge(cfg)?.bdd;
                let ospf = protocol == Protocol::Ospf;
                KeyParts {
                    relation: self.drop_only(rel),
                    ospf_cost: if ospf { cfg.ospf_cost } else { 0 },
                    crosses_area: ospf && cfg.crosses_area,
                    static_route: false,
                }
            }
            Protocol::Static => KeyParts {
                relation: TRUE,
                ospf_cost: 0,
                crosses_area: false,
                static_route: cfg.static_route && !cfg.blocked,
            },
        };
        if let Some(&k) = self.keys.get(&parts) {
            return Ok(k);
        }
        let k = self.parts.len() as EdgeKey;
        self.parts.push(parts);
        self.keys.insert(parts, k);
        Ok(k)
    }

    /// Keys for every directed edge of a specialized network.
    pub fn edge_keys(&mut self, net: &SpecializedNetwork) -> Result<HashMap<Edge, EdgeKey>, BddError> {
        let mut out = HashMap::with_capacity(net.edges.len());
        for e in net.topology.edges() {
            out.insert(e, self.edge_key(net.protocol, net.edge(e))?);
        }
        Ok(out)
    }

    pub fn is_static_key(&self, key: EdgeKey) -> bool {
        self.parts[key as usize].static_route
    }

    pub fn restrict(&mut self, rel: &PolicyRelation, assignment: &[(u32, bool)]) -> PolicyRelation {
        let b = self.mgr.restrict(rel.bdd, assignment);
        PolicyRelation { bdd: b, layout: rel.layout.clone() }
    }

    pub fn to_dot(&self, rel: &PolicyRelation) -> String {
        let l = rel.layout.clone();
        self.mgr.to_dot(rel.bdd, |v| l.var_name(v))
    }

    /// Output route of `rel` at input `route`, or `None` when dropped.
    pub fn image(&mut self, rel: &PolicyRelation, route: &RouteFields) -> Result<Option<RouteFields>, BddError> {
        let l = rel.layout.clone();
        let input = l.encode_input(route)?;
        let g = self.mgr.restrict(rel.bdd, &input);
        let mut assignment = Vec::new();
        let mut cur = g;
        for v in l.output_vars() {
            let hi = self.mgr.restrict(cur, &[(v, true)]);
            let (val, next) = if hi != FALSE { (true, hi) } else { (false, self.mgr.restrict(cur, &[(v, false)])) };
            assignment.push((v, val));
            cur = next;
        }
        if assignment.iter().any(|&(v, b)| v == l.drop_out() && b) {
            return Ok(None);
        }
        let mut out = RouteFields { communities: BTreeSet::new(), local_pref: DEFAULT_LOCAL_PREF };
        out.communities = route.communities.iter().filter(|c| l.ignored.contains(c)).copied().collect();
        for (i, c) in l.communities.iter().enumerate() {
            if assignment.iter().any(|&(v, b)| v == l.comm_out(i) && b) {
                out.communities.insert(*c);
            }
        }
        for (j, lp) in l.local_prefs.iter().enumerate() {
            if assignment.iter().any(|&(v, b)| v == l.lp_out(j) && b) {
                out.local_pref = *lp;
            }
        }
        Ok(Some(out))
    }
}

pub fn bdd_equal(a: &PolicyRelation, b: &PolicyRelation) -> Result<bool, BddError> {
    if a.layout != b.layout {
        return Err(BddError::LayoutMismatch);
    }
    Ok(a.bdd == b.bdd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Clause, Match, Prefix, RoutePolicy};

    fn c(s: &str) -> Community {
        s.parse().unwrap()
    }

    fn spec(p: &RoutePolicy) -> SpecializedPolicy {
        let prefix: Prefix = "10.0.0.0/24".parse().unwrap();
        p.specialize(prefix, Protocol::Bgp)
    }

    fn matching(cs: &[&str]) -> Match {
        Match { communities: Some(cs.iter().map(|s| c(s)).collect()), ..Match::default() }
    }

    #[test]
    fn permit_all_is_identity() {
        let layout = VarLayout::new([c("1:1"), c("1:2")], [200]);
        let mut pc = PolicyCompiler::new(layout.clone());
        let rel = pc.compile_policy(None).unwrap();
        let mut expected = TRUE;
        for v in layout.input_vars() {
            let a = pc.mgr.var(v);
            let b = pc.mgr.var(v + 1);
            let eq = pc.mgr.iff(a, b);
            expected = pc.mgr.and(expected, eq);
        }
        let nd = pc.mgr.var(layout.drop_out());
        let nd = pc.mgr.not(nd);
        expected = pc.mgr.and(expected, nd);
        assert_eq!(rel.bdd, expected);
    }

    #[test]
    fn clause_split_equals_disjunction() {
        let mut pc = PolicyCompiler::new(VarLayout::new([c("1:1"), c("1:2")], []));
        let split = RoutePolicy {
            clauses: vec![
                Clause { matches: matching(&["1:1"]), ..Clause::permit() },
                Clause { matches: matching(&["1:2"]), ..Clause::permit() },
            ],
        };
        let joined = RoutePolicy { clauses: vec![Clause { matches: matching(&["1:1", "1:2"]), ..Clause::permit() }] };
        let a = pc.compile_policy(Some(&spec(&split))).unwrap();
        let b = pc.compile_policy(Some(&spec(&joined))).unwrap();
        assert!(bdd_equal(&a, &b).unwrap());
    }

    #[test]
    fn unknown_community_is_a_layout_miss() {
        let mut pc = PolicyCompiler::new(VarLayout::new([c("1:1")], []));
        let p = RoutePolicy { clauses: vec![Clause { add_communities: vec![c("9:9")], ..Clause::permit() }] };
        assert_eq!(pc.compile_policy(Some(&spec(&p))), Err(BddError::LayoutMiss(c("9:9"))));
    }

    #[test]
    fn different_layouts_do_not_compare() {
        let mut a = PolicyCompiler::new(VarLayout::new([c("1:1")], []));
        let mut b = PolicyCompiler::new(VarLayout::new([c("1:2")], []));
        let ra = a.compile_policy(None).unwrap();
        let rb = b.compile_policy(None).unwrap();
        assert_eq!(bdd_equal(&ra, &rb), Err(BddError::LayoutMismatch));
    }

    #[test]
    fn image_matches_interpreter() {
        let p = RoutePolicy {
            clauses: vec![
                Clause {
                    matches: matching(&["1:1", "1:2"]),
                    add_communities: vec![c("1:3")],
                    set_local_pref: Some(350),
                    ..Clause::permit()
                },
                Clause::permit(),
            ],
        };
        let sp = spec(&p);
        let mut pc = PolicyCompiler::new(VarLayout::new([c("1:1"), c("1:2"), c("1:3")], [350]));
        let rel = pc.compile_policy(Some(&sp)).unwrap();
        let mut r = RouteFields::default();
        r.communities.insert(c("1:2"));
        assert_eq!(pc.image(&rel, &r).unwrap(), sp.apply(&r));
        assert_eq!(pc.image(&rel, &r).unwrap().unwrap().local_pref, 350);
        let plain = RouteFields::default();
        assert_eq!(pc.image(&rel, &plain).unwrap(), Some(plain));
    }
}
