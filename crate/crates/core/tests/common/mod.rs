#![allow(dead_code)]

use std::collections::BTreeSet;

use cpcompress::compress::{check_abstraction, compress_network, CheckReport, CompressOptions, EcResult, Mapping};
use cpcompress::config::{Clause, Community, Match, NetworkSpec, Prefix, RoutePolicy, Verdict};
use cpcompress::oracle::Verdict as OracleVerdict;
use cpcompress::properties;
use cpcompress::srp::{NodeId, Solution};
use rand::Rng;

pub const ORACLE_BOUND: usize = 10;

pub fn comm(v: u16) -> Community {
    Community::new(1, v)
}

/// A random policy over `communities` and `lps`, with clause shapes the
/// config format allows.
pub fn random_policy(rng: &mut impl Rng, communities: &[Community], lps: &[u32]) -> RoutePolicy {
    let n = rng.random_range(0..=4);
    let mut clauses = Vec::new();
    let pick = |rng: &mut dyn rand::RngCore, k: usize| -> Vec<Community> {
        (0..k).map(|_| communities[rng.random_range(0..communities.len())]).collect()
    };
    for _ in 0..n {
        let matches = Match {
            communities: if !communities.is_empty() && rng.random_bool(0.6) {
                let k = rng.random_range(1..=3);
                Some(pick(rng, k))
            } else {
                None
            },
            ..Match::default()
        };
        let action = if rng.random_bool(0.75) { Verdict::Permit } else { Verdict::Deny };
        let delete_communities = if !communities.is_empty() && rng.random_bool(0.4) {
            let k = rng.random_range(1..=2);
            pick(rng, k)
        } else {
            Vec::new()
        };
        let add_communities = if !communities.is_empty() && rng.random_bool(0.4) {
            let k = rng.random_range(1..=2);
            pick(rng, k)
        } else {
            Vec::new()
        };
        let set_local_pref =
            if !lps.is_empty() && rng.random_bool(0.4) { Some(lps[rng.random_range(0..lps.len())]) } else { None };
        clauses.push(Clause { matches, action, delete_communities, add_communities, set_local_pref });
    }
    if rng.random_bool(0.5) {
        clauses.push(Clause::permit());
    }
    RoutePolicy { clauses }
}

pub fn prefix() -> Prefix {
    "10.0.0.0/24".parse().unwrap()
}

/// All subsets of `items`.
pub fn subsets<T: Copy + Ord>(items: &[T]) -> Vec<BTreeSet<T>> {
    (0..1u32 << items.len())
        .map(|m| (0..items.len()).filter(|i| m >> i & 1 == 1).map(|i| items[i]).collect())
        .collect()
}

/// Compresses `spec`, then re-reads every emitted abstract network and
/// sidecar and checks it against the concrete network.
pub fn compress_and_check(spec: &NetworkSpec) -> Result<Vec<(EcResult, CheckReport)>, String> {
    let results = compress_network(spec, &CompressOptions::default(), 1).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for r in results {
        let abs = NetworkSpec::parse(&r.abstract_net.spec.to_json()).map_err(|e| e.to_string())?;
        let mapping = Mapping::parse(&r.abstract_net.sidecar_json(spec), spec, &abs).map_err(|e| e.to_string())?;
        let report = check_abstraction(spec, &abs, &mapping, ORACLE_BOUND).map_err(|e| e.to_string())?;
        out.push((r, report));
    }
    Ok(out)
}

/// Compares the six property verdicts on every matched solution pair.
/// Targets and waypoints range over abstract nodes; their concrete
/// counterparts are the preimages under the matching refinement.
pub fn property_discrepancies(verdict: &OracleVerdict, abstract_nodes: usize) -> Vec<String> {
    let mut out = Vec::new();
    for m in &verdict.matches {
        let c: &Solution = &verdict.concrete_solutions[m.concrete];
        let a: &Solution = &verdict.abstract_solutions[m.abstract_index];
        let preimage = |x: usize| -> Vec<NodeId> {
            (0..m.refinement.len())
                .filter(|&u| m.refinement[u].index() == x)
                .map(|u| NodeId(u as u32))
                .collect()
        };
        for u in 0..m.refinement.len() {
            let fu = m.refinement[u];
            for t in 0..abstract_nodes {
                let ct = preimage(t);
                for w in 0..abstract_nodes {
                    let cw = preimage(w);
                    let vc = properties::evaluate(c, NodeId(u as u32), &ct, &cw);
                    let va = properties::evaluate(a, fu, &[NodeId(t as u32)], &[NodeId(w as u32)]);
                    if vc != va {
                        out.push(format!("source n{u} target {t} waypoint {w}: {vc:?} vs {va:?}"));
                    }
                }
            }
        }
    }
    out
}
