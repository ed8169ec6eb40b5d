//! Abstraction search (partition refinement over policy keys), effective
//! abstraction certificates and emission of the abstract network.

mod build;
mod certify;
mod mapping;
mod partition;
mod refine;

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use thiserror::Error;

pub use build::{build_abstract_network, AbstractNetwork};
pub use certify::{certify, check_bgp_effective, check_effective, CertViolation, Certificate, Condition, Pair};
pub use mapping::Mapping;
pub use partition::Partition;
pub use refine::{find_abstraction, node_prefs, AbstractionMap, Mode};

use crate::config::{ConfigError, NetworkSpec, Prefix};
use crate::ecs::{compute_ecs, specialize, DestEquivClass, SpecializedNetwork};
use crate::policy_bdd::{BddError, EdgeKey, PolicyCompiler, VarLayout};
use crate::srp::{Edge, NodeId};

#[derive(Debug, Error)]
pub enum CompressError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bdd(#[from] BddError),
    #[error("abstraction is not certified: {0}")]
    CertificateMissing(String),
    #[error("bad mapping: {0}")]
    Mapping(String),
}

#[derive(Clone, Debug)]
pub struct CompressOptions {
    /// Forget communities that no policy tests.
    pub drop_unused_tags: bool,
}

impl Default for CompressOptions {
    fn default() -> Self {
        CompressOptions { drop_unused_tags: true }
    }
}

/// Compression of one destination class towards one destination node.
#[derive(Clone, Debug)]
pub struct EcResult {
    pub ec_index: usize,
    pub ec: DestEquivClass,
    pub dest: NodeId,
    pub concrete_nodes: usize,
    pub concrete_links: usize,
    pub abstraction: AbstractionMap,
    pub abstract_net: AbstractNetwork,
    pub certificate: Certificate,
}

impl EcResult {
    pub fn abstract_nodes(&self) -> usize {
        self.abstract_net.spec.num_nodes()
    }

    pub fn abstract_links(&self) -> usize {
        self.abstract_net.spec.num_links()
    }
}

fn static_flags(pc: &PolicyCompiler, keys: &[&HashMap<Edge, EdgeKey>]) -> HashMap<EdgeKey, bool> {
    keys.iter()
        .flat_map(|m| m.values())
        .map(|&k| (k, pc.is_static_key(k)))
        .collect()
}

/// Specializes an abstract network to the class originated by its
/// destination block.
pub fn abstract_side(abs: &NetworkSpec, dest: NodeId) -> Result<SpecializedNetwork, CompressError> {
    let ecs = compute_ecs(abs);
    for ec in &ecs {
        if ec.origins.contains(&dest) {
            let nets = specialize(abs, ec)?;
            if let Some(n) = nets.into_iter().find(|n| n.dest == dest) {
                return Ok(n);
            }
        }
    }
    Err(CompressError::Mapping("abstract destination originates nothing".into()))
}

/// Compresses one specialized network.
pub fn compress_specialized(
    spec: &NetworkSpec,
    net: &SpecializedNetwork,
    ec_index: usize,
    opts: &CompressOptions,
) -> Result<EcResult, CompressError> {
    let layout = VarLayout::for_spec(spec, opts.drop_unused_tags);
    let unused = layout.ignored.clone();
    let mut pc = PolicyCompiler::new(layout);
    let keys = pc.edge_keys(net)?;
    let flags = static_flags(&pc, &[&keys]);
    let statics = |k: EdgeKey| flags.get(&k).copied().unwrap_or(false);
    let amap = find_abstraction(net, &keys, &statics);
    let abs = build_abstract_network(spec, net, &amap, &unused);
    let abs_dest = abs.mapping.block_nodes[amap.block(net.dest)][0];
    let anet = abstract_side(&abs.spec, abs_dest)?;
    let akeys = pc.edge_keys(&anet)?;
    let flags = static_flags(&pc, &[&keys, &akeys]);
    let statics = |k: EdgeKey| flags.get(&k).copied().unwrap_or(false);
    let prefs = node_prefs(net);
    let certificate = certify(&Pair {
        concrete: net,
        concrete_keys: &keys,
        abstract_net: &anet,
        abstract_keys: &akeys,
        mapping: &abs.mapping,
        prefs: &prefs,
        statics: &statics,
    });
    if !certificate.is_valid() {
        let msg: Vec<String> = certificate.violations.iter().map(|v| v.to_string()).collect();
        return Err(CompressError::CertificateMissing(msg.join("; ")));
    }
    Ok(EcResult {
        ec_index,
        ec: net.ec.clone(),
        dest: net.dest,
        concrete_nodes: spec.num_nodes(),
        concrete_links: spec.num_links(),
        abstraction: amap,
        abstract_net: abs,
        certificate,
    })
}

/// Compresses every (class, destination) of `spec` in class order.
pub fn compress_ec(
    spec: &NetworkSpec,
    ec_index: usize,
    ec: &DestEquivClass,
    opts: &CompressOptions,
) -> Result<Vec<EcResult>, CompressError> {
    specialize(spec, ec)?
        .iter()
        .map(|net| compress_specialized(spec, net, ec_index, opts))
        .collect()
}

/// Compresses all classes, using `jobs` worker threads. The result order
/// does not depend on `jobs`.
pub fn compress_network(spec: &NetworkSpec, opts: &CompressOptions, jobs: usize) -> Result<Vec<EcResult>, CompressError> {
    compress_classes(spec, opts, jobs, None)
}

/// Like [`compress_network`], restricted to the classes overlapping
/// `only` when given. Class indices stay those of the full network.
pub fn compress_classes(
    spec: &NetworkSpec,
    opts: &CompressOptions,
    jobs: usize,
    only: Option<Prefix>,
) -> Result<Vec<EcResult>, CompressError> {
    let ecs: Vec<(usize, DestEquivClass)> = compute_ecs(spec)
        .into_iter()
        .enumerate()
        .filter(|(_, ec)| only.is_none_or(|p| ec.overlaps(p)))
        .collect();
    let run = || -> Result<Vec<EcResult>, CompressError> {
        let per_ec: Vec<Result<Vec<EcResult>, CompressError>> = ecs
            .par_iter()
            .map(|(i, ec)| compress_ec(spec, *i, ec, opts))
            .collect();
        let mut out = Vec::new();
        for r in per_ec {
            out.extend(r?);
        }
        Ok(out)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(run)
}

/// Outcome of checking a user-supplied abstraction.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub certificate: Certificate,
    pub oracle: Option<crate::oracle::Verdict>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.certificate.is_valid() && self.oracle.as_ref().is_none_or(|v| v.equivalent)
    }
}

/// Checks an abstract network against a concrete one: effectiveness
/// certificate always, exhaustive equivalence when the concrete network
/// has at most `oracle_bound` nodes.
pub fn check_abstraction(
    concrete: &NetworkSpec,
    abs: &NetworkSpec,
    mapping: &Mapping,
    oracle_bound: usize,
) -> Result<CheckReport, CompressError> {
    if mapping.block_of.len() != concrete.num_nodes() || mapping.abstract_block.len() != abs.num_nodes() {
        return Err(CompressError::Mapping("mapping does not match the networks".into()));
    }
    let abs_dest = abs
        .origins
        .iter()
        .position(|o| !o.is_empty())
        .map(|i| NodeId(i as u32))
        .ok_or_else(|| CompressError::Mapping("abstract network originates nothing".into()))?;
    let anet = abstract_side(abs, abs_dest)?;
    let dest_block = mapping.abstract_block[abs_dest.index()];
    let dests: Vec<NodeId> = (0..concrete.num_nodes() as u32)
        .map(NodeId)
        .filter(|u| mapping.block_of[u.index()] == dest_block)
        .collect();
    let rep = anet.ec.representative();
    let ecs = compute_ecs(concrete);
    let ec = ecs
        .iter()
        .find(|ec| ec.overlaps(rep))
        .ok_or_else(|| CompressError::Mapping(format!("no concrete class covers {rep}")))?;
    let net = specialize(concrete, ec)?
        .into_iter()
        .find(|n| dests.contains(&n.dest))
        .ok_or_else(|| CompressError::Mapping("destination block holds no origin of the class".into()))?;
    let layout = VarLayout::for_spec(concrete, !mapping.unused_tags.is_empty());
    let mut pc = PolicyCompiler::new(layout);
    let keys = pc.edge_keys(&net)?;
    let akeys = match pc.edge_keys(&anet) {
        Ok(k) => k,
        Err(e) => {
            let certificate = Certificate {
                mode: Mode::ForallExists,
                violations: vec![CertViolation { condition: Condition::TransEquivalence, detail: e.to_string() }],
            };
            return Ok(CheckReport { certificate, oracle: None });
        }
    };
    let flags = static_flags(&pc, &[&keys, &akeys]);
    let statics = |k: EdgeKey| flags.get(&k).copied().unwrap_or(false);
    let prefs = node_prefs(&net);
    let certificate = certify(&Pair {
        concrete: &net,
        concrete_keys: &keys,
        abstract_net: &anet,
        abstract_keys: &akeys,
        mapping,
        prefs: &prefs,
        statics: &statics,
    });
    let oracle = if concrete.num_nodes() <= oracle_bound {
        Some(
            crate::oracle::check_cp_equivalence(&net.srp(), &anet.srp(), mapping, oracle_bound)
                .map_err(|e| CompressError::Mapping(e.to_string()))?,
        )
    } else {
        None
    };
    Ok(CheckReport { certificate, oracle })
}

/// Distinct block-level behaviors per block over a set of solutions.
pub fn behaviors(
    amap_block_of: &[u32],
    solution: &crate::srp::Solution,
) -> Vec<BTreeSet<Option<BTreeSet<u32>>>> {
    let nblocks = amap_block_of.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut out = vec![BTreeSet::new(); nblocks];
    for (u, hops) in solution.fwd.iter().enumerate() {
        let b = amap_block_of[u] as usize;
        let behavior = solution.labels[u]
            .as_ref()
            .map(|_| hops.iter().map(|v| amap_block_of[v.index()]).collect());
        out[b].insert(behavior);
    }
    out
}

/// Output of a compression run: abstract network and sidecar documents,
/// plus a per-class report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Emission {
    pub files: Vec<(String, String)>,
    pub report: String,
    pub report_json: String,
}

fn file_stem(spec: &NetworkSpec, r: &EcResult) -> String {
    let name: String = spec
        .name(r.dest)
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("ec{}_{}", r.ec_index, name)
}

/// Renders compression results in class order.
pub fn emit(spec: &NetworkSpec, results: &[EcResult]) -> Emission {
    let mut files = Vec::new();
    let mut report = String::new();
    let mut records = Vec::new();
    for r in results {
        let stem = file_stem(spec, r);
        files.push((format!("{stem}.json"), r.abstract_net.spec.to_json()));
        files.push((format!("{stem}.map.json"), r.abstract_net.sidecar_json(spec)));
        let ranges: Vec<String> = r.ec.ranges.iter().map(|p| p.to_string()).collect();
        let (an, al) = (r.abstract_nodes(), r.abstract_links());
        report.push_str(&format!(
            "ec {} {} dest {}: {} nodes / {} edges -> {} nodes / {} edges ({:.1}x / {:.1}x)\n",
            r.ec_index,
            ranges.join(","),
            spec.name(r.dest),
            r.concrete_nodes,
            r.concrete_links,
            an,
            al,
            r.concrete_nodes as f64 / an.max(1) as f64,
            r.concrete_links as f64 / al.max(1) as f64,
        ));
        records.push(serde_json::json!({
            "ec": r.ec_index,
            "prefixes": ranges,
            "dest": spec.name(r.dest),
            "mode": format!("{:?}", r.certificate.mode),
            "concrete": {"nodes": r.concrete_nodes, "edges": r.concrete_links},
            "abstract": {"nodes": an, "edges": al},
            "files": [format!("{stem}.json"), format!("{stem}.map.json")],
        }));
    }
    let mut report_json = serde_json::to_string_pretty(&records).expect("serializable");
    report_json.push('\n');
    Emission { files, report, report_json }
}
