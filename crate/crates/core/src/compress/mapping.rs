use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::CompressError;
use crate::config::{Community, NetworkSpec};
use crate::protocols::AttrAbstraction;
use crate::srp::NodeId;

/// Relates concrete nodes to abstract ones. Concrete nodes map to blocks
/// (f); each block is realized by one or more abstract copies (f_s is the
/// inverse of `block_nodes`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mapping {
    pub block_of: Vec<u32>,
    pub block_nodes: Vec<Vec<NodeId>>,
    pub abstract_block: Vec<u32>,
    pub bgp: bool,
    pub unused_tags: BTreeSet<Community>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AbstractNodeDoc {
    id: String,
    block: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HDoc {
    kind: String,
    #[serde(default)]
    unused_tags: Vec<Community>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SidecarDoc {
    abstract_nodes: Vec<AbstractNodeDoc>,
    f: BTreeMap<String, String>,
    h: HDoc,
}

impl Mapping {
    pub fn num_blocks(&self) -> usize {
        self.block_nodes.len()
    }

    pub fn block(&self, u: NodeId) -> usize {
        self.block_of[u.index()] as usize
    }

    pub fn is_split(&self) -> bool {
        self.block_nodes.iter().any(|c| c.len() > 1)
    }

    /// The abstraction function when no block is split.
    pub fn f(&self) -> Vec<NodeId> {
        self.block_of
            .iter()
            .map(|&b| self.block_nodes[b as usize][0])
            .collect()
    }

    /// Attribute map for a concrete-to-abstract node map.
    pub fn h(&self, node_map: Vec<NodeId>) -> AttrAbstraction {
        if !self.bgp {
            AttrAbstraction::Identity
        } else if self.unused_tags.is_empty() {
            AttrAbstraction::BgpPathRename { map: node_map }
        } else {
            AttrAbstraction::BgpDropUnusedTags { map: node_map, unused: self.unused_tags.clone() }
        }
    }

    pub fn h_kind(&self) -> &'static str {
        self.h(Vec::new()).kind()
    }

    /// Sidecar JSON naming blocks after `block_names`.
    pub fn to_json(&self, concrete: &NetworkSpec, abs: &NetworkSpec, block_names: &[String]) -> String {
        let doc = SidecarDoc {
            abstract_nodes: abs
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| AbstractNodeDoc {
                    id: n.name.clone(),
                    block: block_names[self.abstract_block[i] as usize].clone(),
                })
                .collect(),
            f: concrete
                .nodes
                .iter()
                .enumerate()
                .map(|(u, n)| (n.name.clone(), block_names[self.block_of[u] as usize].clone()))
                .collect(),
            h: HDoc { kind: self.h_kind().to_string(), unused_tags: self.unused_tags.iter().copied().collect() },
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
        s.push('\n');
        s
    }

    pub fn parse(text: &str, concrete: &NetworkSpec, abs: &NetworkSpec) -> Result<Mapping, CompressError> {
        let bad = |m: String| CompressError::Mapping(m);
        let doc: SidecarDoc = serde_json::from_str(text).map_err(|e| bad(format!("line {}: {e}", e.line())))?;
        let mut block_index: HashMap<String, u32> = HashMap::new();
        let mut block_nodes: Vec<Vec<NodeId>> = Vec::new();
        let mut abstract_block = vec![u32::MAX; abs.num_nodes()];
        for an in &doc.abstract_nodes {
            let id = abs
                .node_id(&an.id)
                .ok_or_else(|| bad(format!("unknown abstract node `{}`", an.id)))?;
            let next = block_index.len() as u32;
            let b = *block_index.entry(an.block.clone()).or_insert(next);
            if b as usize == block_nodes.len() {
                block_nodes.push(Vec::new());
            }
            block_nodes[b as usize].push(id);
            abstract_block[id.index()] = b;
        }
        if abstract_block.contains(&u32::MAX) {
            return Err(bad("some abstract node is not listed in abstract_nodes".into()));
        }
        let mut block_of = vec![u32::MAX; concrete.num_nodes()];
        for (c, b) in &doc.f {
            let u = concrete
                .node_id(c)
                .ok_or_else(|| bad(format!("unknown concrete node `{c}`")))?;
            let b = *block_index
                .get(b)
                .ok_or_else(|| bad(format!("`{c}` maps to unknown block `{b}`")))?;
            block_of[u.index()] = b;
        }
        if block_of.contains(&u32::MAX) {
            return Err(bad("f is not total".into()));
        }
        for list in &mut block_nodes {
            list.sort();
        }
        let bgp = match doc.h.kind.as_str() {
            "identity" => false,
            "bgp_path_rename" | "bgp_drop_unused_tags" => true,
            k => return Err(bad(format!("unknown attribute abstraction `{k}`"))),
        };
        let unused_tags = if doc.h.kind == "bgp_drop_unused_tags" {
            doc.h.unused_tags.into_iter().collect()
        } else {
            BTreeSet::new()
        };
        Ok(Mapping { block_of, block_nodes, abstract_block, bgp, unused_tags })
    }
}
