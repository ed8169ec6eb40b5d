use std::collections::{BTreeMap, BTreeSet};

use super::mapping::Mapping;
use super::refine::AbstractionMap;
use crate::config::{Community, NetworkSpec, Protocol, StaticRoute};
use crate::ecs::SpecializedNetwork;
use crate::srp::{Edge, NodeId};

/// An emitted abstract network and its relation to the concrete one.
#[derive(Clone, Debug)]
pub struct AbstractNetwork {
    pub spec: NetworkSpec,
    pub mapping: Mapping,
    pub block_names: Vec<String>,
}

impl AbstractNetwork {
    pub fn sidecar_json(&self, concrete: &NetworkSpec) -> String {
        self.mapping.to_json(concrete, &self.spec, &self.block_names)
    }
}

fn fresh_name(spec: &NetworkSpec, base: String) -> String {
    let mut name = base;
    while spec.node_id(&name).is_some() {
        name.push('\'');
    }
    name
}

/// Emits the abstract network: one node per block copy, one link per copy
/// pair of adjacent blocks, configuration copied from the lowest concrete
/// edge between the two blocks.
pub fn build_abstract_network(
    spec: &NetworkSpec,
    net: &SpecializedNetwork,
    amap: &AbstractionMap,
    unused: &BTreeSet<Community>,
) -> AbstractNetwork {
    let mut out = NetworkSpec::new();
    let block_names: Vec<String> = amap.blocks.iter().map(|m| spec.name(m[0]).to_string()).collect();
    let mut block_nodes: Vec<Vec<NodeId>> = Vec::new();
    let mut abstract_block = Vec::new();
    for (b, members) in amap.blocks.iter().enumerate() {
        let rep = &spec.nodes[members[0].index()];
        let mut ids = Vec::new();
        for c in 0..amap.copies[b] {
            let base = if amap.copies[b] > 1 { format!("{}~{c}", rep.name) } else { rep.name.clone() };
            let name = fresh_name(&out, base);
            let id = out.add_node(&name, rep.asn, &[net.protocol]);
            out.nodes[id.index()].ospf_area = rep.ospf_area;
            ids.push(id);
            abstract_block.push(b as u32);
        }
        block_nodes.push(ids);
    }

    let mut reps: BTreeMap<(usize, usize), (NodeId, NodeId)> = BTreeMap::new();
    for link in &spec.links {
        let (ba, bb) = (amap.block(link.a), amap.block(link.b));
        if ba == bb {
            continue;
        }
        let (key, cand) = if ba < bb { ((ba, bb), (link.a, link.b)) } else { ((bb, ba), (link.b, link.a)) };
        reps.entry(key)
            .and_modify(|cur| {
                if cand < *cur {
                    *cur = cand;
                }
            })
            .or_insert(cand);
    }

    let mut used_policies = BTreeSet::new();
    let mut used_acls = BTreeSet::new();
    for (&(b, c), &(u, v)) in &reps {
        let concrete = spec.link(u, v).expect("representative link exists");
        for &x in &block_nodes[b] {
            for &y in &block_nodes[c] {
                let idx = out.add_link(x, y);
                let link = &mut out.links[idx];
                link.ospf_cost = concrete.ospf_cost;
                link.ospf_area = concrete.ospf_area;
                link.interfaces[0] = spec.interface(u, v).unwrap().clone();
                link.interfaces[1] = spec.interface(v, u).unwrap().clone();
                for iface in &link.interfaces {
                    used_policies.extend(iface.import_policy.iter().cloned());
                    used_policies.extend(iface.export_policy.iter().cloned());
                    used_acls.extend(iface.acl.iter().cloned());
                }
                if net.protocol == Protocol::Static {
                    for (from, to, ce) in [(x, y, Edge::new(u, v)), (y, x, Edge::new(v, u))] {
                        if net.edge(ce).static_route {
                            for r in &net.ec.ranges {
                                out.static_routes[from.index()].push(StaticRoute { prefix: *r, next_hop: to });
                            }
                        }
                    }
                }
            }
        }
    }
    for name in used_policies {
        out.policies.insert(name.clone(), spec.policies[&name].without_communities(unused));
    }
    for name in used_acls {
        out.acls.insert(name.clone(), spec.acls[&name].clone());
    }
    let dest_block = amap.block(net.dest);
    out.origins[block_nodes[dest_block][0].index()] = net.ec.ranges.clone();

    let mapping = Mapping {
        block_of: amap.block_of.clone(),
        block_nodes,
        abstract_block,
        bgp: net.protocol == Protocol::Bgp,
        unused_tags: if net.protocol == Protocol::Bgp { unused.clone() } else { BTreeSet::new() },
    };
    AbstractNetwork { spec: out, mapping, block_names }
}
