use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::policy::{Acl, Protocol, RoutePolicy};
use super::prefix::{Community, Prefix};
use crate::srp::NodeId;

pub const FORMAT_VERSION: &str = "bonsai-net/1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("parse error at line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("dangling reference to `{0}`")]
    DanglingReference(String),
    #[error("invalid network: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interface {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub import_policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub export_policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acl: Option<String>,
}

impl Interface {
    fn is_default(&self) -> bool {
        *self == Interface::default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub asn: u32,
    pub protocols: Vec<Protocol>,
    pub ospf_area: u32,
}

/// Undirected link; `interfaces[0]` belongs to `a`, `interfaces[1]` to `b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub ospf_cost: u32,
    pub ospf_area: u32,
    pub interfaces: [Interface; 2],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StaticRoute {
    pub prefix: Prefix,
    pub next_hop: NodeId,
}

/// Vendor-neutral network configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NetworkSpec {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub policies: BTreeMap<String, RoutePolicy>,
    pub acls: BTreeMap<String, Acl>,
    pub static_routes: Vec<Vec<StaticRoute>>,
    pub origins: Vec<Vec<Prefix>>,
    by_name: HashMap<String, NodeId>,
    by_pair: HashMap<(NodeId, NodeId), (usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    #[serde(default)]
    asn: u32,
    protocols: Vec<Protocol>,
    #[serde(default, skip_serializing_if = "is_zero")]
    ospf_area: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    endpoints: [String; 2],
    #[serde(default = "one", skip_serializing_if = "is_one")]
    ospf_cost: u32,
    #[serde(default, skip_serializing_if = "is_zero")]
    ospf_area: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    interfaces: BTreeMap<String, Interface>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StaticRouteDoc {
    prefix: Prefix,
    next_hop: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    version: String,
    nodes: Vec<NodeDoc>,
    #[serde(default)]
    edges: Vec<EdgeDoc>,
    #[serde(default)]
    policies: BTreeMap<String, RoutePolicy>,
    #[serde(default)]
    acls: BTreeMap<String, Acl>,
    #[serde(default)]
    static_routes: BTreeMap<String, Vec<StaticRouteDoc>>,
    #[serde(default)]
    origins: BTreeMap<String, Vec<Prefix>>,
}

fn one() -> u32 {
    1
}

fn is_one(v: &u32) -> bool {
    *v == 1
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

impl NetworkSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].name
    }

    pub fn add_node(&mut self, name: &str, asn: u32, protocols: &[Protocol]) -> NodeId {
        assert!(!self.by_name.contains_key(name), "duplicate node {name}");
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            name: name.to_string(),
            asn,
            protocols: protocols.to_vec(),
            ospf_area: 0,
        });
        self.static_routes.push(Vec::new());
        self.origins.push(Vec::new());
        self.by_name.insert(name.to_string(), id);
        id
    }

    /// Adds an undirected link with default cost and interfaces and
    /// returns its index.
    pub fn add_link(&mut self, a: NodeId, b: NodeId) -> usize {
        assert!(a != b, "self-loop");
        assert!(!self.by_pair.contains_key(&(a, b)), "duplicate link");
        let idx = self.links.len();
        self.links.push(Link {
            a,
            b,
            ospf_cost: 1,
            ospf_area: 0,
            interfaces: [Interface::default(), Interface::default()],
        });
        self.by_pair.insert((a, b), (idx, 0));
        self.by_pair.insert((b, a), (idx, 1));
        idx
    }

    /// Link between `u` and `v`, if any.
    pub fn link(&self, u: NodeId, v: NodeId) -> Option<&Link> {
        self.by_pair.get(&(u, v)).map(|&(i, _)| &self.links[i])
    }

    pub fn link_mut(&mut self, u: NodeId, v: NodeId) -> Option<&mut Link> {
        self.by_pair.get(&(u, v)).map(|&(i, _)| &mut self.links[i])
    }

    /// `u`'s interface record towards `v`.
    pub fn interface(&self, u: NodeId, v: NodeId) -> Option<&Interface> {
        self.by_pair
            .get(&(u, v))
            .map(|&(i, side)| &self.links[i].interfaces[side])
    }

    pub fn interface_mut(&mut self, u: NodeId, v: NodeId) -> Option<&mut Interface> {
        self.by_pair
            .get(&(u, v))
            .map(|&(i, side)| &mut self.links[i].interfaces[side])
    }

    /// Undirected neighbor lists, sorted.
    pub fn adjacency(&self) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for l in &self.links {
            adj[l.a.index()].push(l.b);
            adj[l.b.index()].push(l.a);
        }
        for list in &mut adj {
            list.sort();
        }
        adj
    }

    /// The single protocol run by every node, if there is one.
    pub fn protocol(&self) -> Result<Protocol, ConfigError> {
        let mut set = BTreeSet::new();
        for n in &self.nodes {
            set.extend(n.protocols.iter().copied());
        }
        match set.len() {
            0 => Err(ConfigError::Invalid("no routing protocol configured".into())),
            1 => Ok(*set.iter().next().unwrap()),
            _ => Err(ConfigError::Invalid(format!(
                "mixed protocols {:?} are not supported in one network",
                set
            ))),
        }
    }

    /// Communities appearing anywhere, and those tested by some match.
    pub fn communities(&self) -> (BTreeSet<Community>, BTreeSet<Community>) {
        let mut all = BTreeSet::new();
        let mut matched = BTreeSet::new();
        for p in self.policies.values() {
            let (a, m) = p.communities();
            all.extend(a);
            matched.extend(m);
        }
        (all, matched)
    }

    /// Communities added or deleted but never tested.
    pub fn unused_communities(&self) -> BTreeSet<Community> {
        let (all, matched) = self.communities();
        all.difference(&matched).copied().collect()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| ConfigError::ParseError {
            line: e.line(),
            reason: e.to_string(),
        })?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: NetworkDoc) -> Result<Self, ConfigError> {
        if doc.version != FORMAT_VERSION {
            return Err(ConfigError::ParseError {
                line: 1,
                reason: format!("unsupported version `{}`", doc.version),
            });
        }
        let mut spec = NetworkSpec::new();
        for n in doc.nodes {
            if spec.by_name.contains_key(&n.id) {
                return Err(ConfigError::Invalid(format!("duplicate node `{}`", n.id)));
            }
            let id = spec.add_node(&n.id, n.asn, &n.protocols);
            spec.nodes[id.index()].ospf_area = n.ospf_area;
        }
        spec.policies = doc.policies;
        spec.acls = doc.acls;
        let lookup = |spec: &NetworkSpec, name: &str| {
            spec.node_id(name)
                .ok_or_else(|| ConfigError::DanglingReference(name.to_string()))
        };
        for e in doc.edges {
            let a = lookup(&spec, &e.endpoints[0])?;
            let b = lookup(&spec, &e.endpoints[1])?;
            if a == b {
                return Err(ConfigError::Invalid(format!("self-loop at `{}`", e.endpoints[0])));
            }
            if spec.by_pair.contains_key(&(a, b)) {
                return Err(ConfigError::Invalid(format!(
                    "duplicate link `{}`-`{}`",
                    e.endpoints[0], e.endpoints[1]
                )));
            }
            if e.ospf_cost == 0 {
                return Err(ConfigError::Invalid("ospf_cost must be at least 1".into()));
            }
            let idx = spec.add_link(a, b);
            let link = &mut spec.links[idx];
            link.ospf_cost = e.ospf_cost;
            link.ospf_area = e.ospf_area;
            for (name, iface) in e.interfaces {
                let side = if name == e.endpoints[0] {
                    0
                } else if name == e.endpoints[1] {
                    1
                } else {
                    return Err(ConfigError::DanglingReference(name));
                };
                link.interfaces[side] = iface;
            }
        }
        for (name, routes) in doc.static_routes {
            let u = lookup(&spec, &name)?;
            for r in routes {
                let v = lookup(&spec, &r.next_hop)?;
                if spec.link(u, v).is_none() {
                    return Err(ConfigError::Invalid(format!(
                        "static route at `{name}` points to non-neighbor `{}`",
                        r.next_hop
                    )));
                }
                spec.static_routes[u.index()].push(StaticRoute { prefix: r.prefix, next_hop: v });
            }
        }
        for (name, prefixes) in doc.origins {
            let u = lookup(&spec, &name)?;
            spec.origins[u.index()] = prefixes;
        }
        spec.check_references()?;
        Ok(spec)
    }

    fn check_references(&self) -> Result<(), ConfigError> {
        for l in &self.links {
            for iface in &l.interfaces {
                for p in [&iface.import_policy, &iface.export_policy].into_iter().flatten() {
                    if !self.policies.contains_key(p) {
                        return Err(ConfigError::DanglingReference(p.clone()));
                    }
                }
                if let Some(a) = &iface.acl {
                    if !self.acls.contains_key(a) {
                        return Err(ConfigError::DanglingReference(a.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    fn to_doc(&self) -> NetworkDoc {
        let name = |id: NodeId| self.nodes[id.index()].name.clone();
        NetworkDoc {
            version: FORMAT_VERSION.to_string(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.name.clone(),
                    asn: n.asn,
                    protocols: n.protocols.clone(),
                    ospf_area: n.ospf_area,
                })
                .collect(),
            edges: self
                .links
                .iter()
                .map(|l| {
                    let mut interfaces = BTreeMap::new();
                    for (side, node) in [(0, l.a), (1, l.b)] {
                        if !l.interfaces[side].is_default() {
                            interfaces.insert(name(node), l.interfaces[side].clone());
                        }
                    }
                    EdgeDoc {
                        endpoints: [name(l.a), name(l.b)],
                        ospf_cost: l.ospf_cost,
                        ospf_area: l.ospf_area,
                        interfaces,
                    }
                })
                .collect(),
            policies: self.policies.clone(),
            acls: self.acls.clone(),
            static_routes: self
                .static_routes
                .iter()
                .enumerate()
                .filter(|(_, r)| !r.is_empty())
                .map(|(u, routes)| {
                    (
                        self.nodes[u].name.clone(),
                        routes
                            .iter()
                            .map(|r| StaticRouteDoc { prefix: r.prefix, next_hop: name(r.next_hop) })
                            .collect(),
                    )
                })
                .collect(),
            origins: self
                .origins
                .iter()
                .enumerate()
                .filter(|(_, o)| !o.is_empty())
                .map(|(u, o)| (self.nodes[u].name.clone(), o.clone()))
                .collect(),
        }
    }

    /// Canonical pretty-printed JSON.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_doc()).expect("serializable");
        s.push('\n');
        s
    }
}
