//! RIP, OSPF, BGP and static routing as SRP instances, and the attribute
//! abstractions used to relate concrete and abstract routes.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::config::{Community, RouteFields, SpecializedPolicy, DEFAULT_LOCAL_PREF};
use crate::srp::{Attr, Edge, NodeId, Pref, RoutingModel};

pub const RIP_INFINITY: u8 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RipAttr {
    pub hops: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OspfAttr {
    pub inter_area: bool,
    pub cost: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BgpAttr {
    pub local_pref: u32,
    pub communities: BTreeSet<Community>,
    pub as_path: Vec<NodeId>,
}

impl BgpAttr {
    pub fn origin() -> Self {
        BgpAttr { local_pref: DEFAULT_LOCAL_PREF, communities: BTreeSet::new(), as_path: Vec::new() }
    }
}

pub fn rip_compare(a: &RipAttr, b: &RipAttr) -> Pref {
    ordered(a.hops.cmp(&b.hops))
}

pub fn ospf_compare(a: &OspfAttr, b: &OspfAttr) -> Pref {
    ordered((a.inter_area, a.cost).cmp(&(b.inter_area, b.cost)))
}

pub fn bgp_compare(a: &BgpAttr, b: &BgpAttr) -> Pref {
    if a.local_pref != b.local_pref {
        return if a.local_pref > b.local_pref { Pref::Better } else { Pref::Worse };
    }
    ordered(a.as_path.len().cmp(&b.as_path.len()))
}

fn ordered(o: std::cmp::Ordering) -> Pref {
    match o {
        std::cmp::Ordering::Less => Pref::Better,
        std::cmp::Ordering::Greater => Pref::Worse,
        std::cmp::Ordering::Equal => Pref::Equivalent,
    }
}

/// Per directed edge configuration after specialization to one
/// destination class. Missing entries behave like `EdgeConfig::default()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeConfig {
    /// The receiver's ACL towards the sender drops the class.
    pub blocked: bool,
    /// Export policy of the sender towards the receiver.
    pub export: Option<Arc<SpecializedPolicy>>,
    /// Import policy of the receiver from the sender.
    pub import: Option<Arc<SpecializedPolicy>>,
    pub ospf_cost: u32,
    pub crosses_area: bool,
    pub static_route: bool,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        EdgeConfig {
            blocked: false,
            export: None,
            import: None,
            ospf_cost: 1,
            crosses_area: false,
            static_route: false,
        }
    }
}

impl EdgeConfig {
    /// Runs export, local-pref reset and import on route fields.
    pub fn filter(&self, fields: &RouteFields) -> Option<RouteFields> {
        if self.blocked {
            return None;
        }
        let mut r = match &self.export {
            Some(p) => p.apply(fields)?,
            None => fields.clone(),
        };
        r.local_pref = DEFAULT_LOCAL_PREF;
        match &self.import {
            Some(p) => p.apply(&r),
            None => Some(r),
        }
    }
}

pub type EdgeTable = HashMap<Edge, EdgeConfig>;

fn config<'a>(table: &'a EdgeTable, e: Edge, default: &'a EdgeConfig) -> &'a EdgeConfig {
    table.get(&e).unwrap_or(default)
}

/// Hop-count routing; policies only decide whether a route passes.
#[derive(Clone, Debug, Default)]
pub struct RipModel {
    pub edges: EdgeTable,
    default: EdgeConfig,
}

impl RipModel {
    pub fn new(edges: EdgeTable) -> Self {
        RipModel { edges, default: EdgeConfig::default() }
    }
}

impl RoutingModel for RipModel {
    fn initial(&self) -> Attr {
        Attr::Rip(RipAttr { hops: 0 })
    }

    fn compare(&self, a: &Attr, b: &Attr) -> Pref {
        match (a, b) {
            (Attr::Rip(a), Attr::Rip(b)) => rip_compare(a, b),
            _ => panic!("RIP model compared non-RIP attributes"),
        }
    }

    fn transfer(&self, e: Edge, attr: Option<&Attr>) -> Option<Attr> {
        let Some(Attr::Rip(a)) = attr else { return None };
        let cfg = config(&self.edges, e, &self.default);
        cfg.filter(&RouteFields::default())?;
        let hops = a.hops + 1;
        (hops < RIP_INFINITY).then_some(Attr::Rip(RipAttr { hops }))
    }
}

/// Link-state routing with costs and areas.
#[derive(Clone, Debug, Default)]
pub struct OspfModel {
    pub edges: EdgeTable,
    default: EdgeConfig,
}

impl OspfModel {
    pub fn new(edges: EdgeTable) -> Self {
        OspfModel { edges, default: EdgeConfig::default() }
    }
}

impl RoutingModel for OspfModel {
    fn initial(&self) -> Attr {
        Attr::Ospf(OspfAttr { inter_area: false, cost: 0 })
    }

    fn compare(&self, a: &Attr, b: &Attr) -> Pref {
        match (a, b) {
            (Attr::Ospf(a), Attr::Ospf(b)) => ospf_compare(a, b),
            _ => panic!("OSPF model compared non-OSPF attributes"),
        }
    }

    fn transfer(&self, e: Edge, attr: Option<&Attr>) -> Option<Attr> {
        let Some(Attr::Ospf(a)) = attr else { return None };
        let cfg = config(&self.edges, e, &self.default);
        cfg.filter(&RouteFields::default())?;
        Some(Attr::Ospf(OspfAttr {
            inter_area: a.inter_area || cfg.crosses_area,
            cost: a.cost.saturating_add(cfg.ospf_cost),
        }))
    }
}

/// Path-vector routing with local preference, communities and loop
/// prevention on node ids.
#[derive(Clone, Debug, Default)]
pub struct BgpModel {
    pub edges: EdgeTable,
    default: EdgeConfig,
}

impl BgpModel {
    pub fn new(edges: EdgeTable) -> Self {
        BgpModel { edges, default: EdgeConfig::default() }
    }
}

impl RoutingModel for BgpModel {
    fn initial(&self) -> Attr {
        Attr::Bgp(BgpAttr::origin())
    }

    fn compare(&self, a: &Attr, b: &Attr) -> Pref {
        match (a, b) {
            (Attr::Bgp(a), Attr::Bgp(b)) => bgp_compare(a, b),
            _ => panic!("BGP model compared non-BGP attributes"),
        }
    }

    fn transfer(&self, e: Edge, attr: Option<&Attr>) -> Option<Attr> {
        let Some(Attr::Bgp(a)) = attr else { return None };
        if a.as_path.contains(&e.node) {
            return None;
        }
        let cfg = config(&self.edges, e, &self.default);
        let fields = RouteFields { communities: a.communities.clone(), local_pref: a.local_pref };
        let out = cfg.filter(&fields)?;
        let mut as_path = Vec::with_capacity(a.as_path.len() + 1);
        as_path.push(e.neighbor);
        as_path.extend_from_slice(&a.as_path);
        Some(Attr::Bgp(BgpAttr { local_pref: out.local_pref, communities: out.communities, as_path }))
    }
}

/// Static routes: an edge carries `true` exactly when a static route for
/// the class points along it, whatever the neighbor knows.
#[derive(Clone, Debug, Default)]
pub struct StaticModel {
    pub edges: EdgeTable,
    default: EdgeConfig,
}

impl StaticModel {
    pub fn new(edges: EdgeTable) -> Self {
        StaticModel { edges, default: EdgeConfig::default() }
    }
}

impl RoutingModel for StaticModel {
    fn initial(&self) -> Attr {
        Attr::Static
    }

    fn compare(&self, _a: &Attr, _b: &Attr) -> Pref {
        Pref::Equivalent
    }

    fn transfer(&self, e: Edge, _attr: Option<&Attr>) -> Option<Attr> {
        let cfg = config(&self.edges, e, &self.default);
        (cfg.static_route && !cfg.blocked).then_some(Attr::Static)
    }

    fn spontaneous(&self) -> bool {
        true
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AbstractionError {
    #[error("node {0} has no image under the abstraction")]
    UnmappedNode(NodeId),
}

/// The attribute map h: identity for RIP, OSPF and static; for BGP it
/// renames AS-path nodes and can forget communities no policy tests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AttrAbstraction {
    Identity,
    BgpPathRename { map: Vec<NodeId> },
    BgpDropUnusedTags { map: Vec<NodeId>, unused: BTreeSet<Community> },
}

impl AttrAbstraction {
    pub fn kind(&self) -> &'static str {
        match self {
            AttrAbstraction::Identity => "identity",
            AttrAbstraction::BgpPathRename { .. } => "bgp_path_rename",
            AttrAbstraction::BgpDropUnusedTags { .. } => "bgp_drop_unused_tags",
        }
    }

    pub fn unused_tags(&self) -> BTreeSet<Community> {
        match self {
            AttrAbstraction::BgpDropUnusedTags { unused, .. } => unused.clone(),
            _ => BTreeSet::new(),
        }
    }

    /// Same abstraction with a different node map (used for refinements).
    pub fn with_map(&self, map: Vec<NodeId>) -> AttrAbstraction {
        match self {
            AttrAbstraction::Identity => AttrAbstraction::Identity,
            AttrAbstraction::BgpPathRename { .. } => AttrAbstraction::BgpPathRename { map },
            AttrAbstraction::BgpDropUnusedTags { unused, .. } => {
                AttrAbstraction::BgpDropUnusedTags { map, unused: unused.clone() }
            }
        }
    }

    pub fn apply(&self, attr: &Attr) -> Result<Attr, AbstractionError> {
        let (map, unused) = match self {
            AttrAbstraction::Identity => return Ok(attr.clone()),
            AttrAbstraction::BgpPathRename { map } => (map, None),
            AttrAbstraction::BgpDropUnusedTags { map, unused } => (map, Some(unused)),
        };
        let Attr::Bgp(a) = attr else { return Ok(attr.clone()) };
        let as_path = a
            .as_path
            .iter()
            .map(|n| map.get(n.index()).copied().ok_or(AbstractionError::UnmappedNode(*n)))
            .collect::<Result<Vec<_>, _>>()?;
        let communities = match unused {
            Some(u) => a.communities.difference(u).copied().collect(),
            None => a.communities.clone(),
        };
        Ok(Attr::Bgp(BgpAttr { local_pref: a.local_pref, communities, as_path }))
    }

    pub fn apply_label(&self, label: Option<&Attr>) -> Result<Option<Attr>, AbstractionError> {
        label.map(|a| self.apply(a)).transpose()
    }
}
