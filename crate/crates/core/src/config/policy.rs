use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::prefix::{Community, Prefix};

pub const DEFAULT_LOCAL_PREF: u32 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Rip,
    Ospf,
    Bgp,
    Static,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Permit,
    Deny,
}

/// Conditions of a clause; all present conditions must hold. Prefix and
/// community lists match when any element matches.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Match {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefixes: Option<Vec<Prefix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub communities: Option<Vec<Community>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Protocol>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clause {
    #[serde(rename = "match", default, skip_serializing_if = "is_default_match")]
    pub matches: Match,
    pub action: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delete_communities: Vec<Community>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub add_communities: Vec<Community>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_local_pref: Option<u32>,
}

fn is_default_match(m: &Match) -> bool {
    *m == Match::default()
}

impl Clause {
    pub fn permit() -> Self {
        Clause {
            matches: Match::default(),
            action: Verdict::Permit,
            delete_communities: Vec::new(),
            add_communities: Vec::new(),
            set_local_pref: None,
        }
    }

    pub fn deny() -> Self {
        Clause { action: Verdict::Deny, ..Clause::permit() }
    }
}

/// Ordered clause list: the first matching clause decides, and a route
/// matching no clause is denied.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutePolicy {
    pub clauses: Vec<Clause>,
}

/// The policy-visible fields of a route.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RouteFields {
    pub communities: BTreeSet<Community>,
    pub local_pref: u32,
}

impl Default for RouteFields {
    fn default() -> Self {
        RouteFields { communities: BTreeSet::new(), local_pref: DEFAULT_LOCAL_PREF }
    }
}

fn apply_actions(clause_add: &[Community], clause_del: &[Community], lp: Option<u32>, route: &mut RouteFields) {
    for c in clause_del {
        route.communities.remove(c);
    }
    for c in clause_add {
        route.communities.insert(*c);
    }
    if let Some(lp) = lp {
        route.local_pref = lp;
    }
}

impl RoutePolicy {
    pub fn permit_all() -> Self {
        RoutePolicy { clauses: vec![Clause::permit()] }
    }

    /// Reference interpreter: the transformed route, or `None` if denied.
    pub fn evaluate(&self, prefix: Prefix, protocol: Protocol, route: &RouteFields) -> Option<RouteFields> {
        for clause in &self.clauses {
            let m = &clause.matches;
            if let Some(ps) = &m.prefixes {
                if !ps.iter().any(|p| p.contains(prefix)) {
                    continue;
                }
            }
            if let Some(proto) = m.protocol {
                if proto != protocol {
                    continue;
                }
            }
            if let Some(cs) = &m.communities {
                if !cs.iter().any(|c| route.communities.contains(c)) {
                    continue;
                }
            }
            return match clause.action {
                Verdict::Deny => None,
                Verdict::Permit => {
                    let mut out = route.clone();
                    apply_actions(&clause.add_communities, &clause.delete_communities, clause.set_local_pref, &mut out);
                    Some(out)
                }
            };
        }
        None
    }

    /// Resolves prefix and protocol matches for one destination class,
    /// dropping clauses that can never fire.
    pub fn specialize(&self, prefix: Prefix, protocol: Protocol) -> SpecializedPolicy {
        let mut clauses = Vec::new();
        for clause in &self.clauses {
            let m = &clause.matches;
            if let Some(ps) = &m.prefixes {
                if !ps.iter().any(|p| p.contains(prefix)) {
                    continue;
                }
            }
            if m.protocol.is_some_and(|p| p != protocol) {
                continue;
            }
            let always = m.communities.is_none();
            clauses.push(SpecClause {
                communities: m.communities.clone(),
                action: clause.action,
                add: clause.add_communities.clone(),
                delete: clause.delete_communities.clone(),
                set_local_pref: clause.set_local_pref,
            });
            if always {
                break;
            }
        }
        SpecializedPolicy { clauses }
    }

    /// Every community mentioned by this policy, and those it tests.
    pub fn communities(&self) -> (BTreeSet<Community>, BTreeSet<Community>) {
        let mut all = BTreeSet::new();
        let mut matched = BTreeSet::new();
        for c in &self.clauses {
            if let Some(cs) = &c.matches.communities {
                all.extend(cs.iter().copied());
                matched.extend(cs.iter().copied());
            }
            all.extend(c.add_communities.iter().copied());
            all.extend(c.delete_communities.iter().copied());
        }
        (all, matched)
    }

    pub fn local_prefs(&self) -> impl Iterator<Item = u32> + '_ {
        self.clauses.iter().filter_map(|c| c.set_local_pref)
    }

    pub fn prefixes(&self) -> impl Iterator<Item = Prefix> + '_ {
        self.clauses
            .iter()
            .filter_map(|c| c.matches.prefixes.as_ref())
            .flatten()
            .copied()
    }

    /// Copy without any add/delete actions on the given communities.
    pub fn without_communities(&self, drop: &BTreeSet<Community>) -> RoutePolicy {
        let mut out = self.clone();
        for c in &mut out.clauses {
            c.add_communities.retain(|x| !drop.contains(x));
            c.delete_communities.retain(|x| !drop.contains(x));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpecClause {
    pub communities: Option<Vec<Community>>,
    pub action: Verdict,
    pub add: Vec<Community>,
    pub delete: Vec<Community>,
    pub set_local_pref: Option<u32>,
}

/// A policy with prefix and protocol matches already decided.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpecializedPolicy {
    pub clauses: Vec<SpecClause>,
}

impl SpecializedPolicy {
    pub fn apply(&self, route: &RouteFields) -> Option<RouteFields> {
        for clause in &self.clauses {
            if let Some(cs) = &clause.communities {
                if !cs.iter().any(|c| route.communities.contains(c)) {
                    continue;
                }
            }
            return match clause.action {
                Verdict::Deny => None,
                Verdict::Permit => {
                    let mut out = route.clone();
                    apply_actions(&clause.add, &clause.delete, clause.set_local_pref, &mut out);
                    Some(out)
                }
            };
        }
        None
    }

    pub fn local_prefs(&self) -> impl Iterator<Item = u32> + '_ {
        self.clauses
            .iter()
            .filter(|c| c.action == Verdict::Permit)
            .filter_map(|c| c.set_local_pref)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AclEntry {
    pub prefix: Prefix,
    pub action: Verdict,
}

/// Data-plane filter on traffic leaving an interface. First containing
/// entry decides; no match denies.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Acl {
    pub entries: Vec<AclEntry>,
}

impl Acl {
    pub fn permits(&self, prefix: Prefix) -> bool {
        self.entries
            .iter()
            .find(|e| e.prefix.contains(prefix))
            .is_some_and(|e| e.action == Verdict::Permit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> Community {
        s.parse().unwrap()
    }

    #[test]
    fn first_match_wins_and_default_denies() {
        let p: Prefix = "10.0.0.0/24".parse().unwrap();
        let policy = RoutePolicy {
            clauses: vec![
                Clause {
                    matches: Match { communities: Some(vec![c("1:1")]), ..Match::default() },
                    set_local_pref: Some(200),
                    ..Clause::permit()
                },
                Clause {
                    matches: Match { communities: Some(vec![c("1:2")]), ..Match::default() },
                    ..Clause::deny()
                },
            ],
        };
        let mut r = RouteFields::default();
        assert_eq!(policy.evaluate(p, Protocol::Bgp, &r), None);
        r.communities.insert(c("1:1"));
        r.communities.insert(c("1:2"));
        assert_eq!(policy.evaluate(p, Protocol::Bgp, &r).unwrap().local_pref, 200);
        r.communities.remove(&c("1:1"));
        assert_eq!(policy.evaluate(p, Protocol::Bgp, &r), None);
    }

    #[test]
    fn specialization_agrees_with_interpreter() {
        let inside: Prefix = "10.0.1.0/24".parse().unwrap();
        let outside: Prefix = "10.0.2.0/24".parse().unwrap();
        let policy = RoutePolicy {
            clauses: vec![
                Clause {
                    matches: Match { prefixes: Some(vec!["10.0.1.0/24".parse().unwrap()]), ..Match::default() },
                    add_communities: vec![c("7:7")],
                    ..Clause::permit()
                },
                Clause::deny(),
            ],
        };
        for p in [inside, outside] {
            let spec = policy.specialize(p, Protocol::Bgp);
            let r = RouteFields::default();
            assert_eq!(spec.apply(&r), policy.evaluate(p, Protocol::Bgp, &r));
        }
    }

    #[test]
    fn acl_first_match() {
        let acl = Acl {
            entries: vec![
                AclEntry { prefix: "10.0.1.0/24".parse().unwrap(), action: Verdict::Deny },
                AclEntry { prefix: "10.0.0.0/8".parse().unwrap(), action: Verdict::Permit },
            ],
        };
        assert!(!acl.permits("10.0.1.0/24".parse().unwrap()));
        assert!(acl.permits("10.0.2.0/24".parse().unwrap()));
        assert!(!acl.permits("11.0.0.0/24".parse().unwrap()));
    }
}
