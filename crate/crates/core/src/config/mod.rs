//! Vendor-neutral configuration IR and its JSON encoding.

mod policy;
mod prefix;
mod spec;

pub use policy::{
    Acl, AclEntry, Clause, Match, Protocol, RouteFields, RoutePolicy, SpecClause, SpecializedPolicy,
    Verdict, DEFAULT_LOCAL_PREF,
};
pub use prefix::{Community, Prefix};
pub use spec::{ConfigError, Interface, Link, NetworkSpec, Node, StaticRoute, FORMAT_VERSION};
