//! Control-plane compression for network verification.
//!
//! A network configuration is split into destination equivalence classes;
//! for each class the routing behavior is a stable routing problem (SRP).
//! Compression finds an abstraction of the SRP that preserves every stable
//! solution up to renaming, and the oracle checks that claim by exhaustive
//! enumeration on small instances.

pub mod bdd;
pub mod compress;
pub mod config;
pub mod ecs;
pub mod oracle;
pub mod policy_bdd;
pub mod properties;
pub mod protocols;
pub mod srp;
pub mod topo_gen;
