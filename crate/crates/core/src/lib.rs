//! Near-repeat event chain detection.
//!
//! The pipeline cleans point events ([`ingest`]), indexes them in a 3-D
//! spatio-temporal R-tree to generate near-repeat pairs ([`st_index`]),
//! materializes the pairs as a CSR graph ([`graph`]) and decomposes that
//! graph into event chains with k-core, k-truss, k-DBSCAN and maximal
//! clique detectors ([`cohesive`]). The [`knox`] module measures global
//! space-time interaction with a Knox contingency table.

pub mod cohesive;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod knox;
pub mod st_index;
pub mod synth;

pub use error::{Error, Result};

/// Version tag written into every JSON document this crate produces.
pub const SCHEMA_VERSION: u32 = 1;
