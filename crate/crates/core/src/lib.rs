//! Carving API specifications and tests from recorded HTTP traffic.

pub mod config;
pub mod evaluate;
pub mod filter;
pub mod fixture;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod probe;
pub mod similarity;
pub mod specgen;
pub mod testsuite;
pub mod transport;
