//! Reconciliation of aggregate HIV case counts between a surveillance program
//! and service programs, with detection of Surveillance-Unknown/Service-Known
//! (SUSK) candidate aggregates.

pub mod cli;
pub mod distribution;
pub mod excess;
pub mod index;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod robust;
pub mod synth;
