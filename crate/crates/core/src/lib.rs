//! Versioned HS/CN pair corpora, loop orchestration and per-loop metrics.

pub mod grammar;
pub mod label;
pub mod metrics;
pub mod orchestrator;
pub mod record;
pub mod sim;
pub mod store;
