//! RAN/Edge cross-domain negotiation with a queuing-model environment,
//! digital-twin validated agents and a debiased collective memory.

pub mod a2a;
pub mod agents;
pub mod artifacts;
pub mod config;
pub mod environment;
pub mod harness;
pub mod memory;
pub mod net_math;
pub mod twin;
