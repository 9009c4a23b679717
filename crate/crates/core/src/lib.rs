//! Probes for hypothetical and compositional self-consistency of completion
//! models, plus the parsers and tree utilities they rest on.

pub mod backends;
pub mod datasets;
pub mod expr;
pub mod funql;
pub mod harness;
pub mod metrics;
pub mod prompt;
