//! archsmith: hybrid LLM architecture search and scaling toolkit.
//!
//! The pipeline runs in four steps: greedy search over fixed-length
//! primitive strings ([`search`]), aggregation of scored pools into
//! base patterns ([`aggregate`]), extrapolation of base patterns to
//! target parameter budgets ([`extrapolate`]), and training-plan /
//! scaling analysis ([`scale`], [`analysis`]).

pub mod aggregate;
pub mod analysis;
pub mod arch;
pub mod cli;
pub mod extrapolate;
pub mod protocol;
pub mod proxy;
pub mod scale;
pub mod search;
pub mod workspace;
