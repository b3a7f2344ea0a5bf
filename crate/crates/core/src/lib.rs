//! Constraint screening for DC optimal power flow.
//!
//! The crate solves DC-OPF with its own bounded-variable simplex, generates labeled
//! corpora of perturbed-load solutions, trains an edge-classification graph network
//! (XENet-style layers that co-update node and edge embeddings) to predict heavily
//! loaded branches, and evaluates the reduced OPF that only enforces limits on the
//! predicted branches.
//!
//! Each capability has a runnable program under `examples/`; the `gridscreen` binary
//! exposes the same pipeline as subcommands.

pub mod cli;
pub mod dcopf;
pub mod error;
pub mod fixtures;
pub mod gnn;
pub mod lp;
pub mod nested;
pub mod netcase;
pub mod ropf;
pub mod samplegen;

pub use error::{CaseError, Error, Result, SolverError};
