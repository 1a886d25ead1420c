//! Transform-based analysis of cyclic single-server polling networks in
//! which served customers may be routed to another queue, plus a discrete
//! event simulator of the same system for validation.
//!
//! Queues are numbered from 0 internally; user-facing messages and output
//! files use 1-based numbering.

pub mod analysis;
pub mod error;
pub mod kernels;
pub mod model;
pub mod network;
pub mod pgf;
pub mod sim;
pub mod transforms;

pub use error::{AnalysisError, Result};
pub use model::{Discipline, DistributionSpec, NetworkModel, QueueSpec, RawConfig};
pub use network::{Network, Tolerances};
