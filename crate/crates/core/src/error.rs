use thiserror::Error;

use crate::model::ModelError;
use crate::transforms::TransformError;

/// Failures of the transform machinery (kernels, PGFs, waiting times).
///
/// Queue numbers in messages are 1-based.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("network is unstable: total load rho = {rho} >= 1")]
    Unstable { rho: f64 },
    #[error("total mean switch-over time is zero; cycle quantities are degenerate")]
    NoSwitchover,
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("queue {queue} is never served (gamma = 0)")]
    DeadQueue { queue: usize },
    #[error("queue {queue} has no external arrivals")]
    NoExternalArrivals { queue: usize },
    #[error("queue {queue} has no internal (rerouted) arrivals")]
    NoInternalArrivals { queue: usize },
    #[error("switch-over after queue {queue} has zero mean")]
    ZeroSwitchover { queue: usize },
    #[error("conditioning event has probability zero: {0}")]
    ImpossibleCondition(String),
    #[error("argument out of range: {0}")]
    ArgumentOutOfRange(String),
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;
