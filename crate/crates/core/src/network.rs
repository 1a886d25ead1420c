use serde::{Deserialize, Serialize};

use crate::error::{AnalysisError, Result};
use crate::model::{solve_traffic, NetworkModel, TrafficSolution};
use crate::transforms::REMOVABLE_TOL;

/// Once an iteration is within its tolerance it continues while its steps
/// shrink, down to this fraction of the tolerance.
pub const POLISH_FLOOR: f64 = 1e-4;

/// Iteration caps and convergence thresholds shared by the numerical routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Sup-norm threshold for the visit-begin product iteration.
    pub visit_tol: f64,
    pub max_cycles: usize,
    /// Sup-norm threshold between successive busy-period iterates.
    pub busy_tol: f64,
    pub busy_max_iter: usize,
    /// Leading-coefficient threshold for removable 0/0 quotients.
    pub removable_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            visit_tol: 1e-13,
            max_cycles: 1_000_000,
            busy_tol: 1e-13,
            busy_max_iter: 100_000,
            removable_tol: REMOVABLE_TOL,
        }
    }
}

/// A validated model together with its traffic solution and tolerances.
#[derive(Debug, Clone)]
pub struct Network {
    model: NetworkModel,
    traffic: TrafficSolution,
    tol: Tolerances,
}

impl Network {
    pub fn new(model: NetworkModel) -> Result<Self> {
        Self::with_tolerances(model, Tolerances::default())
    }

    pub fn with_tolerances(model: NetworkModel, tol: Tolerances) -> Result<Self> {
        let traffic = solve_traffic(&model)?;
        Ok(Network {
            model,
            traffic,
            tol,
        })
    }

    pub fn model(&self) -> &NetworkModel {
        &self.model
    }

    pub fn traffic(&self) -> &TrafficSolution {
        &self.traffic
    }

    pub fn tol(&self) -> &Tolerances {
        &self.tol
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn gamma(&self, i: usize) -> f64 {
        self.traffic.gamma[i]
    }

    pub fn mean_cycle(&self) -> f64 {
        self.traffic.mean_cycle
    }

    /// Analysis needs a stable network with some switch-over time.
    pub fn require_analyzable(&self) -> Result<()> {
        if !self.traffic.stable {
            return Err(AnalysisError::Unstable {
                rho: self.traffic.rho,
            });
        }
        if self.traffic.r <= 0.0 {
            return Err(AnalysisError::NoSwitchover);
        }
        Ok(())
    }
}
