//! Static network description: queues, distributions, routing and the
//! traffic equations.
//!
//! Queues are indexed `0..n` internally and visited in that cyclic order.
//! Row `i` of the routing matrix holds the exit probability in column 0 and
//! the probability of moving to queue `j` in column `j + 1`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const ROW_SUM_TOL: f64 = 1e-12;
const SINGULAR_TOL: f64 = 1e-12;
const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("network needs at least one queue")]
    Empty,
    #[error("routing row {row} sums to {sum} instead of 1")]
    RowSum { row: usize, sum: f64 },
    #[error("routing entry ({row}, {col}) = {value} is outside [0, 1]")]
    RoutingEntry { row: usize, col: usize, value: f64 },
    #[error("routing matrix has {rows} rows of width {width}; expected {n} rows of width {}", n + 1)]
    RoutingShape { rows: usize, width: usize, n: usize },
    #[error("routing is singular: customers can circulate forever without leaving")]
    SingularRouting,
    #[error("negative or non-finite parameter {what} = {value}")]
    NegativeParameter { what: String, value: f64 },
    #[error("invalid distribution for {what}: {reason}")]
    InvalidDistribution { what: String, reason: String },
}

/// Service and switch-over time distributions with closed-form transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum DistributionSpec {
    #[serde(rename = "det")]
    Deterministic { value: f64 },
    #[serde(rename = "exp")]
    Exponential { rate: f64 },
    #[serde(rename = "erlang")]
    Erlang { phases: u32, rate: f64 },
    #[serde(rename = "hyperexp")]
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
    #[serde(rename = "gamma")]
    Gamma { shape: f64, rate: f64 },
}

impl DistributionSpec {
    pub fn zero() -> Self {
        DistributionSpec::Deterministic { value: 0.0 }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::Exponential { rate } => 1.0 / rate,
            DistributionSpec::Erlang { phases, rate } => *phases as f64 / rate,
            DistributionSpec::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w / r).sum()
            }
            DistributionSpec::Gamma { shape, rate } => shape / rate,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            DistributionSpec::Deterministic { value } => value * value,
            DistributionSpec::Exponential { rate } => 2.0 / (rate * rate),
            DistributionSpec::Erlang { phases, rate } => {
                let k = *phases as f64;
                k * (k + 1.0) / (rate * rate)
            }
            DistributionSpec::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| 2.0 * w / (r * r))
                .sum(),
            DistributionSpec::Gamma { shape, rate } => shape * (shape + 1.0) / (rate * rate),
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.second_moment() - m * m).max(0.0)
    }

    pub fn validate(&self, what: &str) -> Result<(), ModelError> {
        let bad = |reason: String| ModelError::InvalidDistribution {
            what: what.to_string(),
            reason,
        };
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(bad(format!("{name} must be > 0, got {x}")))
            }
        };
        match self {
            DistributionSpec::Deterministic { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(ModelError::NegativeParameter {
                        what: what.to_string(),
                        value: *value,
                    });
                }
            }
            DistributionSpec::Exponential { rate } => positive("rate", *rate)?,
            DistributionSpec::Erlang { phases, rate } => {
                if *phases == 0 {
                    return Err(bad("phases must be >= 1".into()));
                }
                positive("rate", *rate)?;
            }
            DistributionSpec::HyperExponential { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(bad("weights and rates must be non-empty and equally long".into()));
                }
                for r in rates {
                    positive("rate", *r)?;
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(bad("weights must be nonnegative".into()));
                }
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(bad(format!("weights sum to {s}")));
                }
            }
            DistributionSpec::Gamma { shape, rate } => {
                positive("shape", *shape)?;
                positive("rate", *rate)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discipline {
    Gated,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueSpec {
    #[serde(rename = "lambda")]
    pub arrival_rate: f64,
    pub service: DistributionSpec,
    #[serde(rename = "switchover")]
    pub switchover_after: DistributionSpec,
    pub discipline: Discipline,
}

/// Unvalidated network description, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawConfig {
    pub queues: Vec<QueueSpec>,
    pub routing: Vec<Vec<f64>>,
}

/// A validated network. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    queues: Vec<QueueSpec>,
    routing: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSolution {
    /// Total arrival rate per queue, external plus rerouted.
    pub gamma: Vec<f64>,
    pub rho_i: Vec<f64>,
    pub rho: f64,
    /// Mean total switch-over time per cycle.
    pub r: f64,
    /// Second moment of the total switch-over time per cycle.
    pub r2: f64,
    pub mean_cycle: f64,
    pub stable: bool,
}

pub fn validate(raw: RawConfig) -> Result<NetworkModel, ModelError> {
    let n = raw.queues.len();
    if n == 0 {
        return Err(ModelError::Empty);
    }
    if raw.routing.len() != n || raw.routing.iter().any(|r| r.len() != n + 1) {
        return Err(ModelError::RoutingShape {
            rows: raw.routing.len(),
            width: raw.routing.iter().map(Vec::len).max().unwrap_or(0),
            n,
        });
    }
    for (i, q) in raw.queues.iter().enumerate() {
        if !(q.arrival_rate.is_finite() && q.arrival_rate >= 0.0) {
            return Err(ModelError::NegativeParameter {
                what: format!("lambda of queue {}", i + 1),
                value: q.arrival_rate,
            });
        }
        q.service.validate(&format!("service of queue {}", i + 1))?;
        q.switchover_after
            .validate(&format!("switchover after queue {}", i + 1))?;
    }
    for (i, row) in raw.routing.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(ModelError::RoutingEntry {
                    row: i + 1,
                    col: j,
                    value: p,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(ModelError::RowSum { row: i + 1, sum });
        }
    }
    let model = NetworkModel {
        queues: raw.queues,
        routing: raw.routing,
    };
    model.traffic_lu()?;
    Ok(model)
}

impl NetworkModel {
    pub fn n(&self) -> usize {
        self.queues.len()
    }

    pub fn queues(&self) -> &[QueueSpec] {
        &self.queues
    }

    pub fn queue(&self, i: usize) -> &QueueSpec {
        &self.queues[i]
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.queues[i].arrival_rate
    }

    pub fn service(&self, i: usize) -> &DistributionSpec {
        &self.queues[i].service
    }

    pub fn switchover(&self, i: usize) -> &DistributionSpec {
        &self.queues[i].switchover_after
    }

    pub fn discipline(&self, i: usize) -> Discipline {
        self.queues[i].discipline
    }

    pub fn is_exhaustive(&self, i: usize) -> bool {
        self.discipline(i) == Discipline::Exhaustive
    }

    /// Probability of moving from queue `from` to queue `to` after service.
    pub fn p(&self, from: usize, to: usize) -> f64 {
        self.routing[from][to + 1]
    }

    pub fn p_exit(&self, from: usize) -> f64 {
        self.routing[from][0]
    }

    pub fn routing(&self) -> &[Vec<f64>] {
        &self.routing
    }

    /// Queue reached `k` steps backward in the cyclic order from `i`.
    pub fn back(&self, i: usize, k: usize) -> usize {
        let n = self.n();
        (i + n - k % n) % n
    }

    pub fn to_config(&self) -> RawConfig {
        RawConfig {
            queues: self.queues.clone(),
            routing: self.routing.clone(),
        }
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(&self.to_config()).expect("model serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Same network with every external arrival rate multiplied by `factor`.
    pub fn with_scaled_arrivals(&self, factor: f64) -> Result<NetworkModel, ModelError> {
        let mut raw = self.to_config();
        for q in &mut raw.queues {
            q.arrival_rate *= factor;
        }
        validate(raw)
    }

    /// Scales external arrival rates so the total load equals `rho`.
    pub fn with_load(&self, rho: f64) -> Result<NetworkModel, ModelError> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(ModelError::NegativeParameter {
                what: "target load".into(),
                value: rho,
            });
        }
        let current = solve_traffic(self)?.rho;
        if current <= 0.0 {
            return Err(ModelError::NegativeParameter {
                what: "current load (no external arrivals to scale)".into(),
                value: current,
            });
        }
        self.with_scaled_arrivals(rho / current)
    }

    fn traffic_lu(&self) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, ModelError> {
        let n = self.n();
        // (I - P^T) gamma = lambda
        let m = DMatrix::from_fn(n, n, |r, c| {
            let id = if r == c { 1.0 } else { 0.0 };
            id - self.p(c, r)
        });
        let lu = m.lu();
        let u = lu.u();
        let min_pivot = (0..n).map(|k| u[(k, k)].abs()).fold(f64::INFINITY, f64::min);
        if !(min_pivot > SINGULAR_TOL) {
            return Err(ModelError::SingularRouting);
        }
        Ok(lu)
    }
}

pub fn solve_traffic(model: &NetworkModel) -> Result<TrafficSolution, ModelError> {
    let n = model.n();
    let lu = model.traffic_lu()?;
    let lambda = DVector::from_fn(n, |i, _| model.lambda(i));
    let gamma = lu.solve(&lambda).ok_or(ModelError::SingularRouting)?;
    // Round-off can push a zero rate to -1e-17.
    let gamma: Vec<f64> = gamma.iter().map(|g| g.max(0.0)).collect();
    let rho_i: Vec<f64> = (0..n).map(|i| gamma[i] * model.service(i).mean()).collect();
    let rho: f64 = rho_i.iter().sum();
    let r: f64 = (0..n).map(|i| model.switchover(i).mean()).sum();
    let var: f64 = (0..n).map(|i| model.switchover(i).variance()).sum();
    let r2 = var + r * r;
    let stable = rho < 1.0;
    if !stable {
        log::warn!("total load {rho} >= 1: the network is unstable");
    }
    let mean_cycle = if stable { r / (1.0 - rho) } else { f64::INFINITY };
    Ok(TrafficSolution {
        gamma,
        rho_i,
        rho,
        r,
        r2,
        mean_cycle,
        stable,
    })
}
