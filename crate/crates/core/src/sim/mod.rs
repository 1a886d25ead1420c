//! Discrete-event simulation of the cyclic server with routing, used as an
//! independent check on the transform results.
//!
//! Replications run in parallel with seeds `seed + r` and are merged in
//! replication order, so results do not depend on thread scheduling. Each
//! replication's measured cycles are cut into equal batches; estimates and
//! confidence intervals come from the means of all batches of all
//! replications.

mod engine;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::Activity;
pub use stats::{z_score, SimStat};

use crate::analysis::{WaitClass, WaitReport};
use crate::model::NetworkModel;
use engine::{run_replication, Key, Origin, RunRecord};
use stats::{estimate, Acc};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
    #[error("analytic results belong to model {analytic}, simulation to {simulated}")]
    ModelMismatch { analytic: String, simulated: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub warmup_cycles: u64,
    pub measured_cycles: u64,
    pub replications: usize,
    pub batches: usize,
    pub seed: u64,
    /// Total number of customers in the system at which a run is declared
    /// divergent and stopped.
    pub max_backlog: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            warmup_cycles: 1_000,
            measured_cycles: 100_000,
            replications: 10,
            batches: 10,
            seed: 1,
            max_backlog: 1_000_000,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        if self.replications == 0 || self.batches == 0 {
            return Err(SimError::InvalidConfig(
                "replications and batches must be positive".into(),
            ));
        }
        if self.replications * self.batches < 2 {
            return Err(SimError::InvalidConfig(
                "at least two batches in total are needed for confidence intervals".into(),
            ));
        }
        if self.measured_cycles < 100 {
            return Err(SimError::InvalidConfig(format!(
                "at least 100 measured cycles are needed, got {}",
                self.measured_cycles
            )));
        }
        if self.measured_cycles < self.batches as u64 {
            return Err(SimError::InvalidConfig(format!(
                "{} measured cycles cannot fill {} batches",
                self.measured_cycles, self.batches
            )));
        }
        Ok(())
    }
}

/// What an external customer arrived during, or where an internal one came
/// from (1-based queue numbers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    ExternalInVisit { queue: usize },
    ExternalInSwitch { queue: usize },
    InternalFrom { queue: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEstimate {
    pub queue: usize,
    pub condition: Condition,
    pub wait: SimStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEstimate {
    /// 1-based queue number.
    pub queue: usize,
    pub internal: Option<SimStat>,
    pub external: Option<SimStat>,
    pub arbitrary: Option<SimStat>,
    pub cycle: Option<SimStat>,
    /// Time-average number of customers, the one in service included.
    pub queue_length: Option<SimStat>,
    /// Services per unit time.
    pub service_rate: Option<SimStat>,
}

impl QueueEstimate {
    pub fn class(&self, class: WaitClass) -> Option<&SimStat> {
        match class {
            WaitClass::Internal => self.internal.as_ref(),
            WaitClass::External => self.external.as_ref(),
            WaitClass::Arbitrary => self.arbitrary.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub model_hash: String,
    pub config: SimConfig,
    /// Some replication hit the backlog cap; estimates are then meaningless.
    pub diverged: bool,
    pub max_backlog: usize,
    /// Departures from the network per unit time.
    pub throughput: Option<SimStat>,
    pub queues: Vec<QueueEstimate>,
    pub conditional: Vec<ConditionalEstimate>,
}

fn merged(runs: &[RunRecord], key: Key) -> Vec<Acc> {
    runs.iter()
        .flat_map(|r| r.stats.get(&key).cloned().unwrap_or_default())
        .collect()
}

pub fn simulate(model: &NetworkModel, cfg: &SimConfig) -> Result<SimEstimate, SimError> {
    cfg.validate()?;
    let runs: Vec<RunRecord> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(model, cfg, r))
        .collect();
    let diverged = runs.iter().any(|r| r.diverged);
    if diverged {
        log::warn!("simulation diverged: backlog exceeded {}", cfg.max_backlog);
    }
    let stat = |key| estimate(&merged(&runs, key));
    let queues = (0..model.n())
        .map(|q| QueueEstimate {
            queue: q + 1,
            internal: stat(Key::Wait { queue: q, external: false }),
            external: stat(Key::Wait { queue: q, external: true }),
            arbitrary: stat(Key::WaitAny(q)),
            cycle: stat(Key::Cycle(q)),
            queue_length: stat(Key::QueueLength(q)),
            service_rate: stat(Key::ServiceRate(q)),
        })
        .collect();
    let mut keys: Vec<Key> = runs.iter().flat_map(|r| r.stats.keys().copied()).collect();
    keys.sort();
    keys.dedup();
    let conditional = keys
        .into_iter()
        .filter_map(|key| match key {
            Key::Conditional { queue, origin } => {
                let condition = match origin {
                    Origin::External(Activity::Visit(j)) => Condition::ExternalInVisit { queue: j + 1 },
                    Origin::External(Activity::Switch(j)) => Condition::ExternalInSwitch { queue: j + 1 },
                    Origin::Internal { from } => Condition::InternalFrom { queue: from + 1 },
                };
                stat(key).map(|wait| ConditionalEstimate {
                    queue: queue + 1,
                    condition,
                    wait,
                })
            }
            _ => None,
        })
        .collect();
    Ok(SimEstimate {
        model_hash: model.fingerprint(),
        config: cfg.clone(),
        diverged,
        max_backlog: runs.iter().map(|r| r.max_backlog).max().unwrap_or(0),
        throughput: stat(Key::Throughput),
        queues,
        conditional,
    })
}

/// Comparison class: a waiting-time class or the cycle time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompareClass {
    Internal,
    External,
    Arbitrary,
    Cycle,
}

impl CompareClass {
    pub fn name(self) -> &'static str {
        match self {
            CompareClass::Internal => "internal",
            CompareClass::External => "external",
            CompareClass::Arbitrary => "arbitrary",
            CompareClass::Cycle => "cycle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub queue: usize,
    pub class: CompareClass,
    pub mean: f64,
    pub sd: Option<f64>,
    pub m2: Option<f64>,
    pub m3: Option<f64>,
    pub sim_mean: f64,
    pub ci_half: f64,
    pub z: f64,
    pub sim_sd: Option<f64>,
    pub sd_ci_half: Option<f64>,
    pub z_sd: Option<f64>,
    /// `|analytic - simulated| / |analytic|` for the mean.
    pub rel_gap: f64,
    pub sd_rel_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub model_hash: String,
    pub z_threshold: f64,
    pub diverged: bool,
    pub passed: bool,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn max_abs_z(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| std::iter::once(r.z).chain(r.z_sd))
            .fold(0.0, |m, z| m.max(z.abs()))
    }

    pub fn max_rel_gap(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| std::iter::once(r.rel_gap).chain(r.sd_rel_gap))
            .fold(0.0, f64::max)
    }
}

fn rel_gap(analytic: f64, simulated: f64) -> f64 {
    let diff = (analytic - simulated).abs();
    if analytic != 0.0 {
        diff / analytic.abs()
    } else {
        diff
    }
}

pub const Z_THRESHOLD: f64 = 3.0;

/// Negative control: moves every analytic mean that has a simulated
/// counterpart by `sigmas` standard errors of that estimate. Higher moments
/// are left alone.
pub fn shift_analytic_means(report: &mut WaitReport, sim: &SimEstimate, sigmas: f64) {
    for (qa, qs) in report.queues.iter_mut().zip(&sim.queues) {
        let pairs = [
            (qa.internal.as_mut(), qs.internal.as_ref()),
            (qa.external.as_mut(), qs.external.as_ref()),
            (qa.arbitrary.as_mut(), qs.arbitrary.as_ref()),
            (Some(&mut qa.cycle), qs.cycle.as_ref()),
        ];
        for (a, s) in pairs {
            if let (Some(a), Some(s)) = (a, s) {
                a.raw[0] += sigmas * s.se;
            }
        }
    }
}

/// Pairs every analytic moment with its simulation estimate. The
/// comparison passes when no run diverged and every mean and sd z-score
/// is within [`Z_THRESHOLD`].
pub fn compare(report: &WaitReport, sim: &SimEstimate) -> Result<Comparison, SimError> {
    if report.model_hash != sim.model_hash {
        return Err(SimError::ModelMismatch {
            analytic: report.model_hash.clone(),
            simulated: sim.model_hash.clone(),
        });
    }
    let mut rows = Vec::new();
    for (qa, qs) in report.queues.iter().zip(&sim.queues) {
        let classes = [
            (CompareClass::Internal, qa.internal.as_ref(), qs.internal.as_ref()),
            (CompareClass::External, qa.external.as_ref(), qs.external.as_ref()),
            (CompareClass::Arbitrary, qa.arbitrary.as_ref(), qs.arbitrary.as_ref()),
            (CompareClass::Cycle, Some(&qa.cycle), qs.cycle.as_ref()),
        ];
        for (class, analytic, simulated) in classes {
            let (Some(a), Some(s)) = (analytic, simulated) else {
                continue;
            };
            let z_sd = match (a.sd, s.sd, s.sd_se) {
                (Some(asd), Some(ssd), Some(se)) => Some(z_score(asd, ssd, se)),
                _ => None,
            };
            rows.push(ComparisonRow {
                queue: qa.queue,
                class,
                mean: a.mean(),
                sd: a.sd,
                m2: a.get(2),
                m3: a.get(3),
                sim_mean: s.mean,
                ci_half: s.ci_half,
                z: z_score(a.mean(), s.mean, s.se),
                sim_sd: s.sd,
                sd_ci_half: s.sd_ci_half,
                z_sd,
                rel_gap: rel_gap(a.mean(), s.mean),
                sd_rel_gap: a.sd.zip(s.sd).map(|(x, y)| rel_gap(x, y)),
            });
        }
    }
    let within = rows
        .iter()
        .all(|r| r.z.abs() <= Z_THRESHOLD && r.z_sd.is_none_or(|z| z.abs() <= Z_THRESHOLD));
    Ok(Comparison {
        model_hash: report.model_hash.clone(),
        z_threshold: Z_THRESHOLD,
        diverged: sim.diverged,
        passed: within && !sim.diverged && !rows.is_empty(),
        rows,
    })
}
