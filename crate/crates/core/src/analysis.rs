//! Cycle-time and waiting-time transforms, and the per-queue moment report.
//!
//! Every waiting-time transform for a target queue `i` needs the kernel
//! tables of `i` and of its predecessor `i - 1`; [`Target`] computes them
//! once so the conditional transforms and their mixtures can share them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AnalysisError, Result};
use crate::kernels::{kernel_table, u_vectors, KernelTable, UVectors};
use crate::model::Discipline;
use crate::network::Network;
use crate::pgf::{boundary_pgf, lb_service, lb_visit, lb_visit_marked, lc_service, ArgVector, Boundary};
use crate::transforms::{
    lst, moments_from_jet, past_residual, Jet, Moments, TransformError, Value, MAX_LEN,
};

/// Extra jet order carried through the computation; each removable 0/0
/// quotient on the way costs one order.
pub const JET_SLACK: usize = 3;

/// Relative threshold below which a class or period weight counts as zero.
const WEIGHT_TOL: f64 = 1e-12;

/// Conditioning periods for an external arrival, `k` steps back from the
/// target queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrivalPeriod {
    Visit(usize),
    Switch(usize),
}

/// Index sets of the mixtures for one target queue.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Plan {
    internal: Vec<usize>,
    visits: Vec<usize>,
    switches: Vec<usize>,
}

impl Plan {
    fn for_discipline(discipline: Discipline, n: usize) -> Plan {
        match discipline {
            Discipline::Gated => Plan {
                internal: (1..=n).collect(),
                visits: (1..=n).collect(),
                switches: (1..=n).collect(),
            },
            // customers routed back to, or arriving at, an exhaustive queue
            // during its own visit are served in that visit: k = 0 replaces k = N
            Discipline::Exhaustive => Plan {
                internal: (0..n).collect(),
                visits: (0..n).collect(),
                switches: (1..=n).collect(),
            },
        }
    }
}

fn plan(net: &Network, i: usize) -> Plan {
    Plan::for_discipline(net.model().discipline(i), net.n())
}

/// Mixture weights of the internal waiting time of queue `i` over the
/// source offsets `k`; zero weights are omitted.
pub fn internal_weights(net: &Network, i: usize) -> Result<Vec<(usize, f64)>> {
    let m = net.model();
    let internal_rate = net.gamma(i) - m.lambda(i);
    if internal_rate <= WEIGHT_TOL * net.gamma(i).max(1.0) {
        return Err(AnalysisError::NoInternalArrivals { queue: i + 1 });
    }
    Ok(plan(net, i)
        .internal
        .into_iter()
        .filter_map(|k| {
            let src = m.back(i, k);
            let w = net.gamma(src) * m.p(src, i) / internal_rate;
            (w > WEIGHT_TOL).then_some((k, w))
        })
        .collect())
}

/// Mixture weights of the external waiting time of queue `i` over the
/// periods in which the arrival can fall; zero weights are omitted.
pub fn external_weights(net: &Network, i: usize) -> Result<Vec<(ArrivalPeriod, f64)>> {
    let m = net.model();
    if m.lambda(i) <= 0.0 {
        return Err(AnalysisError::NoExternalArrivals { queue: i + 1 });
    }
    let t = net.traffic();
    let p = plan(net, i);
    let visits = p
        .visits
        .into_iter()
        .map(|k| (ArrivalPeriod::Visit(k), t.rho_i[m.back(i, k)]));
    let switches = p.switches.into_iter().map(|k| {
        let src = m.back(i, k);
        (ArrivalPeriod::Switch(k), m.switchover(src).mean() / t.mean_cycle)
    });
    Ok(visits.chain(switches).filter(|(_, w)| *w > WEIGHT_TOL).collect())
}

/// Kernel tables and argument vectors for one target queue at one `omega`.
#[derive(Debug, Clone)]
pub struct Target<V> {
    i: usize,
    omega: V,
    prev: KernelTable<V>,
    u: UVectors<V>,
    /// `B~_i(omega)`.
    b_i: V,
}

impl<V: Value> Target<V> {
    pub fn new(net: &Network, i: usize, omega: V) -> Result<Self> {
        net.require_analyzable()?;
        if i >= net.n() {
            return Err(AnalysisError::ArgumentOutOfRange(format!("queue index {}", i + 1)));
        }
        let own = kernel_table(net, i, omega)?;
        let prev_index = net.model().back(i, 1);
        let prev = if prev_index == i {
            own.clone()
        } else {
            kernel_table(net, prev_index, omega)?
        };
        let u = u_vectors(net, &own, &prev)?;
        let b_i = lst(net.model().service(i), omega)?;
        Ok(Target {
            i,
            omega,
            prev,
            u,
            b_i,
        })
    }

    pub fn queue(&self) -> usize {
        self.i
    }

    /// `sum_{j=1}^{k-1} lambda_{i-j} (1 - B~_{j-1,i-1}(omega))`: arrival term
    /// of the queues still to be served before the target.
    fn pending(&self, net: &Network, k: usize) -> V {
        let m = net.model();
        (1..k).fold(self.omega.lift(0.0), |acc, j| {
            acc + self.prev.btilde[j - 1].one_minus() * m.lambda(m.back(self.i, j))
        })
    }

    /// `prod_{j<upto} R~_{j,i-1}(omega)`.
    fn switch_product(&self, upto: usize) -> V {
        self.prev.rtilde[..upto]
            .iter()
            .fold(self.omega.lift(1.0), |acc, r| acc * *r)
    }

    fn check_k(&self, net: &Network, k: usize, allowed: &[usize], what: &str) -> Result<()> {
        if allowed.contains(&k) {
            Ok(())
        } else {
            Err(AnalysisError::ArgumentOutOfRange(format!(
                "{what}: offset k = {k} not valid for queue {} ({:?})",
                self.i + 1,
                net.model().discipline(self.i)
            )))
        }
    }

    pub fn cycle_time(&self, net: &Network) -> Result<V> {
        Ok(lb_visit(net, self.i, &self.u.cycle())? * self.switch_product(net.n()))
    }

    pub fn wait_internal_cond(&self, net: &Network, k: usize) -> Result<V> {
        let m = net.model();
        self.check_k(net, k, &plan(net, self.i).internal, "internal wait")?;
        let src = m.back(self.i, k);
        if !(net.gamma(src) * m.p(src, self.i) > 0.0) {
            return Err(AnalysisError::ImpossibleCondition(format!(
                "no customers are routed from queue {} to queue {}",
                src + 1,
                self.i + 1
            )));
        }
        if k == 0 {
            return Ok(lc_service(net, src, &self.u.exh0())?.value);
        }
        let at_completion = lc_service(net, src, &self.u.gate_composite(k))?.value;
        Ok(at_completion * self.switch_product(k))
    }

    pub fn wait_internal(&self, net: &Network) -> Result<V> {
        let mut acc = self.omega.lift(0.0);
        for (k, w) in internal_weights(net, self.i)? {
            acc = acc + self.wait_internal_cond(net, k)? * w;
        }
        Ok(acc)
    }

    pub fn wait_switch(&self, net: &Network, k: usize) -> Result<V> {
        let m = net.model();
        self.check_k(net, k, &plan(net, self.i).switches, "switch-over wait")?;
        let src = m.back(self.i, k);
        let r = m.switchover(src);
        if r.mean() <= 0.0 {
            return Err(AnalysisError::ZeroSwitchover { queue: src + 1 });
        }
        let pending = self.pending(net, k);
        let past = pending + self.b_i.one_minus() * m.lambda(self.i);
        let residual = self.omega + pending;
        let joint = past_residual(r, past, residual)?;
        let at_begin =
            boundary_pgf(net, Boundary::SwitchBegin(src), &self.u.gate_composite(k - 1))?.value;
        Ok(joint * at_begin * self.switch_product(k - 1))
    }

    pub fn wait_visit(&self, net: &Network, k: usize) -> Result<V> {
        let m = net.model();
        self.check_k(net, k, &plan(net, self.i).visits, "visit wait")?;
        let src = m.back(self.i, k);
        if !(net.traffic().rho_i[src] > 0.0) {
            return Err(AnalysisError::ImpossibleCondition(format!(
                "visits to queue {} have zero mean length",
                src + 1
            )));
        }
        let service = m.service(src);
        if k == 0 {
            let joint = past_residual(service, self.b_i.one_minus() * m.lambda(src), self.omega)?;
            let at_begin = lb_service(net, src, &self.u.exh0())?.value;
            return Ok(joint * at_begin / self.b_i);
        }
        let in_service = self.prev.btilde[k - 1];
        let mut pending = self.pending(net, k);
        let routing = if m.is_exhaustive(src) {
            // arrivals to the source during either part of the ongoing
            // service are still served in this visit, and the served
            // customer may return to the source
            pending = pending + in_service.one_minus() * m.lambda(src);
            (0..k).fold(self.omega.lift(1.0), |acc, j| {
                let dest = m.back(self.i, j + 1);
                acc - self.prev.btilde[j].one_minus() * m.p(src, dest)
            })
        } else {
            self.prev.ptilde[k - 1]
        };
        let past = pending + self.b_i.one_minus() * m.lambda(self.i);
        let residual = self.omega + pending;
        let joint = past_residual(service, past, residual)?;
        let at_begin = lb_service(net, src, &self.u.gate_composite(k))?.value;
        Ok(joint * at_begin * self.switch_product(k) * routing / in_service)
    }

    pub fn wait_external(&self, net: &Network) -> Result<V> {
        let mut acc = self.omega.lift(0.0);
        for (period, w) in external_weights(net, self.i)? {
            let v = match period {
                ArrivalPeriod::Visit(k) => self.wait_visit(net, k)?,
                ArrivalPeriod::Switch(k) => self.wait_switch(net, k)?,
            };
            acc = acc + v * w;
        }
        Ok(acc)
    }

    pub fn wait_arbitrary(&self, net: &Network) -> Result<V> {
        let (w_int, w_ext) = class_weights(net, self.i)?;
        let mut acc = self.omega.lift(0.0);
        if w_int > WEIGHT_TOL {
            acc = acc + self.wait_internal(net)? * w_int;
        }
        if w_ext > WEIGHT_TOL {
            acc = acc + self.wait_external(net)? * w_ext;
        }
        Ok(acc)
    }
}

/// `((gamma_i - lambda_i) / gamma_i, lambda_i / gamma_i)`.
pub fn class_weights(net: &Network, i: usize) -> Result<(f64, f64)> {
    let gamma = net.gamma(i);
    if !(gamma > 0.0) {
        return Err(AnalysisError::DeadQueue { queue: i + 1 });
    }
    let ext = (net.model().lambda(i) / gamma).min(1.0);
    Ok((1.0 - ext, ext))
}

/// Evaluates `$body` with `$w` bound to `omega`. A scalar evaluation that
/// lands exactly on a removable 0/0 point is redone on a short jet at the
/// same point and its constant term returned.
macro_rules! scalar_safe {
    ($omega:expr, |$w:ident| $body:expr) => {{
        let omega = $omega;
        match (|$w: V| -> Result<V> { $body })(omega) {
            Err(AnalysisError::Transform(TransformError::IndeterminateScalar))
                if omega.as_scalar().is_some() =>
            {
                let at = Jet::variable(omega.value(), 1 + JET_SLACK);
                let j = (|$w: Jet| -> Result<Jet> { $body })(at)?;
                Ok(omega.lift(j.value()))
            }
            r => r,
        }
    }};
}

pub fn cycle_time<V: Value>(net: &Network, i: usize, omega: V) -> Result<V> {
    scalar_safe!(omega, |w| Target::new(net, i, w)?.cycle_time(net))
}

/// Cycle-time transform of queue `i` through the distributional form of
/// Little's law applied to the external customers of `i`.
pub fn cycle_time_little<V: Value>(net: &Network, i: usize, omega: V) -> Result<V> {
    net.require_analyzable()?;
    let lambda = net.model().lambda(i);
    if lambda <= 0.0 {
        return Err(AnalysisError::NoExternalArrivals { queue: i + 1 });
    }
    // the marked variable only ever enters as lambda_i (1 - z^E) = omega, so
    // the evaluation continues analytically past omega = lambda_i
    if omega.value() < 0.0 {
        return Err(AnalysisError::ArgumentOutOfRange(format!(
            "omega = {} is negative",
            omega.value()
        )));
    }
    scalar_safe!(omega, |w| {
        let marked = (w / lambda).one_minus();
        lb_visit_marked(net, i, &ArgVector::ones(net.n(), w), marked)
    })
}

pub fn wait_internal_cond<V: Value>(net: &Network, i: usize, k: usize, omega: V) -> Result<V> {
    scalar_safe!(omega, |w| Target::new(net, i, w)?.wait_internal_cond(net, k))
}

pub fn wait_internal<V: Value>(net: &Network, i: usize, omega: V) -> Result<V> {
    scalar_safe!(omega, |w| Target::new(net, i, w)?.wait_internal(net))
}

pub fn wait_switch<V: Value>(net: &Network, i: usize, k: usize, omega: V) -> Result<V> {
    scalar_safe!(omega, |w| Target::new(net, i, w)?.wait_switch(net, k))
}

pub fn wait_visit<V: Value>(net: &Network, i: usize, k: usize, omega: V) -> Result<V> {
    scalar_safe!(omega, |w| Target::new(net, i, w)?.wait_visit(net, k))
}

pub fn wait_external<V: Value>(net: &Network, i: usize, omega: V) -> Result<V> {
    scalar_safe!(omega, |w| Target::new(net, i, w)?.wait_external(net))
}

pub fn wait_arbitrary<V: Value>(net: &Network, i: usize, omega: V) -> Result<V> {
    scalar_safe!(omega, |w| Target::new(net, i, w)?.wait_arbitrary(net))
}

/// Waiting-time class of a transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaitClass {
    Internal,
    External,
    Arbitrary,
}

impl WaitClass {
    pub fn name(self) -> &'static str {
        match self {
            WaitClass::Internal => "internal",
            WaitClass::External => "external",
            WaitClass::Arbitrary => "arbitrary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    /// Number of moments requested (jet order before padding).
    pub jet_order: usize,
    /// Highest moment written to the table.
    pub moments: usize,
    pub omega_grid: Vec<f64>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            jet_order: 4,
            moments: 3,
            omega_grid: log_grid(1e-3, 10.0, 32),
        }
    }
}

/// `count` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstSample {
    pub omega: f64,
    pub internal: Option<f64>,
    pub external: Option<f64>,
    pub arbitrary: Option<f64>,
    pub cycle: f64,
    pub cycle_little: Option<f64>,
    /// `|cycle - cycle_little|` where the Little's-law route applies.
    pub little_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueReport {
    /// 1-based queue number.
    pub queue: usize,
    pub discipline: Discipline,
    pub lambda: f64,
    pub gamma: f64,
    pub weight_internal: f64,
    pub weight_external: f64,
    pub internal: Option<Moments>,
    pub external: Option<Moments>,
    /// Absent for queues that are never served.
    pub arbitrary: Option<Moments>,
    pub cycle: Moments,
    pub lst: Vec<LstSample>,
}

impl QueueReport {
    pub fn class(&self, class: WaitClass) -> Option<&Moments> {
        match class {
            WaitClass::Internal => self.internal.as_ref(),
            WaitClass::External => self.external.as_ref(),
            WaitClass::Arbitrary => self.arbitrary.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitReport {
    pub model_hash: String,
    pub rho: f64,
    pub mean_cycle: f64,
    pub jet_order: usize,
    pub queues: Vec<QueueReport>,
}

impl WaitReport {
    /// Largest `|cycle - cycle_little|` over all queues and grid points.
    pub fn max_little_delta(&self) -> Option<f64> {
        self.queues
            .iter()
            .flat_map(|q| q.lst.iter().filter_map(|s| s.little_delta))
            .reduce(f64::max)
    }
}

/// Weighted sum of the classes that are present.
fn mix<V: Value>(parts: [(Option<V>, f64); 2]) -> Option<V> {
    parts
        .into_iter()
        .filter_map(|(v, w)| v.map(|v| v * w))
        .reduce(|a, b| a + b)
}

fn jet_moments(j: &Jet, wanted: usize) -> Result<Moments> {
    Ok(moments_from_jet(j, wanted.min(j.order()))?)
}

fn queue_report(net: &Network, i: usize, cfg: &ReportConfig) -> Result<QueueReport> {
    let m = net.model();
    let served = net.gamma(i) > 0.0;
    let (w_int, w_ext) = if served { class_weights(net, i)? } else { (0.0, 0.0) };
    let has_int = w_int > WEIGHT_TOL;
    let has_ext = w_ext > WEIGHT_TOL;
    let t = Target::new(net, i, Jet::variable(0.0, cfg.jet_order + JET_SLACK))?;
    let internal = if has_int { Some(t.wait_internal(net)?) } else { None };
    let external = if has_ext { Some(t.wait_external(net)?) } else { None };
    let arbitrary = mix([(internal, w_int), (external, w_ext)]);
    let cycle = jet_moments(&t.cycle_time(net)?, cfg.moments)?;
    let mean_cycle = net.mean_cycle();
    if (cycle.mean() - mean_cycle).abs() > 1e-9 * mean_cycle.max(1.0) {
        log::warn!(
            "queue {}: cycle-time mean {} differs from r/(1-rho) = {}",
            i + 1,
            cycle.mean(),
            mean_cycle
        );
    }

    let mut lst_samples = Vec::with_capacity(cfg.omega_grid.len());
    for &omega in &cfg.omega_grid {
        let internal = if has_int { Some(wait_internal(net, i, omega)?) } else { None };
        let external = if has_ext { Some(wait_external(net, i, omega)?) } else { None };
        let arbitrary = mix([(internal, w_int), (external, w_ext)]);
        let cycle = cycle_time(net, i, omega)?;
        let cycle_little = if m.lambda(i) > 0.0 {
            Some(cycle_time_little(net, i, omega)?)
        } else {
            None
        };
        lst_samples.push(LstSample {
            omega,
            internal,
            external,
            arbitrary,
            cycle,
            cycle_little,
            little_delta: cycle_little.map(|c| (c - cycle).abs()),
        });
    }

    Ok(QueueReport {
        queue: i + 1,
        discipline: m.discipline(i),
        lambda: m.lambda(i),
        gamma: net.gamma(i),
        weight_internal: w_int,
        weight_external: w_ext,
        internal: internal.map(|j| jet_moments(&j, cfg.moments)).transpose()?,
        external: external.map(|j| jet_moments(&j, cfg.moments)).transpose()?,
        arbitrary: arbitrary.map(|j| jet_moments(&j, cfg.moments)).transpose()?,
        cycle,
        lst: lst_samples,
    })
}

/// Moments of every waiting-time class and of the cycle time for all
/// queues, plus transform samples on the configured grid. Queues that are
/// never served (`gamma_i = 0`) only get cycle-time entries.
pub fn report(net: &Network, cfg: &ReportConfig) -> Result<WaitReport> {
    net.require_analyzable()?;
    if cfg.jet_order == 0 || cfg.jet_order + JET_SLACK >= MAX_LEN {
        return Err(AnalysisError::ArgumentOutOfRange(format!(
            "jet order {} outside 1..={}",
            cfg.jet_order,
            MAX_LEN - 1 - JET_SLACK
        )));
    }
    if cfg.moments > cfg.jet_order {
        return Err(AnalysisError::ArgumentOutOfRange(format!(
            "{} moments requested from a jet of order {}",
            cfg.moments, cfg.jet_order
        )));
    }
    let queues = (0..net.n())
        .into_par_iter()
        .map(|i| queue_report(net, i, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(WaitReport {
        model_hash: net.model().fingerprint(),
        rho: net.traffic().rho,
        mean_cycle: net.mean_cycle(),
        jet_order: cfg.jet_order,
        queues,
    })
}
