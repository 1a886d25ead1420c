//! Joint queue-length generating functions at period boundaries, service
//! epochs and arbitrary epochs, evaluated through the laws of motion.
//!
//! The visit-begin function is the infinite product of switch-over factors
//! along the backward cycle map; every other boundary is one or two
//! substitutions away from it.

use serde::{Deserialize, Serialize};

use crate::error::{AnalysisError, Result};
use crate::kernels::busy_period;
use crate::network::{Network, POLISH_FLOOR};
use crate::transforms::{lst, past_residual, Value};

/// Coordinate of an argument vector: a queue (customers in front of the
/// gate) or the gate slot (customers behind the gate of the queue being
/// visited).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Queue(usize),
    Gate,
}

/// Separate marking of the external customers of one queue, used by the
/// Little's-law route to the cycle time.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ExternalMark<V> {
    pub queue: usize,
    pub front: V,
    pub gate: V,
}

/// Generating-function argument `(z_1, ..., z_N, z_G)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgVector<V> {
    pub z: Vec<V>,
    pub gate: V,
    pub(crate) ext: Option<ExternalMark<V>>,
}

impl<V: Value> ArgVector<V> {
    pub fn ones(n: usize, like: V) -> Self {
        let one = like.lift(1.0);
        ArgVector {
            z: vec![one; n],
            gate: one,
            ext: None,
        }
    }

    pub fn new(z: Vec<V>, gate: V) -> Self {
        ArgVector { z, gate, ext: None }
    }

    pub fn get(&self, slot: Slot) -> V {
        match slot {
            Slot::Queue(q) => self.z[q],
            Slot::Gate => self.gate,
        }
    }

    pub fn set(&mut self, slot: Slot, v: V) {
        match slot {
            Slot::Queue(q) => self.z[q] = v,
            Slot::Gate => self.gate = v,
        }
    }

    /// Element-wise multiplication of one coordinate.
    pub fn scale(&mut self, slot: Slot, v: V) {
        let cur = self.get(slot);
        self.set(slot, cur * v);
    }

    /// Sup-norm distance of every coordinate (gate included) to one.
    pub fn distance_to_ones(&self) -> f64 {
        self.z
            .iter()
            .chain(std::iter::once(&self.gate))
            .fold(0.0_f64, |m, v| m.max(v.distance_to(1.0)))
    }

    fn queue_distance_to_ones(&self) -> f64 {
        let mut d = self.z.iter().fold(0.0_f64, |m, v| m.max(v.distance_to(1.0)));
        if let Some(e) = &self.ext {
            d = d.max(e.front.distance_to(1.0));
        }
        d
    }

    /// Variable attached to a new external arrival at queue `j`.
    fn arrival(&self, j: usize) -> V {
        match &self.ext {
            Some(e) if e.queue == j => e.front,
            _ => self.z[j],
        }
    }

    /// Variable attached to a new external arrival at queue `j` while `j`
    /// is being visited under gated service.
    fn gated_arrival(&self, j: usize) -> V {
        match &self.ext {
            Some(e) if e.queue == j => e.gate,
            _ => self.gate,
        }
    }
}

/// `Sigma(z) = sum_j lambda_j (1 - z_j)`.
pub fn sigma<V: Value>(net: &Network, z: &ArgVector<V>) -> V {
    let m = net.model();
    (0..m.n()).fold(z.gate.lift(0.0), |acc, j| {
        acc + z.arrival(j).one_minus() * m.lambda(j)
    })
}

/// Arrival term during a service at queue `i`: gated queues send their own
/// arrivals behind the gate, exhaustive queues leave them out.
pub fn sigma_i<V: Value>(net: &Network, i: usize, z: &ArgVector<V>) -> V {
    let m = net.model();
    let mut acc = z.gate.lift(0.0);
    for j in 0..m.n() {
        if j != i {
            acc = acc + z.arrival(j).one_minus() * m.lambda(j);
        } else if !m.is_exhaustive(i) {
            acc = acc + z.gated_arrival(i).one_minus() * m.lambda(i);
        }
    }
    acc
}

/// Routing generating function after a service at queue `i`. A gated
/// queue's self-routed customers go behind the gate; for exhaustive queues
/// this is the plain form (self-routing to `z_i`).
pub fn p_i<V: Value>(net: &Network, i: usize, z: &ArgVector<V>) -> V {
    let m = net.model();
    let mut acc = z.gate.lift(m.p_exit(i));
    for j in 0..m.n() {
        let var = if j == i && !m.is_exhaustive(i) {
            z.gate
        } else {
            z.z[j]
        };
        acc = acc + var * m.p(i, j);
    }
    acc
}

/// Routing generating function of an exhaustive queue conditioned on leaving
/// it: weights `p_{e,j} / (1 - p_{e,e})`, self-routing excluded.
pub fn p_exh_i<V: Value>(net: &Network, e: usize, z: &ArgVector<V>) -> V {
    let m = net.model();
    let scale = 1.0 - m.p(e, e);
    let mut acc = z.gate.lift(m.p_exit(e) / scale);
    for j in 0..m.n() {
        if j != e {
            acc = acc + z.z[j] * (m.p(e, j) / scale);
        }
    }
    acc
}

/// Gate removal at the end of a gated visit: gated customers become
/// ordinary customers of the queue.
fn switch_begin_arg<V: Value>(net: &Network, i: usize, z: &ArgVector<V>) -> ArgVector<V> {
    let mut out = z.clone();
    if !net.model().is_exhaustive(i) {
        out.gate = z.z[i];
        if let Some(e) = out.ext.as_mut() {
            if e.queue == i {
                e.gate = e.front;
            }
        }
    }
    out
}

/// Substitution turning the visit-completion argument into the visit-begin
/// argument of queue `i`.
fn visit_end_arg<V: Value>(net: &Network, i: usize, z: &ArgVector<V>) -> Result<ArgVector<V>> {
    let m = net.model();
    let mut out = z.clone();
    let v = if m.is_exhaustive(i) {
        let mut arrivals = sigma_i(net, i, z);
        if let Some(e) = z.ext.as_ref().filter(|e| e.queue == i) {
            // marked external arrivals during the visit are counted, not
            // served, so the marked count covers the whole cycle
            arrivals = arrivals + e.front.one_minus() * m.lambda(i);
        }
        let bp = busy_period(
            m.service(i),
            m.lambda(i),
            m.p(i, i),
            p_exh_i(net, i, z),
            arrivals,
            net.tol(),
        )?;
        out.gate = z.gate.lift(1.0);
        bp
    } else {
        lst(m.service(i), sigma_i(net, i, z))? * p_i(net, i, z)
    };
    out.z[i] = v;
    if let Some(e) = out.ext.as_mut() {
        if e.queue == i {
            e.front = v;
        }
    }
    Ok(out)
}

/// One full cycle backward from the beginning of a visit to queue `i`:
/// returns `(z', factor)` with `LB_i(z) = LB_i(z') * factor`.
///
/// Any external marking is consumed by the cycle and dropped from `z'`.
pub fn cycle_map<V: Value>(net: &Network, i: usize, z: &ArgVector<V>) -> Result<(ArgVector<V>, V)> {
    let m = net.model();
    let mut cur = z.clone();
    let mut factor = z.gate.lift(1.0);
    for step in 1..=m.n() {
        let j = m.back(i, step);
        factor = factor * lst(m.switchover(j), sigma(net, &cur))?;
        cur = switch_begin_arg(net, j, &cur);
        cur = visit_end_arg(net, j, &cur)?;
    }
    cur.ext = None;
    Ok((cur, factor))
}

/// Joint queue-length PGF at the beginning of a visit to queue `i`.
pub fn lb_visit<V: Value>(net: &Network, i: usize, z: &ArgVector<V>) -> Result<V> {
    if !net.traffic().stable {
        return Err(AnalysisError::Unstable {
            rho: net.traffic().rho,
        });
    }
    let tol = net.tol();
    let mut acc = z.gate.lift(1.0);
    let mut cur = z.clone();
    // As for busy periods, the product keeps going below `visit_tol` while
    // the distance still shrinks; scalar quotients near their removable
    // points divide this residual by a small denominator.
    let mut last = f64::INFINITY;
    for cycle in 0..tol.max_cycles {
        let (next, factor) = cycle_map(net, i, &cur)?;
        acc = acc * factor;
        let d = next.queue_distance_to_ones().max(factor.distance_to(1.0));
        cur = next;
        if d < tol.visit_tol * POLISH_FLOOR || (last < tol.visit_tol && d >= last) {
            log::trace!("visit-begin product for queue {} converged after {cycle} cycles", i + 1);
            return Ok(acc);
        }
        last = d;
    }
    if last < tol.visit_tol {
        return Ok(acc);
    }
    Err(AnalysisError::NoConvergence {
        what: "visit-begin product",
        iterations: tol.max_cycles,
    })
}

/// Visit-begin PGF of queue `i` with its external customers marked by
/// `external`; the other coordinates are taken from `z`.
pub(crate) fn lb_visit_marked<V: Value>(
    net: &Network,
    i: usize,
    z: &ArgVector<V>,
    external: V,
) -> Result<V> {
    let mut marked = z.clone();
    marked.ext = Some(ExternalMark {
        queue: i,
        front: external,
        gate: external,
    });
    lb_visit(net, i, &marked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    VisitBegin(usize),
    VisitEnd(usize),
    SwitchBegin(usize),
    SwitchEnd(usize),
    ServiceBegin(usize),
    ServiceEnd(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPgfValue<V> {
    pub value: V,
    pub boundary: Boundary,
}

pub fn boundary_pgf<V: Value>(
    net: &Network,
    boundary: Boundary,
    z: &ArgVector<V>,
) -> Result<BoundaryPgfValue<V>> {
    let value = match boundary {
        Boundary::VisitBegin(i) => lb_visit(net, i, z)?,
        Boundary::VisitEnd(i) => lb_visit(net, i, &visit_end_arg(net, i, z)?)?,
        Boundary::SwitchBegin(i) => {
            boundary_pgf(net, Boundary::VisitEnd(i), &switch_begin_arg(net, i, z))?.value
        }
        Boundary::SwitchEnd(i) => {
            let begin = boundary_pgf(net, Boundary::SwitchBegin(i), z)?.value;
            begin * lst(net.model().switchover(i), sigma(net, z))?
        }
        Boundary::ServiceBegin(i) => lb_service(net, i, z)?.value,
        Boundary::ServiceEnd(i) => lc_service(net, i, z)?.value,
    };
    Ok(BoundaryPgfValue { value, boundary })
}

/// `B~_i(Sigma_i(z)) / z_i` for gated queues, `B~_e(Sigma(z)) / z_e` for
/// exhaustive ones: the change from a service beginning to its completion.
fn service_ratio<V: Value>(net: &Network, i: usize, z: &ArgVector<V>) -> Result<V> {
    let m = net.model();
    let arg = if m.is_exhaustive(i) {
        sigma(net, z)
    } else {
        sigma_i(net, i, z)
    };
    Ok(lst(m.service(i), arg)? / z.z[i])
}

/// PGF at service beginnings of queue `i`, from the visit-boundary PGFs via
/// the visit/service balance relation.
pub fn lb_service<V: Value>(
    net: &Network,
    i: usize,
    z: &ArgVector<V>,
) -> Result<BoundaryPgfValue<V>> {
    let visits_per_service = net.gamma(i) * net.mean_cycle();
    if !(visits_per_service > 0.0) {
        return Err(AnalysisError::DeadQueue { queue: i + 1 });
    }
    let begin = lb_visit(net, i, z)?;
    let end = boundary_pgf(net, Boundary::VisitEnd(i), z)?.value;
    let den = (service_ratio(net, i, z)? * p_i(net, i, z)).one_minus() * visits_per_service;
    let value = (begin - end).removable_div(den, net.tol().removable_tol)?;
    Ok(BoundaryPgfValue {
        value,
        boundary: Boundary::ServiceBegin(i),
    })
}

/// PGF right after a service completion at queue `i`, before the served
/// customer is routed.
pub fn lc_service<V: Value>(
    net: &Network,
    i: usize,
    z: &ArgVector<V>,
) -> Result<BoundaryPgfValue<V>> {
    let begin = lb_service(net, i, z)?.value;
    Ok(BoundaryPgfValue {
        value: begin * service_ratio(net, i, z)?,
        boundary: Boundary::ServiceEnd(i),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Period {
    Visit(usize),
    Switch(usize),
}

/// Joint PGF of the queue lengths at an arbitrary moment during `period`,
/// optionally jointly with the LST (argument `omega`) of the residual part of
/// the ongoing service or switch-over.
pub fn period_pgf<V: Value>(
    net: &Network,
    period: Period,
    z: &ArgVector<V>,
    omega: Option<V>,
) -> Result<V> {
    let m = net.model();
    let residual = omega.unwrap_or_else(|| z.gate.lift(0.0));
    match period {
        Period::Visit(j) => {
            let arrivals = if m.is_exhaustive(j) {
                sigma(net, z)
            } else {
                sigma_i(net, j, z)
            };
            Ok(lb_service(net, j, z)?.value * past_residual(m.service(j), arrivals, residual)?)
        }
        Period::Switch(j) => {
            let begin = boundary_pgf(net, Boundary::SwitchBegin(j), z)?.value;
            Ok(begin * past_residual(m.switchover(j), sigma(net, z), residual)?)
        }
    }
}

/// Time-stationary weight of each period: `E[V_j]/E[C] = rho_j` and
/// `r_j/E[C]`. Zero-weight periods are omitted.
pub fn period_weights(net: &Network) -> Vec<(Period, f64)> {
    let m = net.model();
    let t = net.traffic();
    let mut w = Vec::with_capacity(2 * m.n());
    for j in 0..m.n() {
        if t.rho_i[j] > 0.0 {
            w.push((Period::Visit(j), t.rho_i[j]));
        }
        let r = m.switchover(j).mean();
        if r > 0.0 {
            w.push((Period::Switch(j), r / t.mean_cycle));
        }
    }
    w
}

/// Joint queue-length PGF at an arbitrary moment.
pub fn arbitrary_epoch_pgf<V: Value>(net: &Network, z: &ArgVector<V>) -> Result<V> {
    net.require_analyzable()?;
    let mut acc = z.gate.lift(0.0);
    for (period, w) in period_weights(net) {
        acc = acc + period_pgf(net, period, z, None)? * w;
    }
    Ok(acc)
}
