//! Branching kernels: transforms of a customer's service plus the service of
//! all descendants that are served before the server next reaches a given
//! queue, together with the argument vectors assembled from them.

use crate::error::{AnalysisError, Result};
use crate::model::DistributionSpec;
use crate::network::{Network, Tolerances, POLISH_FLOOR};
use crate::pgf::{ArgVector, Slot};
use crate::transforms::{lst, Value};

/// Joint transform of an exhaustive busy period and the number of services
/// in it, solved from `x = z * B_exh(w + lambda (1 - x))` by fixed-point
/// iteration on the full value (jets included).
///
/// `B_exh` is the geometric sum (parameter `p_self`) of service times.
pub fn busy_period<V: Value>(
    service: &DistributionSpec,
    lambda: f64,
    p_self: f64,
    z: V,
    omega: V,
    tol: &Tolerances,
) -> Result<V> {
    let no_conv = |iterations| AnalysisError::NoConvergence {
        what: "busy period",
        iterations,
    };
    if p_self >= 1.0 || lambda * service.mean() / (1.0 - p_self) >= 1.0 {
        return Err(no_conv(0));
    }
    let extended = |s: V| -> Result<V> {
        let b = lst(service, s)?;
        Ok(b * (1.0 - p_self) / (b * -p_self + 1.0))
    };
    // Once within `busy_tol` the iteration keeps going while the steps still
    // shrink: the visit-begin product amplifies any residual error over many
    // cycles and would otherwise stall just above its own tolerance.
    let mut x = z.lift(0.0);
    let mut last = f64::INFINITY;
    for it in 0..tol.busy_max_iter {
        let next = z * extended(omega + x.one_minus() * lambda)?;
        let step = next.distance(&x);
        x = next;
        if step < tol.busy_tol * POLISH_FLOOR || (last < tol.busy_tol && step >= last) {
            log::trace!("busy period converged after {it} iterations");
            return Ok(x);
        }
        last = step;
    }
    if last < tol.busy_tol {
        return Ok(x);
    }
    Err(no_conv(tol.busy_max_iter))
}

/// Kernels `B~_{k,i}`, `P~_{k,i}` (k = 0..=N) and `R~_{k,i}` (k = 0..N) for one
/// target queue `i`; entry `k` belongs to queue `i - k`.
#[derive(Debug, Clone)]
pub struct KernelTable<V> {
    pub target: usize,
    pub omega: V,
    pub btilde: Vec<V>,
    pub ptilde: Vec<V>,
    pub rtilde: Vec<V>,
}

pub fn kernel_table<V: Value>(net: &Network, i: usize, omega: V) -> Result<KernelTable<V>> {
    let model = net.model();
    let n = model.n();
    let mut btilde: Vec<V> = Vec::with_capacity(n + 1);
    let mut ptilde = Vec::with_capacity(n + 1);
    let mut rtilde = Vec::with_capacity(n);
    for k in 0..=n {
        let q = model.back(i, k);
        let mut arg = omega;
        for (j, b) in btilde.iter().enumerate() {
            arg = arg + b.one_minus() * model.lambda(model.back(i, j));
        }
        let (p, b) = if model.is_exhaustive(q) {
            let p_self = model.p(q, q);
            let mut p = omega.lift(1.0);
            for (j, b) in btilde.iter().enumerate() {
                let dest = model.back(i, j);
                // at k = N the chain wraps onto q itself; self-routing is
                // already inside the busy period
                if dest != q {
                    p = p - b.one_minus() * (model.p(q, dest) / (1.0 - p_self));
                }
            }
            let b = busy_period(model.service(q), model.lambda(q), p_self, p, arg, net.tol())?;
            (p, b)
        } else {
            let mut p = omega.lift(1.0);
            for (j, b) in btilde.iter().enumerate() {
                p = p - b.one_minus() * model.p(q, model.back(i, j));
            }
            (p, lst(model.service(q), arg)? * p)
        };
        if k < n {
            rtilde.push(lst(model.switchover(q), arg)?);
        }
        ptilde.push(p);
        btilde.push(b);
    }
    Ok(KernelTable {
        target: i,
        omega,
        btilde,
        ptilde,
        rtilde,
    })
}

/// Elementary argument vectors, each with one non-unit entry, for a target
/// queue `i` and its predecessor `i - 1`, plus the composites built from them.
#[derive(Debug, Clone)]
pub struct UVectors<V> {
    n: usize,
    target: usize,
    target_exhaustive: bool,
    one: V,
    own: Vec<(Slot, V)>,
    prev: Vec<(Slot, V)>,
    exh0: (Slot, V),
}

fn elementary<V: Value>(net: &Network, table: &KernelTable<V>) -> Vec<(Slot, V)> {
    let n = net.n();
    (0..=n)
        .map(|k| {
            if k < n {
                (Slot::Queue(net.model().back(table.target, k)), table.btilde[k])
            } else {
                (Slot::Gate, table.btilde[0])
            }
        })
        .collect()
}

/// `own` must be the table for target `i`, `prev` the one for `i - 1`.
pub fn u_vectors<V: Value>(
    net: &Network,
    own: &KernelTable<V>,
    prev: &KernelTable<V>,
) -> Result<UVectors<V>> {
    let model = net.model();
    let i = own.target;
    assert_eq!(prev.target, model.back(i, 1), "predecessor table mismatch");
    let b_i = lst(model.service(i), own.omega)?;
    Ok(UVectors {
        n: net.n(),
        target: i,
        target_exhaustive: model.is_exhaustive(i),
        one: own.omega.lift(1.0),
        own: elementary(net, own),
        prev: elementary(net, prev),
        exh0: (Slot::Queue(i), b_i),
    })
}

impl<V: Value> UVectors<V> {
    fn vector(&self, parts: &[(Slot, V)]) -> ArgVector<V> {
        let mut v = ArgVector::ones(self.n, self.one);
        for (slot, val) in parts {
            v.scale(*slot, *val);
        }
        v
    }

    pub fn target(&self) -> usize {
        self.target
    }

    /// `u_{k,i}`, k = 0..=N.
    pub fn own(&self, k: usize) -> ArgVector<V> {
        self.vector(&self.own[k..=k])
    }

    /// `u_{k,i-1}`, k = 0..=N.
    pub fn prev(&self, k: usize) -> ArgVector<V> {
        self.vector(&self.prev[k..=k])
    }

    /// Plain service transform of the target at the target's position.
    pub fn exh0(&self) -> ArgVector<V> {
        self.vector(std::slice::from_ref(&self.exh0))
    }

    /// Product of `u_{k,i-1}` over k = 0..N; argument of the cycle-time transform.
    pub fn cycle(&self) -> ArgVector<V> {
        self.vector(&self.prev[..self.n])
    }

    /// Target factor: `u_{0,i}` for gated targets, the plain-service vector
    /// for exhaustive ones.
    fn base(&self) -> (Slot, V) {
        if self.target_exhaustive {
            self.exh0
        } else {
            self.own[0]
        }
    }

    /// `uG_{k,i}`: the target factor times `u_{j,i-1}` for j < k; at k = N the
    /// target factor moves to the gate position (`u_{N,i}`).
    pub fn gate_composite(&self, k: usize) -> ArgVector<V> {
        assert!(k <= self.n);
        let mut parts: Vec<(Slot, V)> = self.prev[..k].to_vec();
        if k == self.n {
            debug_assert!(!self.target_exhaustive, "k = N only arises for gated targets");
            parts.push(self.own[self.n]);
        } else {
            parts.push(self.base());
        }
        self.vector(&parts)
    }
}
