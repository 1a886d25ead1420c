//! Laplace-Stieltjes transforms of the distribution families, the joint
//! past/residual transform, and moment extraction from jets.

mod jet;
mod value;

pub use jet::{Jet, JetDivError, MAX_LEN};
pub use value::Value;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::DistributionSpec;

/// Leading coefficients at or below this magnitude are treated as zero when
/// resolving 0/0 quotients.
pub const REMOVABLE_TOL: f64 = 1e-12;

/// Transform arguments this far below zero are accepted as round-off.
const NEGATIVE_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("transform argument {0} is negative")]
    NegativeArgument(f64),
    #[error("denominator vanishes faster than numerator (true pole)")]
    PoleDetected,
    #[error("0/0 on the scalar path; evaluate with jets instead")]
    IndeterminateScalar,
    #[error("jet is not a normalized transform (constant term {0})")]
    NotNormalized(f64),
    #[error("past/residual transform is undefined for a zero-mean distribution")]
    ZeroMeanDistribution,
    #[error("jet of order {have} cannot give moment {need}")]
    InsufficientOrder { need: usize, have: usize },
}

/// LST `E[exp(-s X)]` of `dist`.
pub fn lst<V: Value>(dist: &DistributionSpec, s: V) -> Result<V, TransformError> {
    let s0 = s.value();
    if s0 < -NEGATIVE_SLACK || s0.is_nan() {
        return Err(TransformError::NegativeArgument(s0));
    }
    Ok(lst_unchecked(dist, s))
}

fn lst_unchecked<V: Value>(dist: &DistributionSpec, s: V) -> V {
    match dist {
        DistributionSpec::Deterministic { value } => {
            if *value == 0.0 {
                s.lift(1.0)
            } else {
                (s * -*value).exp()
            }
        }
        DistributionSpec::Exponential { rate } => exp_lst(*rate, s),
        DistributionSpec::Erlang { phases, rate } => exp_lst(*rate, s).powi(*phases),
        DistributionSpec::HyperExponential { weights, rates } => weights
            .iter()
            .zip(rates)
            .fold(s.lift(0.0), |acc, (w, r)| acc + exp_lst(*r, s) * *w),
        DistributionSpec::Gamma { shape, rate } => (s / *rate + 1.0).powf(-*shape),
    }
}

fn exp_lst<V: Value>(rate: f64, s: V) -> V {
    let one = s.lift(1.0);
    one / (s / rate + 1.0)
}

/// Joint transform of the elapsed and remaining parts of an interval of
/// length `X` observed at a uniformly random point:
/// `(X~(wp) - X~(wr)) / ((wr - wp) E[X])`.
pub fn past_residual<V: Value>(
    dist: &DistributionSpec,
    wp: V,
    wr: V,
) -> Result<V, TransformError> {
    let mean = dist.mean();
    if mean <= 0.0 {
        return Err(TransformError::ZeroMeanDistribution);
    }
    let num = lst(dist, wp)? - lst(dist, wr)?;
    let den = (wr - wp) * mean;
    if let (Some(p), Some(r)) = (wp.as_scalar(), wr.as_scalar()) {
        if (r - p).abs() <= REMOVABLE_TOL * p.abs().max(1.0) {
            // Coincident arguments: the quotient tends to -X~'(w) / E[X].
            let j = lst(dist, Jet::variable(0.5 * (p + r), 1))?;
            return Ok(wp.lift(-j.coeff(1) / mean));
        }
    }
    num.removable_div(den, REMOVABLE_TOL)
}

/// Raw moments and derived spread statistics recovered from an LST jet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// `raw[k-1] = E[X^k]` for `k = 1..=upto`.
    pub raw: Vec<f64>,
    pub variance: Option<f64>,
    pub sd: Option<f64>,
}

impl Moments {
    pub fn mean(&self) -> f64 {
        self.raw[0]
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        self.raw.get(k.checked_sub(1)?).copied()
    }
}

/// `E[X^k] = (-1)^k k! c_k` for the LST jet expanded at zero.
pub fn moments_from_jet(j: &Jet, upto: usize) -> Result<Moments, TransformError> {
    if (j.value() - 1.0).abs() > 1e-9 {
        return Err(TransformError::NotNormalized(j.value()));
    }
    if upto > j.order() {
        return Err(TransformError::InsufficientOrder {
            need: upto,
            have: j.order(),
        });
    }
    let raw: Vec<f64> = (1..=upto)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * j.derivative(k)
        })
        .collect();
    let (variance, sd) = if upto >= 2 {
        let v = raw[1] - raw[0] * raw[0];
        (Some(v), Some(v.max(0.0).sqrt()))
    } else {
        (None, None)
    };
    Ok(Moments { raw, variance, sd })
}
