use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::jet::{Jet, JetDivError};
use super::TransformError;

/// Numeric carrier for transform evaluation: either a plain real (`f64`) or
/// a truncated Taylor expansion in the transform argument ([`Jet`]).
///
/// Every formula in the crate is written once against this trait.
pub trait Value:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + Send
    + Sync
{
    /// A constant with the same shape (order) as `self`.
    fn lift(&self, c: f64) -> Self;
    /// Constant term.
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn powi(self, n: u32) -> Self;
    /// Division that resolves removable singularities (jets) or reports them
    /// (scalars).
    fn removable_div(self, den: Self, tol: f64) -> Result<Self, TransformError>;
    /// Sup-norm distance between two values.
    fn distance(&self, other: &Self) -> f64;
    fn as_scalar(&self) -> Option<f64>;

    fn one_minus(self) -> Self {
        self.lift(1.0) - self
    }

    fn distance_to(&self, c: f64) -> f64 {
        self.distance(&self.lift(c))
    }
}

impl Value for f64 {
    fn lift(&self, c: f64) -> Self {
        c
    }

    fn value(&self) -> f64 {
        *self
    }

    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn ln(self) -> Self {
        f64::ln(self)
    }

    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }

    fn powi(self, n: u32) -> Self {
        f64::powi(self, n as i32)
    }

    fn removable_div(self, den: Self, tol: f64) -> Result<Self, TransformError> {
        if den.abs() > tol {
            Ok(self / den)
        } else if self.abs() <= tol {
            Err(TransformError::IndeterminateScalar)
        } else {
            Err(TransformError::PoleDetected)
        }
    }

    fn distance(&self, other: &Self) -> f64 {
        (self - other).abs()
    }

    fn as_scalar(&self) -> Option<f64> {
        Some(*self)
    }
}

impl Value for Jet {
    fn lift(&self, c: f64) -> Self {
        Jet::constant(c, self.order())
    }

    fn value(&self) -> f64 {
        Jet::value(self)
    }

    fn exp(self) -> Self {
        Jet::exp(self)
    }

    fn ln(self) -> Self {
        Jet::ln(self)
    }

    fn powf(self, p: f64) -> Self {
        Jet::powf(self, p)
    }

    fn powi(self, n: u32) -> Self {
        Jet::powi(self, n)
    }

    fn removable_div(self, den: Self, tol: f64) -> Result<Self, TransformError> {
        Jet::removable_div(self, den, tol).map_err(|e| match e {
            JetDivError::ZeroDenominator | JetDivError::Pole { .. } => TransformError::PoleDetected,
        })
    }

    fn distance(&self, other: &Self) -> f64 {
        let d = *self - *other;
        d.coeffs().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn as_scalar(&self) -> Option<f64> {
        None
    }
}
