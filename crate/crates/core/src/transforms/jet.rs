//! Truncated Taylor series in a single variable.
//!
//! A [`Jet`] of order `m` stores the plain Taylor coefficients `c[0..=m]` of a
//! function at the expansion point (not scaled by `k!`). Binary operations on
//! jets of different orders produce a jet of the smaller order.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Largest supported jet length (order + 1).
pub const MAX_LEN: usize = 16;

#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    c: [f64; MAX_LEN],
    len: usize,
}

impl Jet {
    /// The constant function `value` carried at the given order.
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order < MAX_LEN, "jet order {order} exceeds {}", MAX_LEN - 1);
        let mut c = [0.0; MAX_LEN];
        c[0] = value;
        Jet { c, len: order + 1 }
    }

    /// The identity function expanded at `at`: `at + t`.
    pub fn variable(at: f64, order: usize) -> Self {
        let mut j = Jet::constant(at, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn from_coeffs(coeffs: &[f64]) -> Self {
        assert!(!coeffs.is_empty() && coeffs.len() <= MAX_LEN);
        let mut c = [0.0; MAX_LEN];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Jet { c, len: coeffs.len() }
    }

    pub fn order(&self) -> usize {
        self.len - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.len]
    }

    pub fn coeff(&self, k: usize) -> f64 {
        if k < self.len {
            self.c[k]
        } else {
            0.0
        }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `k`-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|x| x as f64).product();
        self.coeff(k) * fact
    }

    pub fn truncate(&self, order: usize) -> Self {
        let mut j = *self;
        let len = (order + 1).min(self.len);
        for x in &mut j.c[len..] {
            *x = 0.0;
        }
        j.len = len;
        j
    }

    /// Number of leading coefficients with magnitude at most `tol`.
    pub fn valuation(&self, tol: f64) -> usize {
        self.coeffs().iter().take_while(|x| x.abs() <= tol).count()
    }

    /// Drops the first `k` coefficients (division by `t^k` when they vanish).
    fn shift_down(&self, k: usize) -> Self {
        let len = self.len - k;
        let mut c = [0.0; MAX_LEN];
        c[..len].copy_from_slice(&self.c[k..self.len]);
        Jet { c, len }
    }

    fn zip(self, other: Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let len = self.len.min(other.len);
        let mut c = [0.0; MAX_LEN];
        for k in 0..len {
            c[k] = f(self.c[k], other.c[k]);
        }
        Jet { c, len }
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Jet {
        let mut c = [0.0; MAX_LEN];
        for k in 0..self.len {
            c[k] = f(self.c[k]);
        }
        Jet { c, len: self.len }
    }

    pub fn recip(self) -> Jet {
        Jet::constant(1.0, self.order()) / self
    }

    pub fn exp(self) -> Jet {
        let mut c = [0.0; MAX_LEN];
        c[0] = self.c[0].exp();
        for k in 1..self.len {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.c[j] * c[k - j];
            }
            c[k] = s / k as f64;
        }
        Jet { c, len: self.len }
    }

    pub fn ln(self) -> Jet {
        let x0 = self.c[0];
        let mut c = [0.0; MAX_LEN];
        c[0] = x0.ln();
        for k in 1..self.len {
            let mut s = 0.0;
            for j in 1..k {
                s += j as f64 * c[j] * self.c[k - j];
            }
            c[k] = (self.c[k] - s / k as f64) / x0;
        }
        Jet { c, len: self.len }
    }

    pub fn powf(self, p: f64) -> Jet {
        (self.ln() * p).exp()
    }

    pub fn powi(self, n: u32) -> Jet {
        let mut base = self;
        let mut acc = Jet::constant(1.0, self.order());
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }

    /// Series division with cancellation of common leading zeros.
    ///
    /// Leading coefficients with magnitude at most `tol` count as zeros. When
    /// the denominator has `v` of them, the numerator must have at least `v`
    /// too; both are shifted down by `v` and the quotient loses `v` orders.
    pub fn removable_div(self, den: Jet, tol: f64) -> Result<Jet, JetDivError> {
        let len = self.len.min(den.len);
        let num = self.truncate(len - 1);
        let den = den.truncate(len - 1);
        let vd = den.valuation(tol);
        if vd == 0 {
            return Ok(num / den);
        }
        if vd >= len {
            return Err(JetDivError::ZeroDenominator);
        }
        let vn = num.valuation(tol);
        if vn < vd {
            return Err(JetDivError::Pole {
                numerator: vn,
                denominator: vd,
            });
        }
        Ok(num.shift_down(vd) / den.shift_down(vd))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetDivError {
    ZeroDenominator,
    Pole { numerator: usize, denominator: usize },
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet{:?}", self.coeffs())
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let len = self.len.min(rhs.len);
        let mut c = [0.0; MAX_LEN];
        for k in 0..len {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.c[j] * rhs.c[k - j];
            }
            c[k] = s;
        }
        Jet { c, len }
    }
}

/// Ordinary series division; the denominator's constant term must be nonzero.
impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let len = self.len.min(rhs.len);
        let d0 = rhs.c[0];
        let mut c = [0.0; MAX_LEN];
        for k in 0..len {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= rhs.c[j] * c[k - j];
            }
            c[k] = s / d0;
        }
        Jet { c, len }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map(|x| -x)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.map(|x| x * rhs)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.map(|x| x / rhs)
    }
}
