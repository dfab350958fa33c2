//! Forward-mode dual numbers carrying a value and its gradient in two
//! variables.
//!
//! [`Scalar`] abstracts over `f64` and [`DualScalar`] so that map formulas
//! are written once and differentiated by re-evaluation.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value together with its partial derivatives with respect to `x1` and `x2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualScalar {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl DualScalar {
    pub const fn new(value: f64, d1: f64, d2: f64) -> Self {
        Self { value, d1, d2 }
    }

    pub const fn constant(value: f64) -> Self {
        Self::new(value, 0.0, 0.0)
    }

    /// Seeds the independent variables of a point: `x1` has gradient (1,0)
    /// and `x2` has gradient (0,1).
    pub fn variables(x: [f64; 2]) -> [Self; 2] {
        [Self::new(x[0], 1.0, 0.0), Self::new(x[1], 0.0, 1.0)]
    }

    pub fn grad(&self) -> [f64; 2] {
        [self.d1, self.d2]
    }

    #[inline]
    fn chain(self, value: f64, slope: f64) -> Self {
        Self::new(value, slope * self.d1, slope * self.d2)
    }
}

impl Add for DualScalar {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.value + rhs.value, self.d1 + rhs.d1, self.d2 + rhs.d2)
    }
}

impl Sub for DualScalar {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.value - rhs.value, self.d1 - rhs.d1, self.d2 - rhs.d2)
    }
}

impl Mul for DualScalar {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.value * rhs.value,
            self.d1 * rhs.value + self.value * rhs.d1,
            self.d2 * rhs.value + self.value * rhs.d2,
        )
    }
}

impl Div for DualScalar {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.value;
        let q = self.value * inv;
        Self::new(q, (self.d1 - q * rhs.d1) * inv, (self.d2 - q * rhs.d2) * inv)
    }
}

impl Neg for DualScalar {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.value, -self.d1, -self.d2)
    }
}

/// Arithmetic needed to evaluate linear-plus-trigonometric torus maps.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn value(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;

    fn scale(self, s: f64) -> Self {
        self * Self::from_f64(s)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl Scalar for DualScalar {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }
    #[inline]
    fn value(self) -> f64 {
        self.value
    }
    #[inline]
    fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c)
    }
    #[inline]
    fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s)
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        Self::new(self.value * s, self.d1 * s, self.d2 * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn poly<S: Scalar>(x: [S; 2]) -> S {
        x[0] * x[0] * x[1] + (x[0].scale(2.0 * PI)).sin()
    }

    #[test]
    fn derivatives_of_polynomial_plus_sine_are_exact() {
        for i in 0..10 {
            let x = [0.07 * i as f64 - 0.2, 0.31 - 0.05 * i as f64];
            let d = poly(DualScalar::variables(x));
            assert_eq!(d.value, poly(x));
            let d1 = 2.0 * x[0] * x[1] + 2.0 * PI * (2.0 * PI * x[0]).cos();
            let d2 = x[0] * x[0];
            assert!((d.d1 - d1).abs() <= 4.0 * f64::EPSILON * d1.abs().max(1.0));
            assert!((d.d2 - d2).abs() <= 4.0 * f64::EPSILON * d2.abs().max(1.0));
        }
    }

    #[test]
    fn quotient_rule() {
        let [x, y] = DualScalar::variables([0.3, 1.7]);
        let q = x / y;
        assert!((q.d1 - 1.0 / 1.7).abs() < 1e-15);
        assert!((q.d2 + 0.3 / (1.7 * 1.7)).abs() < 1e-15);
    }

    #[test]
    fn exp_and_cos_chain() {
        let [x, _] = DualScalar::variables([0.4, 0.0]);
        let e = (x.cos()).exp();
        let expected = -(0.4f64).sin() * (0.4f64).cos().exp();
        assert!((e.d1 - expected).abs() < 1e-15);
        assert_eq!(e.d2, 0.0);
    }
}
