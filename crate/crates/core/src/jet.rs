//! Truncated second-order Taylor carrier (hyper-dual style) over up to
//! [`MAX_VARS`] independent variables.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{Float, One, Zero};

use crate::scalar::Scalar;

/// Largest chart dimension the jet carrier supports.
pub const MAX_VARS: usize = 12;

/// Value, gradient and Hessian of a scalar field at a point.
///
/// Entries beyond the chart dimension stay zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2<T> {
    pub value: T,
    pub grad: [T; MAX_VARS],
    pub hess: [[T; MAX_VARS]; MAX_VARS],
}

impl<T: Float> Jet2<T> {
    pub fn constant(value: T) -> Self {
        Jet2 {
            value,
            grad: [T::zero(); MAX_VARS],
            hess: [[T::zero(); MAX_VARS]; MAX_VARS],
        }
    }

    /// The coordinate function `x_index` seeded at `value`.
    pub fn variable(value: T, index: usize) -> Self {
        assert!(index < MAX_VARS, "jet variable index {index} exceeds MAX_VARS");
        let mut j = Self::constant(value);
        j.grad[index] = T::one();
        j
    }

    /// Seeds one jet per coordinate of `x`.
    pub fn seed(x: &[T]) -> Vec<Self> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| Self::variable(v, i))
            .collect()
    }

    /// Applies a univariate function given its value and first two derivatives
    /// at `self.value`.
    #[inline]
    fn chain(&self, f: T, df: T, d2f: T) -> Self {
        let mut out = Self::constant(f);
        for i in 0..MAX_VARS {
            out.grad[i] = df * self.grad[i];
        }
        for i in 0..MAX_VARS {
            let gi = self.grad[i];
            for k in 0..MAX_VARS {
                out.hess[i][k] = df * self.hess[i][k] + d2f * gi * self.grad[k];
            }
        }
        out
    }

    pub fn recip(&self) -> Self {
        let v = self.value;
        let r = T::one() / v;
        let two = T::one() + T::one();
        self.chain(r, -r * r, two * r * r * r)
    }
}

impl<T: Float> Zero for Jet2<T> {
    fn zero() -> Self {
        Self::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.value.is_zero()
            && self.grad.iter().all(|g| g.is_zero())
            && self.hess.iter().flatten().all(|h| h.is_zero())
    }
}

impl<T: Float> One for Jet2<T> {
    fn one() -> Self {
        Self::constant(T::one())
    }
}

impl<T: Float> Add for Jet2<T> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.value = self.value + rhs.value;
        for i in 0..MAX_VARS {
            self.grad[i] = self.grad[i] + rhs.grad[i];
            for k in 0..MAX_VARS {
                self.hess[i][k] = self.hess[i][k] + rhs.hess[i][k];
            }
        }
        self
    }
}

impl<T: Float> Sub for Jet2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<T: Float> Neg for Jet2<T> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.value = -self.value;
        for i in 0..MAX_VARS {
            self.grad[i] = -self.grad[i];
            for k in 0..MAX_VARS {
                self.hess[i][k] = -self.hess[i][k];
            }
        }
        self
    }
}

impl<T: Float> Mul for Jet2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self.value, rhs.value);
        let mut out = Self::constant(a * b);
        for i in 0..MAX_VARS {
            out.grad[i] = a * rhs.grad[i] + b * self.grad[i];
        }
        for i in 0..MAX_VARS {
            for k in 0..MAX_VARS {
                out.hess[i][k] = a * rhs.hess[i][k]
                    + b * self.hess[i][k]
                    + self.grad[i] * rhs.grad[k]
                    + rhs.grad[i] * self.grad[k];
            }
        }
        out
    }
}

impl<T: Float> Div for Jet2<T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<T> Scalar for Jet2<T>
where
    T: Float + std::fmt::Debug + Send + Sync + 'static,
{
    fn from_f64(v: f64) -> Self {
        Self::constant(T::from(v).expect("f64 converts to the jet base type"))
    }

    fn value(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::NAN)
    }

    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        let two = T::one() + T::one();
        let d1 = T::one() / (two * s);
        let d2 = -d1 / (two * self.value);
        self.chain(s, d1, d2)
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    fn ln(self) -> Self {
        let v = self.value;
        self.chain(v.ln(), T::one() / v, -T::one() / (v * v))
    }

    fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            1 => self,
            _ => {
                let v = self.value;
                let nf = T::from(n).unwrap();
                let f = v.powi(n);
                let d1 = nf * v.powi(n - 1);
                let d2 = nf * (nf - T::one()) * v.powi(n - 2);
                self.chain(f, d1, d2)
            }
        }
    }

    fn powf(self, p: f64) -> Self {
        let v = self.value;
        let pf = T::from(p).unwrap();
        let f = v.powf(pf);
        let d1 = pf * v.powf(pf - T::one());
        let d2 = pf * (pf - T::one()) * v.powf(pf - T::one() - T::one());
        self.chain(f, d1, d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type J = Jet2<f64>;

    #[test]
    fn product_rule_polynomial() {
        // f = x1^2 x2 at (2,3)
        let v = J::seed(&[2.0, 3.0]);
        let f = v[0] * v[0] * v[1];
        assert_eq!(f.value, 12.0);
        assert_eq!(&f.grad[..2], &[12.0, 4.0]);
        assert_eq!(f.hess[0][0], 6.0);
        assert_eq!(f.hess[0][1], 4.0);
        assert_eq!(f.hess[1][0], 4.0);
        assert_eq!(f.hess[1][1], 0.0);
    }

    #[test]
    fn reciprocal_rational() {
        // 1/(1+x^2) at x=1: value 1/2, f' = -1/2, f'' = 1/2
        let x = J::variable(1.0, 0);
        let f = (J::one() + x * x).recip();
        assert!((f.value - 0.5).abs() < 1e-15);
        assert!((f.grad[0] + 0.5).abs() < 1e-15);
        assert!((f.hess[0][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn transcendental_chain() {
        let x = J::variable(0.7, 0);
        let f = Scalar::sin(x).exp();
        let e = 0.7f64.sin().exp();
        let c = 0.7f64.cos();
        assert!((f.grad[0] - e * c).abs() < 1e-14);
        assert!((f.hess[0][0] - e * (c * c - 0.7f64.sin())).abs() < 1e-14);
    }
}
