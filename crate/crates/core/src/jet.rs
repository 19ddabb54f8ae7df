//! Truncated bivariate Taylor polynomials ("jets").
//!
//! A jet of order `n` stores the coefficients `c[i][j]` of `y1^i y2^j` for
//! `i + j <= n`. Arithmetic truncates at the jet's order, so evaluating an
//! analytic expression on jets yields its exact Taylor coefficients up to
//! round-off, without finite-difference noise.

use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Scalar;

/// Largest supported total order.
pub const MAX_ORDER: usize = 8;

const W: usize = MAX_ORDER + 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2<T> {
    order: usize,
    c: [[T; W]; W],
}

impl<T: Scalar> Jet2<T> {
    pub fn constant(order: usize, v: T) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut c = [[T::zero(); W]; W];
        c[0][0] = v;
        Self { order, c }
    }

    /// `v0 + d[0] y1 + d[1] y2`.
    pub fn linear(order: usize, v0: T, d: [T; 2]) -> Self {
        let mut j = Self::constant(order, v0);
        if order >= 1 {
            j.c[1][0] = d[0];
            j.c[0][1] = d[1];
        }
        j
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    /// Coefficient of `y1^i y2^j` (zero beyond the order).
    #[inline]
    pub fn coeff(&self, i: usize, j: usize) -> T {
        if i + j <= self.order {
            self.c[i][j]
        } else {
            T::zero()
        }
    }

    #[inline]
    pub fn value(&self) -> T {
        self.c[0][0]
    }

    /// `d^(i+j) f / dy1^i dy2^j` at the origin.
    pub fn derivative(&self, i: usize, j: usize) -> T {
        self.coeff(i, j) * factorial::<T>(i) * factorial::<T>(j)
    }

    pub fn scale(mut self, s: T) -> Self {
        self.for_each(|x| *x = *x * s);
        self
    }

    pub fn add_const(mut self, s: T) -> Self {
        self.c[0][0] = self.c[0][0] + s;
        self
    }

    fn for_each(&mut self, mut f: impl FnMut(&mut T)) {
        for i in 0..=self.order {
            for j in 0..=self.order - i {
                f(&mut self.c[i][j]);
            }
        }
    }

    /// `f(self)` where `taylor[n] = f^(n)(c0) / n!` at the constant term `c0`.
    pub fn compose(&self, taylor: &[T]) -> Self {
        let mut h = *self;
        h.c[0][0] = T::zero();
        let n = taylor.len().min(self.order + 1);
        let mut r = Self::constant(self.order, taylor[n - 1]);
        for k in (0..n - 1).rev() {
            r = (r * h).add_const(taylor[k]);
        }
        r
    }

    pub fn cos(&self) -> Self {
        let x0 = self.value();
        let (s, c) = x0.sin_cos();
        let cyc = [c, -s, -c, s];
        let coef: Vec<T> = (0..=self.order).map(|n| cyc[n % 4] / factorial::<T>(n)).collect();
        self.compose(&coef)
    }

    pub fn sin(&self) -> Self {
        let x0 = self.value();
        let (s, c) = x0.sin_cos();
        let cyc = [s, c, -s, -c];
        let coef: Vec<T> = (0..=self.order).map(|n| cyc[n % 4] / factorial::<T>(n)).collect();
        self.compose(&coef)
    }

    /// Square root; the constant term must be positive.
    pub fn sqrt(&self) -> Self {
        let x0 = self.value();
        let r0 = x0.sqrt();
        let half = T::lit(0.5);
        let mut coef = Vec::with_capacity(self.order + 1);
        let mut binom = T::one();
        let mut pow = T::one();
        for n in 0..=self.order {
            coef.push(r0 * binom / pow);
            let nn = T::from_usize(n).unwrap();
            binom = binom * (half - nn) / (nn + T::one());
            pow = pow * x0;
        }
        self.compose(&coef)
    }
}

fn factorial<T: Scalar>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::from_usize(k).unwrap())
}

impl<T: Scalar> Add for Jet2<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        let o = self.order.min(rhs.order);
        self.order = o;
        for i in 0..=o {
            for j in 0..=o - i {
                self.c[i][j] = self.c[i][j] + rhs.c[i][j];
            }
        }
        self
    }
}

impl<T: Scalar> Neg for Jet2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Sub for Jet2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<T: Scalar> Mul for Jet2<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let o = self.order.min(rhs.order);
        let mut out = Self::constant(o, T::zero());
        for i1 in 0..=o {
            for j1 in 0..=o - i1 {
                let x = self.c[i1][j1];
                if x == T::zero() {
                    continue;
                }
                for i2 in 0..=o - i1 - j1 {
                    for j2 in 0..=o - i1 - j1 - i2 {
                        out.c[i1 + i2][j1 + j2] = out.c[i1 + i2][j1 + j2] + x * rhs.c[i2][j2];
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_linears() {
        let x = Jet2::linear(3, 1.0, [1.0, 0.0]);
        let y = Jet2::linear(3, 2.0, [0.0, 1.0]);
        let p = x * y;
        assert_eq!(p.coeff(0, 0), 2.0);
        assert_eq!(p.coeff(1, 0), 2.0);
        assert_eq!(p.coeff(0, 1), 1.0);
        assert_eq!(p.coeff(1, 1), 1.0);
        assert_eq!(p.coeff(2, 0), 0.0);
    }

    #[test]
    fn cos_series() {
        let x = Jet2::linear(6, 0.4_f64, [1.0, 0.0]);
        let c = x.cos();
        for n in 0..=6 {
            let want = match n % 4 {
                0 => 0.4f64.cos(),
                1 => -0.4f64.sin(),
                2 => -0.4f64.cos(),
                _ => 0.4f64.sin(),
            } / factorial::<f64>(n);
            assert!((c.coeff(n, 0) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let x = Jet2::linear(6, 2.5_f64, [0.3, -1.2]) * Jet2::linear(6, 1.0, [0.5, 0.1]);
        let r = x.sqrt();
        let back = r * r;
        for i in 0..=6 {
            for j in 0..=6 - i {
                assert!((back.coeff(i, j) - x.coeff(i, j)).abs() < 1e-13, "({i},{j})");
            }
        }
    }

    #[test]
    fn derivative_scaling() {
        let x = Jet2::linear(4, 0.0_f64, [1.0, 1.0]);
        let p = x * x * x;
        // (y1 + y2)^3: d^3/dy1^2 dy2 = 6
        assert!((p.derivative(2, 1) - 6.0).abs() < 1e-15);
    }
}
