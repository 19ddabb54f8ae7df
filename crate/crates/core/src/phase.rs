//! The dispersion relation
//!
//! ```text
//! gamma(k) = sqrt(omega^2 + 2 l1 (1 - cos k1) + 2 l2 (1 - cos k2))
//! ```
//!
//! its derivatives, and the polynomials `F` and `G` in `(a, b) = (cos k1, cos k2)`
//! whose zero sets carry the degenerate part of the phase.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::scalar::Scalar;

/// Coupling constants of the lattice. `omega == 0` is the massless (wave) case.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeParams<T> {
    omega: T,
    lambda1: T,
    lambda2: T,
}

impl<T: Scalar> LatticeParams<T> {
    pub fn new(omega: T, lambda1: T, lambda2: T) -> Result<Self> {
        let finite = omega.is_finite() && lambda1.is_finite() && lambda2.is_finite();
        if !finite {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        if omega < T::zero() {
            return Err(Error::InvalidParams(format!("omega = {omega} < 0")));
        }
        if lambda1 <= T::zero() || lambda2 <= T::zero() {
            return Err(Error::InvalidParams(format!(
                "couplings must be positive (lambda1 = {lambda1}, lambda2 = {lambda2})"
            )));
        }
        Ok(Self { omega, lambda1, lambda2 })
    }

    #[inline]
    pub fn omega(&self) -> T {
        self.omega
    }

    #[inline]
    pub fn lambda1(&self) -> T {
        self.lambda1
    }

    #[inline]
    pub fn lambda2(&self) -> T {
        self.lambda2
    }

    #[inline]
    pub fn lambda(&self, j: usize) -> T {
        if j == 0 {
            self.lambda1
        } else {
            self.lambda2
        }
    }

    #[inline]
    pub fn wave_mode(&self) -> bool {
        self.omega == T::zero()
    }

    /// Parameters with the two lattice directions exchanged.
    pub fn swapped(&self) -> Self {
        Self { omega: self.omega, lambda1: self.lambda2, lambda2: self.lambda1 }
    }

    /// `gamma(pi, pi)`, the largest frequency.
    pub fn gamma_max(&self) -> T {
        let four = T::lit(4.0);
        (self.omega * self.omega + four * (self.lambda1 + self.lambda2)).sqrt()
    }

    /// Largest stable leapfrog step, `2 / gamma_max`.
    pub fn leapfrog_limit(&self) -> T {
        T::lit(2.0) / self.gamma_max()
    }
}

/// A point of the Brillouin torus, components in `[-pi, pi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusPoint<T> {
    pub k1: T,
    pub k2: T,
}

impl<T: Scalar> TorusPoint<T> {
    /// Reduces both components into `[-pi, pi]`.
    pub fn new(k1: T, k2: T) -> Self {
        Self { k1: wrap_angle(k1), k2: wrap_angle(k2) }
    }

    pub fn ab(&self) -> ABPoint<T> {
        ABPoint { a: self.k1.cos(), b: self.k2.cos() }
    }

    pub fn to_array(self) -> [T; 2] {
        [self.k1, self.k2]
    }
}

fn wrap_angle<T: Scalar>(x: T) -> T {
    let pi = T::PI();
    if x >= -pi && x <= pi {
        return x;
    }
    let tau = pi + pi;
    let mut y = x - tau * ((x + pi) / tau).floor();
    if y > pi {
        y = y - tau;
    }
    y
}

/// The image `(a, b) = (cos k1, cos k2)` of a torus point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ABPoint<T> {
    pub a: T,
    pub b: T,
}

impl<T: Scalar> ABPoint<T> {
    pub fn new(a: T, b: T) -> Self {
        Self { a, b }
    }

    pub fn swapped(self) -> Self {
        Self { a: self.b, b: self.a }
    }
}

/// Symmetric 2x2 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix2<T> {
    pub m11: T,
    pub m12: T,
    pub m22: T,
}

impl<T: Scalar> SymMatrix2<T> {
    pub fn det(&self) -> T {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn apply(&self, v: [T; 2]) -> [T; 2] {
        [self.m11 * v[0] + self.m12 * v[1], self.m12 * v[0] + self.m22 * v[1]]
    }

    pub fn max_abs(&self) -> T {
        self.m11.abs().max(self.m12.abs()).max(self.m22.abs())
    }

    /// Eigenpairs `(lo, hi)` ordered by value; vectors are unit length and
    /// `v_lo = (-v_hi[1], v_hi[0])`.
    pub fn eigen(&self) -> ([T; 2], [[T; 2]; 2]) {
        let half = T::lit(0.5);
        let mean = half * (self.m11 + self.m22);
        let diff = half * (self.m11 - self.m22);
        let rad = diff.hypot(self.m12);
        let theta = half * (self.m12 + self.m12).atan2(self.m11 - self.m22);
        let hi = [theta.cos(), theta.sin()];
        let lo = [-hi[1], hi[0]];
        ([mean - rad, mean + rad], [lo, hi])
    }
}

#[inline]
fn gamma_sq_ab<T: Scalar>(p: &LatticeParams<T>, a: T, b: T) -> T {
    let two = T::lit(2.0);
    p.omega * p.omega + two * p.lambda1 * (T::one() - a) + two * p.lambda2 * (T::one() - b)
}

/// `gamma^2` as a function of `(a, b)`.
pub fn gamma_sq<T: Scalar>(p: &LatticeParams<T>, ab: ABPoint<T>) -> T {
    gamma_sq_ab(p, ab.a, ab.b)
}

pub fn gamma<T: Scalar>(p: &LatticeParams<T>, k: TorusPoint<T>) -> T {
    gamma_sq_ab(p, k.k1.cos(), k.k2.cos()).max(T::zero()).sqrt()
}

/// Group velocity `(l1 sin k1, l2 sin k2) / gamma`.
pub fn grad_gamma<T: Scalar>(p: &LatticeParams<T>, k: TorusPoint<T>) -> Result<[T; 2]> {
    let g = gamma(p, k);
    if g == T::zero() {
        return Err(Error::SingularOrigin);
    }
    Ok([p.lambda1 * k.k1.sin() / g, p.lambda2 * k.k2.sin() / g])
}

pub fn hessian_gamma<T: Scalar>(p: &LatticeParams<T>, k: TorusPoint<T>) -> Result<SymMatrix2<T>> {
    let (s1, a) = k.k1.sin_cos();
    let (s2, b) = k.k2.sin_cos();
    let g2 = gamma_sq_ab(p, a, b);
    if g2 <= T::zero() {
        return Err(Error::SingularOrigin);
    }
    let g3 = g2 * g2.sqrt();
    let (l1, l2) = (p.lambda1, p.lambda2);
    Ok(SymMatrix2 {
        m11: (l1 * a * g2 - l1 * l1 * s1 * s1) / g3,
        m12: -l1 * l2 * s1 * s2 / g3,
        m22: (l2 * b * g2 - l2 * l2 * s2 * s2) / g3,
    })
}

/// `det D^2 gamma = l1 l2 F(a, b) / gamma^4`.
pub fn hessian_det<T: Scalar>(p: &LatticeParams<T>, k: TorusPoint<T>) -> Result<T> {
    let ab = k.ab();
    let g2 = gamma_sq(p, ab);
    if g2 <= T::zero() {
        return Err(Error::SingularOrigin);
    }
    Ok(p.lambda1 * p.lambda2 * f_value(p, ab) / (g2 * g2))
}

/// `F(a,b) = a b omega^2 - l1 b (1-a)^2 - l2 a (1-b)^2`; same sign as `det D^2 gamma`.
pub fn f_value<T: Scalar>(p: &LatticeParams<T>, ab: ABPoint<T>) -> T {
    let ABPoint { a, b } = ab;
    let one = T::one();
    a * b * p.omega * p.omega - p.lambda1 * b * (one - a) * (one - a) - p.lambda2 * a * (one - b) * (one - b)
}

/// `(dF/da, dF/db)`.
pub fn f_grad_ab<T: Scalar>(p: &LatticeParams<T>, ab: ABPoint<T>) -> [T; 2] {
    let ABPoint { a, b } = ab;
    let one = T::one();
    let two = T::lit(2.0);
    let w2 = p.omega * p.omega;
    [
        b * w2 + two * p.lambda1 * b * (one - a) - p.lambda2 * (one - b) * (one - b),
        a * w2 - p.lambda1 * (one - a) * (one - a) + two * p.lambda2 * a * (one - b),
    ]
}

/// `G(a,b) = omega^2 a^3 b^3 + l1 b^3 (1 - 3a^2 + 2a^3) + l2 a^3 (1 - 3b^2 + 2b^3)`.
pub fn g_value<T: Scalar>(p: &LatticeParams<T>, ab: ABPoint<T>) -> T {
    let ABPoint { a, b } = ab;
    let (a3, b3) = (a * a * a, b * b * b);
    let one = T::one();
    let (two, three) = (T::lit(2.0), T::lit(3.0));
    p.omega * p.omega * a3 * b3
        + p.lambda1 * b3 * (one - three * a * a + two * a3)
        + p.lambda2 * a3 * (one - three * b * b + two * b3)
}

/// `(dG/da, dG/db)`.
pub fn g_grad_ab<T: Scalar>(p: &LatticeParams<T>, ab: ABPoint<T>) -> [T; 2] {
    let ABPoint { a, b } = ab;
    let one = T::one();
    let (two, three, six) = (T::lit(2.0), T::lit(3.0), T::lit(6.0));
    let w2 = p.omega * p.omega;
    let (a2, b2) = (a * a, b * b);
    [
        three * w2 * a2 * b2 * b + p.lambda1 * b2 * b * six * (a2 - a)
            + three * p.lambda2 * a2 * (one - three * b2 + two * b2 * b),
        three * w2 * a2 * a * b2 + three * p.lambda1 * b2 * (one - three * a2 + two * a2 * a)
            + p.lambda2 * a2 * a * six * (b2 - b),
    ]
}

/// Analytic continuation `gamma(k + i mu)` on the principal branch.
pub fn gamma_complex<T: Scalar>(p: &LatticeParams<T>, k: TorusPoint<T>, mu: [T; 2]) -> Result<Complex<T>> {
    let two = T::lit(2.0);
    let cos_c = |x: T, y: T| Complex::new(x.cos() * y.cosh(), -(x.sin() * y.sinh()));
    let one = Complex::new(T::one(), T::zero());
    let g2 = Complex::new(p.omega * p.omega, T::zero())
        + (one - cos_c(k.k1, mu[0])) * (two * p.lambda1)
        + (one - cos_c(k.k2, mu[1])) * (two * p.lambda2);
    if g2.re <= T::zero() && g2.im == T::zero() {
        return Err(Error::BranchCut {
            re: g2.re.to_f64().unwrap_or(f64::NAN),
            im: 0.0,
        });
    }
    Ok(g2.sqrt())
}

/// `gamma(k0 + y1 e1 + y2 e2)` as a jet in `(y1, y2)`.
pub fn gamma_jet<T: Scalar>(p: &LatticeParams<T>, k0: TorusPoint<T>, e1: [T; 2], e2: [T; 2], order: usize) -> Jet2<T> {
    let two = T::lit(2.0);
    let k1 = Jet2::linear(order, k0.k1, [e1[0], e2[0]]);
    let k2 = Jet2::linear(order, k0.k2, [e1[1], e2[1]]);
    let c1 = k1.cos().scale(-two * p.lambda1);
    let c2 = k2.cos().scale(-two * p.lambda2);
    let base = p.omega * p.omega + two * (p.lambda1 + p.lambda2);
    (c1 + c2).add_const(base).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn unit() -> LatticeParams<f64> {
        LatticeParams::<f64>::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn gamma_reference_values() {
        let p = unit();
        assert_eq!(gamma(&p, TorusPoint::new(0.0, 0.0)), 1.0);
        assert!((gamma(&p, TorusPoint::new(PI, PI)) - 3.0).abs() < 1e-15);
        assert!((gamma(&p, TorusPoint::new(FRAC_PI_2, FRAC_PI_2)) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gamma_generic_f32() {
        let p = LatticeParams::<f32>::new(1.0, 1.0, 1.0).unwrap();
        assert!((gamma(&p, TorusPoint::new(core::f32::consts::PI, 0.0)) - 5f32.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn grad_matches_reference() {
        let v = grad_gamma(&unit(), TorusPoint::new(FRAC_PI_2, 0.0)).unwrap();
        assert!((v[0] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn hessian_at_origin_is_diagonal() {
        let p = LatticeParams::<f64>::new(1.0, 2.0, 3.0).unwrap();
        let h = hessian_gamma(&p, TorusPoint::new(0.0, 0.0)).unwrap();
        assert!((h.m11 - 2.0).abs() < 1e-15 && (h.m22 - 3.0).abs() < 1e-15 && h.m12 == 0.0);
    }

    #[test]
    fn wave_mode_origin_is_singular() {
        let p = LatticeParams::<f64>::new(0.0, 1.0, 1.0).unwrap();
        assert!(p.wave_mode());
        assert!(matches!(grad_gamma(&p, TorusPoint::new(0.0, 0.0)), Err(Error::SingularOrigin)));
        assert!(hessian_gamma(&p, TorusPoint::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(LatticeParams::<f64>::new(1.0, 0.0, 1.0).is_err());
        assert!(LatticeParams::<f64>::new(-1.0, 1.0, 1.0).is_err());
        assert!(LatticeParams::<f64>::new(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn f_and_g_closed_forms() {
        let p = LatticeParams::<f64>::new(1.3, 0.7, 2.1).unwrap();
        assert_eq!(f_value(&p, ABPoint::new(0.0, 0.0)), 0.0);
        assert!((f_value(&p, ABPoint::new(1.0, 1.0)) - 1.69).abs() < 1e-14);
        assert!((f_value(&p, ABPoint::new(0.0, 0.4)) + 0.7 * 0.4).abs() < 1e-15);
        assert!((g_value(&p, ABPoint::new(0.0, 0.4)) - 0.7 * 0.064).abs() < 1e-15);
        assert!((g_value(&p, ABPoint::new(0.4, 0.0)) - 2.1 * 0.064).abs() < 1e-15);
        let q = LatticeParams::<f64>::new(1.3, 0.7, 0.7).unwrap();
        let a: f64 = 0.35;
        let want = -(1.69 + 4.0 * 0.7) * a.powi(6);
        assert!((g_value(&q, ABPoint::new(a, -a)) - want).abs() < 1e-15);
    }

    #[test]
    fn ab_partials_match_differences() {
        let p = LatticeParams::<f64>::new(0.8, 1.1, 2.3).unwrap();
        let (a, b, h) = (0.31, -0.47, 1e-6);
        let fd = |f: &dyn Fn(ABPoint<f64>) -> f64| {
            [
                (f(ABPoint::new(a + h, b)) - f(ABPoint::new(a - h, b))) / (2.0 * h),
                (f(ABPoint::new(a, b + h)) - f(ABPoint::new(a, b - h))) / (2.0 * h),
            ]
        };
        let df = f_grad_ab(&p, ABPoint::new(a, b));
        let dg = g_grad_ab(&p, ABPoint::new(a, b));
        let ff = fd(&|x| f_value(&p, x));
        let gg = fd(&|x| g_value(&p, x));
        for j in 0..2 {
            assert!((df[j] - ff[j]).abs() < 1e-8);
            assert!((dg[j] - gg[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn complex_continuation_restricts_and_conjugates() {
        let p = LatticeParams::<f64>::new(1.0, 1.0, 2.0).unwrap();
        let k = TorusPoint::new(0.7, -1.9);
        let z = gamma_complex(&p, k, [0.0, 0.0]).unwrap();
        assert!((z.re - gamma(&p, k)).abs() < 1e-15 && z.im == 0.0);
        let up = gamma_complex(&p, k, [0.3, -0.2]).unwrap();
        let dn = gamma_complex(&p, k, [-0.3, 0.2]).unwrap();
        assert!((up - dn.conj()).norm() < 1e-14);
        let w = LatticeParams::<f64>::new(0.0, 1.0, 1.0).unwrap();
        assert!(gamma_complex(&w, TorusPoint::new(0.0, 0.0), [0.0, 0.0]).is_err());
    }

    #[test]
    fn eigen_decomposition() {
        let m = SymMatrix2 { m11: 2.0_f64, m12: -0.7, m22: 0.5 };
        let (vals, vecs) = m.eigen();
        for j in 0..2 {
            let mv = m.apply(vecs[j]);
            assert!((mv[0] - vals[j] * vecs[j][0]).abs() < 1e-14);
            assert!((mv[1] - vals[j] * vecs[j][1]).abs() < 1e-14);
        }
        assert!((vals[0] * vals[1] - m.det()).abs() < 1e-14);
    }

    #[test]
    fn torus_wrap() {
        let k = TorusPoint::new(3.0 * PI + 0.25, -2.0 * PI - 0.5);
        assert!((k.k1 - (-PI + 0.25)).abs() < 1e-12);
        assert!((k.k2 + 0.5).abs() < 1e-12);
    }
}
