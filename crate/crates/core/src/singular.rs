//! Degenerate critical points of the phase.
//!
//! In `(a, b) = (cos k1, cos k2)` coordinates the Hessian of `gamma` is
//! singular on `F = 0` and the third derivative along the kernel direction
//! additionally vanishes where `G = 0`. The curves cross at the origin and
//! at one more point `(a*, b*)`, whose torus preimages are the four cusp
//! points `K*`.

use crate::error::{Error, Result};
use crate::newton::{NewtonPolyhedron, Rational};
use crate::phase::{
    f_grad_ab, f_value, g_grad_ab, g_value, gamma, gamma_jet, gamma_sq, grad_gamma, hessian_gamma,
};
use crate::roots;
use crate::{AB, Params, Torus};

/// Tolerance on the scale-free curve residual `|F| / |grad_k F|`.
pub const TOL_DET: f64 = 1e-8;
/// Tolerance on the third derivative along the kernel direction.
pub const TOL_THIRD: f64 = 1e-6;
/// Taylor coefficients at or below this are structural zeros.
pub const COEFF_CUTOFF: f64 = 1e-9;

/// The unique `b` in `[-1, 1]` with `F(a, b) = 0`, if any.
///
/// `F` is quadratic in `b` with equal leading and constant coefficients, so
/// its roots are reciprocal and at most one lies inside the box.
pub fn solve_bf(p: &Params, a: f64) -> Option<f64> {
    if !(-1.0..=1.0).contains(&a) {
        return None;
    }
    let (w2, l1, l2) = (p.omega() * p.omega(), p.lambda1(), p.lambda2());
    let qa = -l2 * a;
    let qb = a * w2 - l1 * (1.0 - a) * (1.0 - a) + 2.0 * l2 * a;
    if qa == 0.0 {
        return (qb != 0.0).then_some(0.0);
    }
    let disc = qb * qb - 4.0 * qa * qa;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
    if q == 0.0 {
        return None;
    }
    let b = qa / q;
    (b.abs() <= 1.0 + 1e-12).then(|| b.clamp(-1.0, 1.0))
}

/// The `a` in `[-1, 1]` with `F(a, b) = 0`, if any.
pub fn solve_af(p: &Params, b: f64) -> Option<f64> {
    solve_bf(&p.swapped(), b)
}

/// The branch of `G = 0` through the origin lying in the second and fourth
/// quadrants, as a graph `b = B_G(a)`.
///
/// With `b = -a s`, `G = 0` becomes `h(s) = c3 s^3 + 3 l2 a^2 s^2 - l2 = 0`;
/// the branch is the smallest positive root, continuous from `s(0) = (l2/l1)^(1/3)`.
pub fn solve_bg(p: &Params, a: f64) -> Option<f64> {
    if a == 0.0 {
        return Some(0.0);
    }
    if !(-1.0..=1.0).contains(&a) {
        return None;
    }
    let (w2, l1, l2) = (p.omega() * p.omega(), p.lambda1(), p.lambda2());
    let (a2, a3) = (a * a, a * a * a);
    let c3 = l1 * (1.0 - 3.0 * a2 + 2.0 * a3) + (w2 + 2.0 * l2) * a3;
    let c2 = 3.0 * l2 * a2;
    let h = |s: f64| (c3 * s + c2) * s * s - l2;
    let s_box = 1.0 / a.abs();
    let hi = if c3 >= 0.0 { s_box } else { s_box.min(-2.0 * c2 / (3.0 * c3)) };
    if h(hi) < 0.0 {
        return None;
    }
    let s = roots::bracketed(h, 0.0, hi, 1e-15).ok()?;
    Some((-a * s).clamp(-1.0, 1.0))
}

/// The non-origin crossing `(a*, b*)` of `F = 0` and `G = 0`; the origin when `l1 == l2`.
pub fn find_astar(p: &Params) -> Result<AB> {
    let (l1, l2) = (p.lambda1(), p.lambda2());
    if l1 == l2 {
        return Ok(AB::new(0.0, 0.0));
    }
    if l1 > l2 {
        return find_astar(&p.swapped()).map(AB::swapped);
    }
    // l1 < l2: the crossing is at a* < 0 < b*. Near 0- the F-branch lies above
    // the G-branch (slopes l2/l1 versus (l2/l1)^(1/3)); where the G-branch has
    // left the box it counts as above.
    let diff = |a: f64| match (solve_bf(p, a), solve_bg(p, a)) {
        (Some(f), Some(g)) => f - g,
        (Some(f), None) => f - 1.0 - 1e-3,
        _ => f64::NAN,
    };
    let mut samples: Vec<f64> = (0..40).map(|j| -(10f64).powf(-12.0 + 9.0 * j as f64 / 40.0)).collect();
    samples.extend((1..=4000).map(|j| -(j as f64) / 4000.0));
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    for &a in &samples {
        let d = diff(a);
        if !d.is_finite() {
            continue;
        }
        if let Some((pa, pd)) = prev {
            if pd > 0.0 && d <= 0.0 {
                bracket = Some((a, pa));
                break;
            }
        }
        prev = Some((a, d));
    }
    let (lo, hi) = bracket.ok_or_else(|| Error::NonConvergence("no sign change of B_F - B_G".into()))?;
    let a0 = roots::bracketed(diff, lo, hi, 1e-15)?;
    let b0 = solve_bf(p, a0).ok_or_else(|| Error::NonConvergence("B_F undefined at crossing".into()))?;
    polish_fg(p, AB::new(a0, b0))
}

/// Newton iteration on the pair `(F, G)`.
fn polish_fg(p: &Params, start: AB) -> Result<AB> {
    let mut x = start;
    for _ in 0..20 {
        let (f, g) = (f_value(p, x), g_value(p, x));
        if f.abs() < 1e-15 && g.abs() < 1e-15 {
            break;
        }
        let [fa, fb] = f_grad_ab(p, x);
        let [ga, gb] = g_grad_ab(p, x);
        let det = fa * gb - fb * ga;
        if det == 0.0 {
            break;
        }
        let da = (f * gb - g * fb) / det;
        let db = (fa * g - ga * f) / det;
        x = AB::new(x.a - da, x.b - db);
        if da.abs() < 1e-17 && db.abs() < 1e-17 {
            break;
        }
    }
    let (f, g) = (f_value(p, x), g_value(p, x));
    if f.abs() > 1e-12 || g.abs() > 1e-12 {
        return Err(Error::NonConvergence(format!("(F, G) residual ({f:.2e}, {g:.2e})")));
    }
    Ok(x)
}

/// Closed form of `(a*, b*)` for `omega = 0`: `a*` solves
/// `l1 (1-a)^2 (1+2a) = l2 (1+3a)^2` on `(-1/3, 1)` and `b* = -a*/(1+2a*)`.
pub fn astar_massless(lambda1: f64, lambda2: f64) -> Result<AB> {
    let h = |a: f64| lambda1 * (1.0 - a) * (1.0 - a) * (1.0 + 2.0 * a) - lambda2 * (1.0 + 3.0 * a) * (1.0 + 3.0 * a);
    let a = roots::bracketed(h, -1.0 / 3.0, 1.0, 1e-16)?;
    Ok(AB::new(a, -a / (1.0 + 2.0 * a)))
}

/// `{(+-acos a*, +-acos b*)}`, counter-clockwise from the first quadrant.
pub fn kstar_points(p: &Params) -> Result<[Torus; 4]> {
    let s = find_astar(p)?;
    let (k1, k2) = (s.a.clamp(-1.0, 1.0).acos(), s.b.clamp(-1.0, 1.0).acos());
    Ok([
        Torus::new(k1, k2),
        Torus::new(-k1, k2),
        Torus::new(-k1, -k2),
        Torus::new(k1, -k2),
    ])
}

/// `F(cos k1, cos k2)` and its torus gradient.
pub fn f_on_torus(p: &Params, k: [f64; 2]) -> (f64, [f64; 2]) {
    let (s1, a) = k[0].sin_cos();
    let (s2, b) = k[1].sin_cos();
    let ab = AB::new(a, b);
    let [fa, fb] = f_grad_ab(p, ab);
    (f_value(p, ab), [-fa * s1, -fb * s2])
}

/// Scale-free distance from `k` to the curve `det D^2 gamma = 0`, `|F| / |grad_k F|`.
pub fn curve_residual(p: &Params, k: Torus) -> f64 {
    let (f, g) = f_on_torus(p, k.to_array());
    if f == 0.0 {
        return 0.0;
    }
    f.abs() / g[0].hypot(g[1])
}

/// Unit vector spanning `ker D^2 gamma(k)` on the degenerate curve.
///
/// Uses `(dF/da, l1 s1 s2)` or `(l2 s1 s2, dF/db)`, whichever is longer;
/// both are kernel vectors wherever `F = 0`.
pub fn zero_eigvec(p: &Params, k: Torus, tol: f64) -> Result<[f64; 2]> {
    let residual = curve_residual(p, k);
    if residual > tol {
        return Err(Error::NotOnCurve { residual });
    }
    Ok(kernel_direction(p, k))
}

fn kernel_direction(p: &Params, k: Torus) -> [f64; 2] {
    let ab = k.ab();
    let [fa, fb] = f_grad_ab(p, ab);
    let ss = k.k1.sin() * k.k2.sin();
    let u = [fa, p.lambda1() * ss];
    let w = [p.lambda2() * ss, fb];
    let (nu, nw) = (u[0].hypot(u[1]), w[0].hypot(w[1]));
    let (v, n) = if nu >= nw { (u, nu) } else { (w, nw) };
    [v[0] / n, v[1] / n]
}

/// `xi_perp = (-xi_2, xi_1)`.
#[inline]
pub fn perp(xi: [f64; 2]) -> [f64; 2] {
    [-xi[1], xi[0]]
}

/// The three classes of critical points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KClass {
    /// Nondegenerate Hessian.
    K1,
    /// Fold: rank-one Hessian, nonzero cubic term along the kernel.
    K2,
    /// Cusp: rank-one Hessian and vanishing cubic term.
    K3,
}

#[derive(Clone, Copy, Debug)]
pub struct DegeneracyClass {
    pub class: KClass,
    /// `det D^2 gamma(k)`.
    pub det: f64,
    /// Scale-free curve residual used for the K1 test.
    pub curve_residual: f64,
    /// Third derivative along the kernel direction, when on the curve.
    pub third: Option<f64>,
}

pub fn classify_k(p: &Params, k: Torus, tol_det: f64, tol_third: f64) -> DegeneracyClass {
    let k = Torus::new(k.k1, k.k2);
    if gamma(p, k) == 0.0 {
        // massless origin: treated as the (regular) apex of the light cone
        return DegeneracyClass { class: KClass::K1, det: f64::NAN, curve_residual: f64::INFINITY, third: None };
    }
    let det = crate::phase::hessian_det(p, k).unwrap_or(f64::NAN);
    let res = curve_residual(p, k);
    if res > tol_det {
        return DegeneracyClass { class: KClass::K1, det, curve_residual: res, third: None };
    }
    let third = third_along_kernel(p, k);
    let class = if third.abs() <= tol_third { KClass::K3 } else { KClass::K2 };
    DegeneracyClass { class, det, curve_residual: res, third: Some(third) }
}

fn third_along_kernel(p: &Params, k: Torus) -> f64 {
    let xi = kernel_direction(p, k);
    gamma_jet(p, k, perp(xi), xi, 3).derivative(0, 3)
}

/// `(d^3_xi gamma, d_xi det D^2 gamma)` at a point of the degenerate curve.
pub fn third_der_equiv_check(p: &Params, k: Torus, tol: f64) -> Result<(f64, f64)> {
    let xi = zero_eigvec(p, k, tol)?;
    let lhs = gamma_jet(p, k, perp(xi), xi, 3).derivative(0, 3);
    let (f, gf) = f_on_torus(p, k.to_array());
    let g2 = gamma_sq(p, k.ab());
    let g = g2.sqrt();
    let gg = grad_gamma(p, k)?;
    let pref = p.lambda1() * p.lambda2();
    let grad_det = [0, 1].map(|j| pref * (gf[j] / (g2 * g2) - 4.0 * f * gg[j] / (g2 * g2 * g)));
    Ok((lhs, grad_det[0] * xi[0] + grad_det[1] * xi[1]))
}

/// Taylor coefficients of `phi_v(k* + y1 xi_perp + y2 xi)` with `v = grad gamma(k*)`.
#[derive(Clone, Debug)]
pub struct TaylorTable {
    pub kstar: Torus,
    pub velocity: [f64; 2],
    /// `(xi_perp, xi)`: unit eigenvectors of the Hessian, `xi` for the
    /// eigenvalue of smaller magnitude.
    pub frame: [[f64; 2]; 2],
    pub order: usize,
    coeffs: Vec<Vec<f64>>,
}

impl TaylorTable {
    /// Coefficient of `y1^i y2^j`.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order {
            return 0.0;
        }
        self.coeffs[i][j]
    }

    /// All `(i, j, c_ij)` with `i + j <= order`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.order).flat_map(move |i| (0..=self.order - i).map(move |j| (i, j, self.coeffs[i][j])))
    }
}

/// Taylor table of the phase at `kstar` in the Hessian eigenframe, to total
/// order `max_order` (at most 6). Coefficients come from jet arithmetic, so
/// they are exact up to round-off.
pub fn taylor_table(p: &Params, kstar: Torus, max_order: usize) -> Result<TaylorTable> {
    assert!(max_order <= 6, "taylor_table supports orders up to 6");
    let h = hessian_gamma(p, kstar)?;
    let velocity = grad_gamma(p, kstar)?;
    let (vals, vecs) = h.eigen();
    let (xi, xp) = if vals[0].abs() <= vals[1].abs() { (vecs[0], vecs[1]) } else { (vecs[1], vecs[0]) };
    let jet = gamma_jet(p, kstar, xp, xi, max_order);
    let lin = [velocity[0] * xp[0] + velocity[1] * xp[1], velocity[0] * xi[0] + velocity[1] * xi[1]];
    let mut coeffs = vec![vec![0.0; max_order + 1]; max_order + 1];
    for (i, row) in coeffs.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate().take(max_order + 1 - i) {
            *c = match (i, j) {
                (0, 0) => 0.0,
                (1, 0) => lin[0] - jet.coeff(1, 0),
                (0, 1) => lin[1] - jet.coeff(0, 1),
                _ => -jet.coeff(i, j),
            };
        }
    }
    Ok(TaylorTable { kstar, velocity, frame: [xp, xi], order: max_order, coeffs })
}

/// Newton polyhedron of a Taylor table, dropping coefficients `<= cutoff`.
pub fn newton_polyhedron(table: &TaylorTable, cutoff: f64) -> Result<NewtonPolyhedron> {
    let support: Vec<(u32, u32)> = table
        .entries()
        .filter(|&(i, j, c)| i + j >= 2 && c.abs() > cutoff)
        .map(|(i, j, _)| (i as u32, j as u32))
        .collect();
    NewtonPolyhedron::from_support(support)
}

pub fn newton_distance(table: &TaylorTable, cutoff: f64) -> Result<Rational> {
    Ok(newton_polyhedron(table, cutoff)?.newton_distance)
}

/// `(d^4_xi gamma d^2_xperp gamma - 3 (d^2_xi d_xperp gamma)^2) / (d^2_xperp gamma)^2` at `K*`.
///
/// In table coefficients this is `(48 c20 c04 - 12 c12^2) / (4 c20^2)`, i.e.
/// `-3 disc(P) / c20^2` for the face polynomial `P(y1) = c20 y1^2 + c12 y1 + c04`.
pub fn k3_discriminant(p: &Params) -> Result<f64> {
    let k = kstar_points(p)?[0];
    let t = taylor_table(p, k, 4)?;
    let (c20, c12, c04) = (t.coeff(2, 0), t.coeff(1, 2), t.coeff(0, 4));
    Ok((48.0 * c20 * c04 - 12.0 * c12 * c12) / (4.0 * c20 * c20))
}

/// Discriminant `c12^2 - 4 c20 c04` of the principal-face polynomial at a cusp.
pub fn face_polynomial_discriminant(table: &TaylorTable) -> f64 {
    let (c20, c12, c04) = (table.coeff(2, 0), table.coeff(1, 2), table.coeff(0, 4));
    c12 * c12 - 4.0 * c20 * c04
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn params(w: f64, l1: f64, l2: f64) -> Params {
        Params::new(w, l1, l2).unwrap()
    }

    #[test]
    fn bf_reference_values() {
        let p = params(1.0, 1.0, 1.0);
        assert_eq!(solve_bf(&p, 0.0), Some(0.0));
        let b = solve_bf(&p, 1.0).unwrap();
        assert!((b - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
        let q = params(0.7, 1.3, 2.9);
        for j in 0..=40 {
            let a = -1.0 + j as f64 / 20.0;
            if let Some(b) = solve_bf(&q, a) {
                assert!(f_value(&q, AB::new(a, b)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn bf_slope_at_origin() {
        let p = params(1.0, 1.5, 2.5);
        let h = 1e-6;
        let slope = (solve_bf(&p, h).unwrap() - solve_bf(&p, -h).unwrap()) / (2.0 * h);
        assert!((slope + 2.5 / 1.5).abs() < 1e-6);
    }

    #[test]
    fn bg_slope_and_residual() {
        let p = params(1.0, 1.5, 2.5);
        let h = 1e-5;
        let slope = (solve_bg(&p, h).unwrap() - solve_bg(&p, -h).unwrap()) / (2.0 * h);
        assert!((slope + (2.5f64 / 1.5).cbrt()).abs() < 1e-6);
        let q = params(1.0, 2.0, 2.0);
        for j in 1..=20 {
            let a = j as f64 * 0.03;
            for a in [a, -a] {
                if let Some(b) = solve_bg(&q, a) {
                    assert!(g_value(&q, AB::new(a, b)).abs() < 1e-12, "a = {a}");
                    assert!(b * a <= 0.0);
                }
            }
        }
    }

    /// Independent oracle: 2-D bisection on the sign pattern of (F, G) along
    /// the F-curve, parametrized by a.
    fn astar_oracle(p: &Params) -> AB {
        let g_on_f = |a: f64| g_value(p, AB::new(a, solve_bf(p, a).unwrap()));
        let (mut lo, mut hi) = (-0.9, -1e-6);
        let s_hi = g_on_f(hi).signum();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g_on_f(mid).signum() == s_hi {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let a = 0.5 * (lo + hi);
        AB::new(a, solve_bf(p, a).unwrap())
    }

    #[test]
    fn astar_equal_couplings_is_origin() {
        for w in [0.3, 1.0, 4.0] {
            let s = find_astar(&params(w, 1.7, 1.7)).unwrap();
            assert_eq!((s.a, s.b), (0.0, 0.0));
            for k in kstar_points(&params(w, 1.7, 1.7)).unwrap() {
                assert!((k.k1.abs() - FRAC_PI_2).abs() < 1e-15 && (k.k2.abs() - FRAC_PI_2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn astar_matches_oracle() {
        let p = params(1.0, 1.0, 2.0);
        let s = find_astar(&p).unwrap();
        assert!(s.a < 0.0 && s.b > 0.0);
        let o = astar_oracle(&p);
        assert!((s.a - o.a).abs() < 1e-10 && (s.b - o.b).abs() < 1e-10, "{s:?} vs {o:?}");
        // frozen from the oracle
        assert!((s.a + 0.086_175_532_678).abs() < 1e-9);
        assert!((s.b - 0.108_260_987_744).abs() < 1e-9);
        let m = find_astar(&p.swapped()).unwrap();
        assert!((m.a - s.b).abs() < 1e-15 && (m.b - s.a).abs() < 1e-15);
    }

    #[test]
    fn astar_small_mass_matches_massless_closed_form() {
        let s = find_astar(&params(1e-4, 1.0, 2.0)).unwrap();
        let c = astar_massless(1.0, 2.0).unwrap();
        assert!((s.a - c.a).abs() < 1e-3 && (s.b - c.b).abs() < 1e-3);
        let z = find_astar(&params(0.0, 1.0, 4.0)).unwrap();
        let c = astar_massless(1.0, 4.0).unwrap();
        assert!((z.a - c.a).abs() < 1e-10 && (z.b - c.b).abs() < 1e-10);
    }

    #[test]
    fn kstar_is_degenerate() {
        for p in [params(1.0, 1.0, 2.0), params(0.4, 3.0, 0.5), params(2.0, 1.0, 1.0)] {
            for k in kstar_points(&p).unwrap() {
                let det = crate::phase::hessian_det(&p, k).unwrap();
                assert!(det.abs() < 1e-9);
                assert_eq!(classify_k(&p, k, TOL_DET, TOL_THIRD).class, KClass::K3);
            }
        }
    }

    #[test]
    fn kernel_vector_annihilates_hessian() {
        let p = params(1.0, 1.0, 2.0);
        let k = kstar_points(&p).unwrap()[1];
        let xi = zero_eigvec(&p, k, 1e-9).unwrap();
        let h = hessian_gamma(&p, k).unwrap();
        let r = h.apply(xi);
        assert!(r[0].hypot(r[1]) < 1e-10);
        assert!(zero_eigvec(&p, Torus::new(0.3, 0.2), 1e-8).is_err());
    }

    #[test]
    fn origin_is_k1() {
        let c = classify_k(&params(1.0, 2.0, 3.0), Torus::new(0.0, 0.0), TOL_DET, TOL_THIRD);
        assert_eq!(c.class, KClass::K1);
    }

    #[test]
    fn third_derivative_matches_finite_differences() {
        let p = params(1.0, 1.0, 2.0);
        let a = 0.5;
        let b = solve_bf(&p, a).unwrap();
        let k = Torus::new(a.acos(), b.acos());
        let xi = zero_eigvec(&p, k, 1e-10).unwrap();
        let g = |s: f64| gamma(&p, Torus::new(k.k1 + s * xi[0], k.k2 + s * xi[1]));
        let h = 1e-2;
        // fourth-order central stencil for the third derivative
        let fd = (-g(3.0 * h) + 8.0 * g(2.0 * h) - 13.0 * g(h) + 13.0 * g(-h) - 8.0 * g(-2.0 * h) + g(-3.0 * h))
            / (8.0 * h * h * h);
        let (lhs, _) = third_der_equiv_check(&p, k, 1e-10).unwrap();
        assert!((lhs - fd).abs() < 1e-5, "{lhs} vs {fd}");
    }

    #[test]
    fn det_directional_derivative_matches_finite_differences() {
        let p = params(0.8, 1.0, 2.5);
        let a = -0.3;
        let b = solve_bf(&p, a).unwrap();
        let k = Torus::new(a.acos(), -b.acos());
        let xi = zero_eigvec(&p, k, 1e-10).unwrap();
        let det = |s: f64| crate::phase::hessian_det(&p, Torus::new(k.k1 + s * xi[0], k.k2 + s * xi[1])).unwrap();
        let h = 1e-4;
        let fd = (det(h) - det(-h)) / (2.0 * h);
        let (_, rhs) = third_der_equiv_check(&p, k, 1e-10).unwrap();
        assert!((rhs - fd).abs() < 1e-7);
    }

    #[test]
    fn det_derivative_at_quarter_point_tracks_coupling_asymmetry() {
        let k = Torus::new(FRAC_PI_2, FRAC_PI_2);
        let (_, sym) = third_der_equiv_check(&params(1.0, 1.5, 1.5), k, 1e-12).unwrap();
        assert!(sym.abs() < 1e-14);
        let (_, asym) = third_der_equiv_check(&params(1.0, 1.0, 2.0), k, 1e-12).unwrap();
        assert!(asym.abs() > 1e-3);
    }

    #[test]
    fn taylor_table_matches_finite_differences() {
        let p = params(1.0, 1.0, 2.0);
        let k = Torus::new(0.9, -2.1);
        let t = taylor_table(&p, k, 4).unwrap();
        let [e1, e2] = t.frame;
        let v = t.velocity;
        let g0 = gamma(&p, k);
        let phi = |y1: f64, y2: f64| {
            let d = [y1 * e1[0] + y2 * e2[0], y1 * e1[1] + y2 * e2[1]];
            d[0] * v[0] + d[1] * v[1] - (gamma(&p, Torus::new(k.k1 + d[0], k.k2 + d[1])) - g0)
        };
        let h = 1e-3;
        let c20 = (phi(h, 0.0) - 2.0 * phi(0.0, 0.0) + phi(-h, 0.0)) / (2.0 * h * h);
        let c11 = (phi(h, h) - phi(h, -h) - phi(-h, h) + phi(-h, -h)) / (4.0 * h * h);
        assert!((t.coeff(2, 0) - c20).abs() < 1e-6);
        assert!((t.coeff(1, 1) - c11).abs() < 1e-6);
        assert!(t.coeff(1, 0).abs() < 1e-14 && t.coeff(0, 1).abs() < 1e-14);
    }

    #[test]
    fn k3_discriminant_negative_and_matches_differences() {
        let p = params(1.0, 1.0, 1.0);
        let d = k3_discriminant(&p).unwrap();
        assert!(d < 0.0);
        // finite-difference oracle on gamma at K* = (pi/2, pi/2)
        let k = kstar_points(&p).unwrap()[0];
        let xi = zero_eigvec(&p, k, 1e-12).unwrap();
        let xp = perp(xi);
        let g = |s: f64, u: f64| gamma(&p, Torus::new(k.k1 + s * xp[0] + u * xi[0], k.k2 + s * xp[1] + u * xi[1]));
        let h = 2e-2;
        let d4 = (g(0.0, 2.0 * h) - 4.0 * g(0.0, h) + 6.0 * g(0.0, 0.0) - 4.0 * g(0.0, -h) + g(0.0, -2.0 * h))
            / h.powi(4);
        let d2p = (g(h, 0.0) - 2.0 * g(0.0, 0.0) + g(-h, 0.0)) / (h * h);
        let dmix = (g(h, h) - 2.0 * g(h, 0.0) + g(h, -h) - g(-h, h) + 2.0 * g(-h, 0.0) - g(-h, -h))
            / (2.0 * h * h * h);
        let want = (d4 * d2p - 3.0 * dmix * dmix) / (d2p * d2p);
        assert!((d - want).abs() < 1e-2 * want.abs(), "{d} vs {want}");
    }
}
