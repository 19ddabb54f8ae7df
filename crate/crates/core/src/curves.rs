//! Polylines for the degenerate curves and their images, plus the
//! predictor-corrector tracer that produces them.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::phase::{g_grad_ab, g_value};
use crate::singular::{find_astar, solve_af, solve_bf, solve_bg};
use crate::{AB, Params};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurveLabel {
    Gamma1_1,
    Gamma1_2,
    Gamma2_1,
    Gamma2_2,
    Phi1OriginLoop,
    Phi1PiLoop,
    Psi1,
    Psi2,
}

impl fmt::Display for CurveLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CurveLabel::Gamma1_1 => "Gamma1_1",
            CurveLabel::Gamma1_2 => "Gamma1_2",
            CurveLabel::Gamma2_1 => "Gamma2_1",
            CurveLabel::Gamma2_2 => "Gamma2_2",
            CurveLabel::Phi1OriginLoop => "Phi1_origin_loop",
            CurveLabel::Phi1PiLoop => "Phi1_pi_loop",
            CurveLabel::Psi1 => "Psi1",
            CurveLabel::Psi2 => "Psi2",
        };
        f.write_str(s)
    }
}

/// Ordered vertices of a planar curve. Closed curves do not repeat the first
/// vertex at the end.
#[derive(Clone, Debug)]
pub struct CurvePolyline {
    pub label: CurveLabel,
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

#[inline]
fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 == 0.0 { 0.0 } else { (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0) };
    norm(sub(p, [a[0] + t * ab[0], a[1] + t * ab[1]]))
}

impl CurvePolyline {
    pub fn new(label: CurveLabel, points: Vec<[f64; 2]>, closed: bool) -> Self {
        Self { label, points, closed }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Segments in order, including the closing one.
    pub fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.points.len();
        let m = if self.closed { n } else { n.saturating_sub(1) };
        (0..m).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| norm(sub(b, a))).sum()
    }

    pub fn max_step(&self) -> f64 {
        self.segments().map(|(a, b)| norm(sub(b, a))).fold(0.0, f64::max)
    }

    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        if self.points.len() == 1 {
            return norm(sub(p, self.points[0]));
        }
        self.segments().map(|(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    /// Winding number of a closed polyline about `p`.
    pub fn winding_number(&self, p: [f64; 2]) -> i32 {
        let mut w = 0;
        for (a, b) in self.segments() {
            let side = cross(sub(b, a), sub(p, a));
            if a[1] <= p[1] {
                if b[1] > p[1] && side > 0.0 {
                    w += 1;
                }
            } else if b[1] <= p[1] && side < 0.0 {
                w -= 1;
            }
        }
        w
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.closed && self.winding_number(p) != 0
    }

    /// Indices of vertices where the curve reverses direction (turn > 90 degrees).
    pub fn cusp_vertices(&self) -> Vec<usize> {
        let n = self.points.len();
        (0..n)
            .filter(|&i| self.closed || (i > 0 && i + 1 < n))
            .filter(|&i| {
                let prev = self.points[(i + n - 1) % n];
                let next = self.points[(i + 1) % n];
                dot(sub(self.points[i], prev), sub(next, self.points[i])) < 0.0
            })
            .collect()
    }

    /// Signed turning of consecutive edges: `cross(e_i, e_{i+1})` per vertex.
    pub fn turn_signs(&self) -> Vec<f64> {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let prev = self.points[(i + n - 1) % n];
                let next = self.points[(i + 1) % n];
                cross(sub(self.points[i], prev), sub(next, self.points[i]))
            })
            .collect()
    }

    /// Smallest distance between any vertex of `self` and the segments of `other`.
    pub fn min_distance_to(&self, other: &CurvePolyline) -> f64 {
        self.points.iter().map(|&p| other.distance_to(p)).fold(f64::INFINITY, f64::min)
    }
}

/// Implicit function with gradient.
pub(crate) type Implicit<'a> = dyn Fn([f64; 2]) -> (f64, [f64; 2]) + 'a;

/// Newton projection along the gradient onto the zero set.
pub(crate) fn project(f: &Implicit<'_>, mut q: [f64; 2], tol: f64) -> Option<[f64; 2]> {
    for _ in 0..50 {
        let (v, g) = f(q);
        if v.abs() <= tol {
            return Some(q);
        }
        let g2 = dot(g, g);
        if g2 == 0.0 || !g2.is_finite() {
            return None;
        }
        q = [q[0] - v * g[0] / g2, q[1] - v * g[1] / g2];
    }
    let (v, _) = f(q);
    (v.abs() <= tol * 10.0).then_some(q)
}

/// Predictor-corrector continuation of `f = 0` from `start`, initially moving
/// along `dir`, until `stop(q)` holds for the next point. The stopping point
/// is not included.
pub(crate) fn continuation(
    f: &Implicit<'_>,
    start: [f64; 2],
    dir: [f64; 2],
    h_max: f64,
    stop: &dyn Fn([f64; 2]) -> bool,
) -> Result<Vec<[f64; 2]>> {
    let tangent = |q: [f64; 2], prev: [f64; 2]| {
        let (_, g) = f(q);
        let n = norm(g);
        let t = [-g[1] / n, g[0] / n];
        if dot(t, prev) < 0.0 {
            [-t[0], -t[1]]
        } else {
            t
        }
    };
    let mut pts = vec![start];
    let mut q = start;
    let mut t = tangent(q, dir);
    let mut h = h_max;
    for _ in 0..2_000_000 {
        let pred = [q[0] + h * t[0], q[1] + h * t[1]];
        let corr = project(f, pred, 1e-14);
        let accept = corr.and_then(|c| {
            let t_new = tangent(c, t);
            let step = norm(sub(c, q));
            (dot(t, t_new) > 0.98 && step < 2.0 * h && step > 0.25 * h).then_some((c, t_new))
        });
        match accept {
            Some((c, t_new)) => {
                if stop(c) {
                    return Ok(pts);
                }
                pts.push(c);
                q = c;
                t = t_new;
                h = (h * 1.5).min(h_max);
            }
            None => {
                h *= 0.5;
                if h < 1e-12 {
                    return Err(Error::TracingFailure(format!("step collapsed at ({:.6}, {:.6})", q[0], q[1])));
                }
            }
        }
    }
    Err(Error::TracingFailure("too many continuation steps".into()))
}

/// A curve piece between two exact vertices.
struct Piece {
    pts: Vec<[f64; 2]>,
}

impl Piece {
    fn length(&self) -> f64 {
        self.pts.windows(2).map(|w| norm(sub(w[1], w[0]))).sum()
    }

    /// `m` points at arclengths `j L / m`, `j = 0..m`; the first is the exact start.
    fn sample(&self, m: usize) -> Vec<[f64; 2]> {
        let total = self.length();
        let mut out = Vec::with_capacity(m);
        let mut seg = 0;
        let mut acc = 0.0;
        for j in 0..m {
            let s = total * j as f64 / m as f64;
            while seg + 2 < self.pts.len() && acc + norm(sub(self.pts[seg + 1], self.pts[seg])) < s {
                acc += norm(sub(self.pts[seg + 1], self.pts[seg]));
                seg += 1;
            }
            let (a, b) = (self.pts[seg], self.pts[seg + 1]);
            let l = norm(sub(b, a));
            let u = if l > 0.0 { ((s - acc) / l).clamp(0.0, 1.0) } else { 0.0 };
            out.push([a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]);
        }
        out
    }
}

/// Splits `n` vertices across pieces proportionally to length, at least one each.
fn allocate(lengths: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = lengths.iter().sum();
    let spare = n - lengths.len();
    let raw: Vec<f64> = lengths.iter().map(|l| l / total * spare as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| 1 + r.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by(|&i, &j| (raw[j] - raw[j].floor()).total_cmp(&(raw[i] - raw[i].floor())).then(i.cmp(&j)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Resamples a chain of pieces to `n` vertices; piece starts are kept exactly
/// and the other vertices are projected back onto `f = 0`.
fn resample(pieces: &[Piece], n: usize, f: &Implicit<'_>, closed: bool) -> Result<Vec<[f64; 2]>> {
    let lengths: Vec<f64> = pieces.iter().map(Piece::length).collect();
    let budget = if closed { n } else { n - 1 };
    let counts = allocate(&lengths, budget);
    let mut out = Vec::with_capacity(n);
    for (piece, &m) in pieces.iter().zip(&counts) {
        for (j, q) in piece.sample(m).into_iter().enumerate() {
            if j == 0 {
                out.push(q);
            } else {
                let c = project(f, q, 1e-13)
                    .ok_or_else(|| Error::TracingFailure("projection onto curve failed".into()))?;
                out.push(c);
            }
        }
    }
    if !closed {
        out.push(*pieces.last().unwrap().pts.last().unwrap());
    }
    Ok(out)
}

/// `F(s cos q1, s cos q2)` with torus gradient; `s = -1` shifts by `(pi, pi)`.
fn f_local(p: &Params, sigma: f64) -> impl Fn([f64; 2]) -> (f64, [f64; 2]) + '_ {
    move |q: [f64; 2]| {
        let (s1, c1) = q[0].sin_cos();
        let (s2, c2) = q[1].sin_cos();
        let ab = AB::new(sigma * c1, sigma * c2);
        let [fa, fb] = crate::phase::f_grad_ab(p, ab);
        (crate::phase::f_value(p, ab), [-sigma * fa * s1, -sigma * fb * s2])
    }
}

/// One quarter of a degenerate loop in local coordinates `q in [0, pi]^2`,
/// from the `q1` axis to the `q2` axis.
struct Quarter {
    pts: Vec<[f64; 2]>,
}

fn trace_quarter(p: &Params, sigma: f64) -> Result<Quarter> {
    let a0 = solve_af(p, sigma).ok_or_else(|| Error::TracingFailure("loop misses the k1 axis".into()))?;
    let b1 = solve_bf(p, sigma).ok_or_else(|| Error::TracingFailure("loop misses the k2 axis".into()))?;
    let start = [(sigma * a0).clamp(-1.0, 1.0).acos(), 0.0];
    let end = [0.0, (sigma * b1).clamp(-1.0, 1.0).acos()];
    let f = f_local(p, sigma);
    let h = 0.002 * (start[0] + end[1]).max(1e-3);
    let mut pts = continuation(&f, start, [0.0, 1.0], h, &|q| q[0] <= 0.0)?;
    pts.push(end);
    Ok(Quarter { pts })
}

/// Orders the four mirror images of a quarter into a closed loop:
/// Q1 as is, then `(-q1, q2)` reversed, `(-q1, -q2)`, `(q1, -q2)` reversed.
fn mirror_pieces(quarter_pieces: &[Vec<[f64; 2]>]) -> Vec<Piece> {
    let map = |pts: &Vec<[f64; 2]>, s: [f64; 2], rev: bool| {
        let mut v: Vec<[f64; 2]> = pts.iter().map(|q| [s[0] * q[0], s[1] * q[1]]).collect();
        if rev {
            v.reverse();
        }
        v
    };
    let mut out = Vec::new();
    for (sign, rev) in [([1.0, 1.0], false), ([-1.0, 1.0], true), ([-1.0, -1.0], false), ([1.0, -1.0], true)] {
        let mut seq: Vec<Piece> = quarter_pieces.iter().map(|p| Piece { pts: map(p, sign, rev) }).collect();
        if rev {
            seq.reverse();
        }
        out.extend(seq);
    }
    out
}

fn split_at(pts: &[[f64; 2]], at: [f64; 2]) -> Vec<Vec<[f64; 2]>> {
    let mut best = (f64::INFINITY, 0);
    for (i, w) in pts.windows(2).enumerate() {
        let d = segment_distance(at, w[0], w[1]);
        if d < best.0 {
            best = (d, i);
        }
    }
    let i = best.1;
    let mut first: Vec<[f64; 2]> = pts[..=i].to_vec();
    if norm(sub(*first.last().unwrap(), at)) < 1e-12 {
        first.pop();
    }
    first.push(at);
    let mut second = vec![at];
    second.extend(pts[i + 1..].iter().copied().filter(|q| norm(sub(*q, at)) >= 1e-12));
    vec![first, second]
}

/// The two closed components of the degenerate set on the torus, each with
/// `n_points` vertices: the loop around the origin and the loop around
/// `(pi, pi)`. The latter has the four cusp points as exact vertices.
///
/// In the massless case the origin loop collapses to the point `k = 0` and
/// is returned as `n_points` copies of it.
pub fn trace_phi1(p: &Params, n_points: usize) -> Result<(CurvePolyline, CurvePolyline)> {
    if n_points < 64 {
        return Err(Error::TracingFailure(format!("n_points = {n_points} < 64")));
    }
    let origin = if p.wave_mode() {
        CurvePolyline::new(CurveLabel::Phi1OriginLoop, vec![[0.0, 0.0]; n_points], true)
    } else {
        let q = trace_quarter(p, 1.0)?;
        let pieces = mirror_pieces(&[q.pts]);
        let f = f_local(p, 1.0);
        let pts = resample(&pieces, n_points, &f, true)?;
        CurvePolyline::new(CurveLabel::Phi1OriginLoop, pts, true)
    };
    let q = trace_quarter(p, -1.0)?;
    let s = find_astar(p)?;
    let kstar_local = [PI - s.a.clamp(-1.0, 1.0).acos(), PI - s.b.clamp(-1.0, 1.0).acos()];
    let pieces = mirror_pieces(&split_at(&q.pts, kstar_local));
    let f = f_local(p, -1.0);
    let local = resample(&pieces, n_points, &f, true)?;
    let pts = local.iter().map(|q| [wrap(q[0] + PI), wrap(q[1] + PI)]).collect();
    Ok((origin, CurvePolyline::new(CurveLabel::Phi1PiLoop, pts, true)))
}

fn wrap(x: f64) -> f64 {
    if x > PI {
        x - 2.0 * PI
    } else {
        x
    }
}

/// The branches of `F = 0` and `G = 0` in the `(a, b)` square, each with
/// `n_points` vertices: `Gamma1_1` (image of the origin loop), `Gamma1_2`
/// (through the origin), `Gamma2_2` (the graph `b = B_G(a)`) and, when present,
/// `Gamma2_1` (the other branch of `G = 0`).
pub fn gamma_curves(p: &Params, n_points: usize) -> Result<Vec<CurvePolyline>> {
    let mut out = Vec::new();
    let f_ab = |x: [f64; 2]| {
        let ab = AB::new(x[0], x[1]);
        (crate::phase::f_value(p, ab), crate::phase::f_grad_ab(p, ab))
    };
    for (sigma, label) in [(1.0, CurveLabel::Gamma1_1), (-1.0, CurveLabel::Gamma1_2)] {
        if sigma > 0.0 && p.wave_mode() {
            out.push(CurvePolyline::new(label, vec![[1.0, 1.0]; n_points], false));
            continue;
        }
        let q = trace_quarter(p, sigma)?;
        let pts: Vec<[f64; 2]> = q.pts.iter().map(|q| [sigma * q[0].cos(), sigma * q[1].cos()]).collect();
        let pts = resample(&[Piece { pts }], n_points, &f_ab, false)?;
        out.push(CurvePolyline::new(label, pts, false));
    }

    let g_ab = |x: [f64; 2]| {
        let ab = AB::new(x[0], x[1]);
        (g_value(p, ab), g_grad_ab(p, ab))
    };
    let dense: Vec<[f64; 2]> = (0..=20_000)
        .filter_map(|j| {
            let a = -1.0 + j as f64 / 10_000.0;
            solve_bg(p, a).map(|b| [a, b])
        })
        .collect();
    if dense.len() >= 2 {
        let pts = resample(&[Piece { pts: dense }], n_points, &g_ab, false)?;
        out.push(CurvePolyline::new(CurveLabel::Gamma2_2, pts, false));
    }
    if let Some(pts) = trace_gamma2_1(p, &g_ab)? {
        let pts = resample(&[Piece { pts }], n_points, &g_ab, false)?;
        out.push(CurvePolyline::new(CurveLabel::Gamma2_1, pts, false));
    }
    Ok(out)
}

/// The branch of `G = 0` away from the origin, traced between its two exits
/// from the square on the `a = -1` and `b = -1` edges.
fn trace_gamma2_1(p: &Params, g_ab: &Implicit<'_>) -> Result<Option<Vec<[f64; 2]>>> {
    let edge = |b: f64| g_value(p, AB::new(-1.0, b));
    let mut start = None;
    let m = 4000;
    for j in 0..m {
        let (b0, b1) = (-1.0 + j as f64 / m as f64, -1.0 + (j + 1) as f64 / m as f64);
        if b1 > 0.0 {
            break;
        }
        if edge(b0).signum() != edge(b1).signum() {
            let b = crate::roots::bracketed(edge, b0, b1, 1e-15)?;
            start = Some([-1.0, b]);
            break;
        }
    }
    let Some(start) = start else { return Ok(None) };
    let inside = |q: [f64; 2]| q[0] < -1.0 || q[1] < -1.0 || q[0] > 1.0 || q[1] > 1.0;
    let mut pts = continuation(g_ab, start, [1.0, 0.0], 2e-3, &inside)?;
    // close onto the square's edge
    let last = *pts.last().unwrap();
    if last[1] < -0.99 {
        let lo = g_value(p, AB::new(last[0], -1.0));
        if let Ok(a) = crate::roots::bracketed(|a| g_value(p, AB::new(a, -1.0)), last[0] - 0.01, last[0] + 0.01, 1e-15)
        {
            pts.push([a, -1.0]);
        } else if lo.abs() < 1e-12 {
            pts.push([last[0], -1.0]);
        }
    }
    Ok((pts.len() >= 2).then_some(pts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::singular::kstar_points;

    fn params(w: f64, l1: f64, l2: f64) -> Params {
        Params::new(w, l1, l2).unwrap()
    }

    #[test]
    fn polyline_queries() {
        let sq = CurvePolyline::new(
            CurveLabel::Psi1,
            vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]],
            true,
        );
        assert_eq!(sq.winding_number([0.0, 0.0]), 1);
        assert_eq!(sq.winding_number([2.0, 0.0]), 0);
        assert!((sq.distance_to([3.0, 0.0]) - 2.0).abs() < 1e-15);
        assert!((sq.length() - 8.0).abs() < 1e-15);
        assert!(sq.cusp_vertices().is_empty());
    }

    #[test]
    fn allocation_sums() {
        let c = allocate(&[1.0, 2.0, 0.001, 3.0], 101);
        assert_eq!(c.iter().sum::<usize>(), 101);
        assert!(c.iter().all(|&x| x >= 1));
    }

    #[test]
    fn loops_lie_on_curve_and_hit_kstar() {
        for p in [params(1.0, 1.0, 1.0), params(1.0, 1.0, 2.0), params(0.3, 2.5, 0.7)] {
            let (o, pi) = trace_phi1(&p, 256).unwrap();
            assert_eq!(o.len(), 256);
            assert_eq!(pi.len(), 256);
            for c in [&o, &pi] {
                for q in &c.points {
                    let f = crate::phase::f_value(&p, AB::new(q[0].cos(), q[1].cos()));
                    assert!(f.abs() < 1e-10, "{q:?} {f}");
                }
            }
            for k in kstar_points(&p).unwrap() {
                let d = pi.points.iter().map(|q| (q[0] - k.k1).hypot(q[1] - k.k2)).fold(f64::INFINITY, f64::min);
                assert!(d < 1e-12, "{k:?} missing, {d}");
            }
        }
    }

    #[test]
    fn equal_couplings_give_symmetric_loops() {
        let p = params(1.0, 1.3, 1.3);
        let (o, _) = trace_phi1(&p, 128).unwrap();
        for q in &o.points {
            let d = o.distance_to([q[1], q[0]]);
            assert!(d < 1e-3);
        }
    }

    #[test]
    fn gamma_branches_satisfy_equations() {
        let p = params(1.0, 1.0, 1.0);
        let curves = gamma_curves(&p, 200).unwrap();
        let labels: Vec<_> = curves.iter().map(|c| c.label).collect();
        assert_eq!(labels.len(), 4, "{labels:?}");
        for c in &curves {
            assert_eq!(c.len(), 200);
            for q in &c.points {
                let ab = AB::new(q[0], q[1]);
                let r = match c.label {
                    CurveLabel::Gamma1_1 | CurveLabel::Gamma1_2 => crate::phase::f_value(&p, ab),
                    _ => g_value(&p, ab),
                };
                assert!(r.abs() < 1e-10, "{} {q:?} {r}", c.label);
            }
        }
    }
}
