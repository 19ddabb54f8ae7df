//! Harmonic-lattice layer: the real-linear one-particle dynamics
//!
//! ```text
//! T_t f = f * (H0 - (i/2)(H-1 + H1)) + conj(f) * ((i/2)(H1 - H-1))
//! ```
//!
//! the symplectic form `sigma(f, g) = Im <f, g>` (conjugate-linear in the
//! first slot), and the Weyl commutator norm `|1 - e^{i sigma(T_t f, g)}|`.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::decay::{fit_power_samples, DecaySample, ExpectedDecay, FitReport, EXPONENT_SLACK};
use crate::error::{Error, Result};
use crate::propagator::{KernelEngine, PropagatorField, Window};
use crate::velocity::{Region, VelocityAtlas};

/// Kernel values below this are dropped from the convolutions.
pub const KERNEL_CUTOFF: f64 = 1e-12;
/// Largest kernel value tolerated on the boundary of the truncation window.
pub const BOUNDARY_TOL: f64 = 1e-10;
/// Default truncation radius is `vmax t + TRUNCATION_MARGIN`.
pub const TRUNCATION_MARGIN: f64 = 40.0;

/// Finitely supported `f: Z^2 -> C` with no stored zeros.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComplexLatticeFunction {
    values: BTreeMap<[i64; 2], Complex64>,
}

impl ComplexLatticeFunction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn delta(x: [i64; 2], z: Complex64) -> Self {
        let mut f = Self::new();
        f.insert(x, z);
        f
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = ([i64; 2], Complex64)>) -> Self {
        let mut f = Self::new();
        for (x, z) in pairs {
            f.add_at(x, z);
        }
        f
    }

    /// Sets `f(x) = z`; a zero removes the point.
    pub fn insert(&mut self, x: [i64; 2], z: Complex64) {
        if z == Complex64::new(0.0, 0.0) {
            self.values.remove(&x);
        } else {
            self.values.insert(x, z);
        }
    }

    pub fn add_at(&mut self, x: [i64; 2], z: Complex64) {
        let v = self.get(x) + z;
        self.insert(x, v);
    }

    pub fn get(&self, x: [i64; 2]) -> Complex64 {
        self.values.get(&x).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([i64; 2], Complex64)> + '_ {
        self.values.iter().map(|(x, z)| (*x, *z))
    }

    pub fn support(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        self.values.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm1(&self) -> f64 {
        self.values.values().map(|z| z.norm()).sum()
    }

    pub fn conj(&self) -> Self {
        Self { values: self.values.iter().map(|(x, z)| (*x, z.conj())).collect() }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_pairs(self.iter().map(|(x, z)| (x, z * c)))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_pairs(self.iter().chain(other.iter()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// `max |f(x) - g(x)|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).values.values().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `Im <f, g> = Im sum conj(f(x)) g(x)`.
pub fn symplectic_form(f: &ComplexLatticeFunction, g: &ComplexLatticeFunction) -> f64 {
    f.iter().map(|(x, z)| (z.conj() * g.get(x)).im).sum()
}

/// The two convolution kernels `A = H0 - (i/2)(H-1 + H1)` and
/// `B = (i/2)(H1 - H-1)` from the three kernel values.
#[inline]
fn ab_kernels(hm: f64, h0: f64, hp: f64) -> (Complex64, Complex64) {
    (Complex64::new(h0, -0.5 * (hm + hp)), Complex64::new(0.0, 0.5 * (hp - hm)))
}

/// `T_t f` computed by convolution with kernel fields on `[-R, R]^2`,
/// `R = truncation_radius` (default `vmax t + 40`).
pub fn apply_tt(
    engine: &KernelEngine,
    f: &ComplexLatticeFunction,
    t: f64,
    truncation_radius: Option<f64>,
) -> Result<ComplexLatticeFunction> {
    // H0 is exactly delta_0 and H-1, H1 vanish at t = 0
    if f.is_empty() || t == 0.0 {
        return Ok(f.clone());
    }
    let r = truncation_radius.unwrap_or(engine.max_speed() * t.abs() + TRUNCATION_MARGIN).ceil() as i64;
    let window = Window::square(r);
    let fields = engine.fields(t, window)?;
    let boundary = boundary_max(&fields, window);
    if boundary > BOUNDARY_TOL {
        return Err(Error::TruncationTooSmall { boundary });
    }
    let taps: Vec<([i64; 2], Complex64, Complex64)> = window
        .points()
        .enumerate()
        .filter_map(|(i, z)| {
            let h = [fields[0].values[i], fields[1].values[i], fields[2].values[i]];
            if h.iter().all(|v| v.abs() < KERNEL_CUTOFF) {
                return None;
            }
            let (a, b) = ab_kernels(h[0], h[1], h[2]);
            Some((z, a, b))
        })
        .collect();
    let lo = [f.support().map(|x| x[0]).min().unwrap() - r, f.support().map(|x| x[1]).min().unwrap() - r];
    let hi = [f.support().map(|x| x[0]).max().unwrap() + r, f.support().map(|x| x[1]).max().unwrap() + r];
    let (w, h) = ((hi[0] - lo[0] + 1) as usize, (hi[1] - lo[1] + 1) as usize);
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for (x, fx) in f.iter() {
        let fc = fx.conj();
        for &(z, a, b) in &taps {
            let y = [x[0] + z[0] - lo[0], x[1] + z[1] - lo[1]];
            out[y[0] as usize * h + y[1] as usize] += fx * a + fc * b;
        }
    }
    Ok(ComplexLatticeFunction::from_pairs(
        out.into_iter().enumerate().map(|(i, v)| ([lo[0] + (i / h) as i64, lo[1] + (i % h) as i64], v)),
    ))
}

fn boundary_max(fields: &[PropagatorField; 3], w: Window) -> f64 {
    w.points()
        .enumerate()
        .filter(|(_, x)| x[0] == w.x1_min || x[0] == w.x1_max || x[1] == w.x2_min || x[1] == w.x2_max)
        .map(|(i, _)| fields.iter().map(|f| f.values[i].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(T_t f)(y)` at the given points only, from kernel values at the
/// differences `y - x`; no truncation is involved.
pub fn apply_tt_at(
    engine: &KernelEngine,
    f: &ComplexLatticeFunction,
    t: f64,
    points: &[[i64; 2]],
) -> Result<Vec<Complex64>> {
    if t == 0.0 {
        return Ok(points.iter().map(|&y| f.get(y)).collect());
    }
    let mut diffs: Vec<[i64; 2]> =
        points.iter().flat_map(|y| f.support().map(move |x| [y[0] - x[0], y[1] - x[1]])).collect();
    diffs.sort_unstable();
    diffs.dedup();
    let h: Vec<Vec<f64>> = [-1, 0, 1].iter().map(|&m| engine.kernels(m, t, &diffs)).collect::<Result<_>>()?;
    let at = |d: [i64; 2]| {
        let i = diffs.binary_search(&d).unwrap();
        ab_kernels(h[0][i], h[1][i], h[2][i])
    };
    Ok(points
        .iter()
        .map(|y| {
            f.iter()
                .map(|(x, fx)| {
                    let (a, b) = at([y[0] - x[0], y[1] - x[1]]);
                    fx * a + fx.conj() * b
                })
                .sum()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeylCommutatorResult {
    /// `Im <T_t f, g>`.
    pub symplectic_phase: f64,
    /// `|1 - e^{i phase}|`.
    pub norm: f64,
}

impl WeylCommutatorResult {
    pub fn from_phase(theta: f64) -> Self {
        Self { symplectic_phase: theta, norm: 2.0 * (0.5 * theta).sin().abs() }
    }

    /// `norm <= min(2, |phase|)`.
    pub fn obeys_cap(&self) -> bool {
        self.norm <= 2.0_f64.min(self.symplectic_phase.abs())
    }
}

/// `|| [tau_t(W(f)), W(g)] || = |1 - e^{i Im <T_t f, g>}|`.
pub fn commutator_norm(
    engine: &KernelEngine,
    f: &ComplexLatticeFunction,
    g: &ComplexLatticeFunction,
    t: f64,
) -> Result<WeylCommutatorResult> {
    let pts: Vec<[i64; 2]> = g.support().collect();
    let tf = apply_tt_at(engine, f, t, &pts)?;
    let theta = pts.iter().zip(&tf).map(|(y, v)| (v.conj() * g.get(*y)).im).sum();
    Ok(WeylCommutatorResult::from_phase(theta))
}

/// `sum_{x,y} |f(x)| |g(y)| sum_m |H^(m)_t(x - y)|`, which dominates the norm.
pub fn kernel_bound(
    engine: &KernelEngine,
    f: &ComplexLatticeFunction,
    g: &ComplexLatticeFunction,
    t: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (x, fx) in f.iter() {
        let ds: Vec<[i64; 2]> = g.support().map(|y| [x[0] - y[0], x[1] - y[1]]).collect();
        for m in -1..=1 {
            let h = engine.kernels(m, t, &ds)?;
            total += g.iter().zip(h).map(|((_, gy), h)| fx.norm() * gy.norm() * h.abs()).sum::<f64>();
        }
    }
    Ok(total)
}

#[derive(Clone, Debug)]
pub struct LrSample {
    pub t: f64,
    pub result: WeylCommutatorResult,
    /// Slowest-decaying region met by `(X - Y) / t`.
    pub region: Region,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct LrReport {
    pub samples: Vec<LrSample>,
    /// Envelope fit of the norms (absent with fewer than four dyadic windows).
    pub fit: Option<FitReport>,
    /// `max norm t^{3/4} / (|f|_1 |g|_1)`.
    pub constant: f64,
    pub expected: ExpectedDecay,
    pub passed: bool,
}

/// Weyl commutator norms over `t_grid` checked against the bound that applies
/// to the region of `X - Y`: `t^{-3/4}` globally, `t^{-5/6}` away from the
/// cusps, `t^{-1}` away from both caustics, and
/// `C_mu |f|_1 |g|_1 e^{-(dist(X, Y) - v_1 t)}` (with `C_mu = 3`, one per
/// kernel) outside the light cone.
pub fn lr_verify(
    engine: &KernelEngine,
    atlas: &VelocityAtlas,
    f: &ComplexLatticeFunction,
    g: &ComplexLatticeFunction,
    t_grid: &[f64],
    delta: f64,
) -> Result<LrReport> {
    if delta <= 0.0 || f.is_empty() || g.is_empty() {
        return Err(Error::InvalidParams("lr_verify needs delta > 0 and nonempty supports".into()));
    }
    let diffs: Vec<[i64; 2]> =
        f.support().flat_map(|x| g.support().map(move |y| [x[0] - y[0], x[1] - y[1]])).collect();
    let dist = diffs.iter().map(|d| (d[0] as f64).hypot(d[1] as f64)).fold(f64::INFINITY, f64::min);
    let mass = f.norm1() * g.norm1();
    let results: Vec<(f64, WeylCommutatorResult)> =
        t_grid.par_iter().map(|&t| Ok((t, commutator_norm(engine, f, g, t)?))).collect::<Result<_>>()?;
    let constant = results.iter().map(|(t, r)| r.norm * t.powf(0.75) / mass).fold(0.0, f64::max);
    let p = engine.params();
    let v1 = 1.0 + 2.0 * (p.lambda1() + p.lambda2()).sqrt() * 0.5f64.sinh();
    let mut samples = Vec::with_capacity(results.len());
    for (t, result) in results {
        let region = diffs
            .iter()
            .map(|d| atlas.classify_xt([d[0] as f64, d[1] as f64], t, delta).region)
            .min()
            .unwrap();
        let bound = match region {
            Region::Exterior => 2f64.min(3.0 * mass * (-(dist - v1 * t)).exp()),
            _ => 2f64.min(constant * mass * t.powf(-0.75)),
        };
        samples.push(LrSample { t, result, region, bound });
    }
    let weakest = samples.iter().map(|s| s.region).min().unwrap();
    let expected = match weakest {
        Region::NearV3 => ExpectedDecay::Power(0.75),
        Region::NearV2 => ExpectedDecay::Power(5.0 / 6.0),
        Region::Interior => ExpectedDecay::Power(1.0),
        Region::Exterior => ExpectedDecay::Exponential,
    };
    let series: Vec<DecaySample> =
        samples.iter().map(|s| DecaySample { t: s.t, x_used: [0, 0], value: s.result.norm }).collect();
    let fit = fit_power_samples(&series).ok();
    let capped = samples.iter().all(|s| s.result.obeys_cap() && s.result.norm <= s.bound);
    let rate_ok = match (expected, &fit) {
        (ExpectedDecay::Power(r), Some(f)) => f.exponent <= -r + EXPONENT_SLACK,
        (ExpectedDecay::Power(_), None) => true,
        (ExpectedDecay::Exponential, _) => true,
    };
    Ok(LrReport { samples, fit, constant, expected, passed: capped && rate_ok })
}

/// CSV with header `t,commutator_norm,bound_value,region_tag`.
pub fn write_lr_csv<W: Write>(report: &LrReport, mut w: W) -> Result<()> {
    writeln!(w, "t,commutator_norm,bound_value,region_tag")?;
    for s in &report.samples {
        writeln!(w, "{:.16e},{:.16e},{:.16e},{}", s.t, s.result.norm, s.bound, s.region.name())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Params;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_block(rng: &mut StdRng, origin: [i64; 2]) -> ComplexLatticeFunction {
        ComplexLatticeFunction::from_pairs((0..25).map(|i| {
            ([origin[0] + i / 5, origin[1] + i % 5], Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        }))
    }

    fn engine() -> KernelEngine {
        KernelEngine::new(Params::new(1.0, 1.0, 1.0).unwrap())
    }

    #[test]
    fn symplectic_form_conventions() {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let (f, g) = (ComplexLatticeFunction::delta([0, 0], one), ComplexLatticeFunction::delta([0, 0], i));
        assert_eq!(symplectic_form(&f, &g), 1.0);
        let mut rng = StdRng::seed_from_u64(3);
        let (a, b) = (random_block(&mut rng, [0, 0]), random_block(&mut rng, [2, 1]));
        assert!((symplectic_form(&a, &b) + symplectic_form(&b, &a)).abs() < 1e-14);
        assert_eq!(symplectic_form(&a, &a), 0.0);
    }

    #[test]
    fn no_stored_zeros() {
        let mut f = ComplexLatticeFunction::delta([1, 1], Complex64::new(2.0, 0.0));
        f.add_at([1, 1], Complex64::new(-2.0, 0.0));
        assert!(f.is_empty());
    }

    #[test]
    fn time_zero_is_identity() {
        let e = engine();
        let f = random_block(&mut StdRng::seed_from_u64(1), [-2, -2]);
        let out = apply_tt(&e, &f, 0.0, None).unwrap();
        assert!(out.max_abs_diff(&f) < 1e-12);
    }

    #[test]
    fn real_linear_not_complex_linear() {
        let e = engine();
        let mut rng = StdRng::seed_from_u64(9);
        let (f, g) = (random_block(&mut rng, [0, 0]), random_block(&mut rng, [1, -3]));
        let t = 3.0;
        let tf = apply_tt(&e, &f, t, None).unwrap();
        let tg = apply_tt(&e, &g, t, None).unwrap();
        let sum = apply_tt(&e, &f.add(&g), t, None).unwrap();
        assert!(sum.max_abs_diff(&tf.add(&tg)) < 1e-10);
        let c = Complex64::new(-1.7, 0.0);
        assert!(apply_tt(&e, &f.scale(c), t, None).unwrap().max_abs_diff(&tf.scale(c)) < 1e-10);
        let i = Complex64::new(0.0, 1.0);
        assert!(apply_tt(&e, &f.scale(i), t, None).unwrap().max_abs_diff(&tf.scale(i)) > 1e-3);
    }

    #[test]
    fn pointwise_and_convolution_paths_agree() {
        let e = engine();
        let f = random_block(&mut StdRng::seed_from_u64(5), [0, 0]);
        let full = apply_tt(&e, &f, 4.0, None).unwrap();
        let pts = [[0, 0], [3, 7], [-6, 2]];
        for (y, v) in pts.iter().zip(apply_tt_at(&e, &f, 4.0, &pts).unwrap()) {
            assert!((full.get(*y) - v).norm() < 1e-12);
        }
    }

    #[test]
    fn truncation_too_small_is_reported() {
        let e = engine();
        let f = ComplexLatticeFunction::delta([0, 0], Complex64::new(1.0, 0.0));
        assert!(matches!(apply_tt(&e, &f, 10.0, Some(3.0)), Err(Error::TruncationTooSmall { .. })));
    }

    #[test]
    fn commutator_bounds() {
        let e = engine();
        let mut rng = StdRng::seed_from_u64(11);
        let (f, g) = (random_block(&mut rng, [0, 0]), random_block(&mut rng, [3, -2]));
        for t in [0.0, 2.0, 7.5] {
            let r = commutator_norm(&e, &f, &g, t).unwrap();
            assert!(r.obeys_cap() && (0.0..=2.0).contains(&r.norm));
            assert!((r.norm - (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, r.symplectic_phase)).norm()).abs() < 1e-15);
            assert!(r.norm <= kernel_bound(&e, &f, &g, t).unwrap() + 1e-12);
        }
        let far = ComplexLatticeFunction::delta([40, 0], Complex64::new(1.0, 0.0));
        assert_eq!(commutator_norm(&e, &f, &far, 0.0).unwrap().norm, 0.0);
        assert!(commutator_norm(&e, &f, &f, 0.0).unwrap().norm < 1e-15);
    }
}
