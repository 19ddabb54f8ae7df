//! The propagator kernels
//!
//! ```text
//! H0(t, x)  = (2 pi)^-2 Re  ∫ e^{i(k.x - t gamma)} dk
//! H-1(t, x) = (2 pi)^-2 Im  ∫ gamma^-1 e^{i(k.x - t gamma)} dk
//! H1(t, x)  = (2 pi)^-2 Im  ∫ gamma e^{i(k.x - t gamma)} dk
//! ```
//!
//! by trapezoidal quadrature on the torus, refined by grid doubling.
//!
//! The integrand is even in `k1` and `k2` separately, so single points are
//! summed over the quarter grid `[0, pi]^2` and windows are computed with one
//! 2-D FFT. When `omega = 0` the integrand is not smooth at `k = 0`; a smooth
//! radial cutoff splits off a neighbourhood of the origin, which is integrated
//! in polar coordinates where the singularity disappears.

use std::f64::consts::PI;
use std::io::{Read, Write};

use dashmap::DashMap;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::fft2::fft2;
use crate::velocity::max_group_speed;
use crate::Params;

/// Refinement stops once successive resolutions agree to this (absolute).
pub const CONVERGENCE_TOL: f64 = 1e-9;
/// Default cap on the quadrature grid size.
pub const DEFAULT_MAX_GRID: usize = 1 << 14;
/// Distance kept between the light cone and the nearest periodic image.
const ALIAS_MARGIN: f64 = 64.0;
const GL_ORDER: usize = 16;

/// Inclusive integer rectangle `[x1_min, x1_max] x [x2_min, x2_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub x1_min: i64,
    pub x1_max: i64,
    pub x2_min: i64,
    pub x2_max: i64,
}

impl Window {
    pub fn new(x1_min: i64, x1_max: i64, x2_min: i64, x2_max: i64) -> Result<Self> {
        if x1_min > x1_max || x2_min > x2_max {
            return Err(Error::InvalidParams(format!("empty window [{x1_min},{x1_max}]x[{x2_min},{x2_max}]")));
        }
        Ok(Self { x1_min, x1_max, x2_min, x2_max })
    }

    /// `[-r, r]^2`.
    pub fn square(r: i64) -> Self {
        let r = r.abs();
        Self { x1_min: -r, x1_max: r, x2_min: -r, x2_max: r }
    }

    pub fn width(&self) -> usize {
        (self.x1_max - self.x1_min + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.x2_max - self.x2_min + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: [i64; 2]) -> bool {
        (self.x1_min..=self.x1_max).contains(&x[0]) && (self.x2_min..=self.x2_max).contains(&x[1])
    }

    /// Row-major position of `x` (`x1` outer).
    pub fn index(&self, x: [i64; 2]) -> Option<usize> {
        self.contains(x)
            .then(|| (x[0] - self.x1_min) as usize * self.height() + (x[1] - self.x2_min) as usize)
    }

    /// Points in row-major order (`x1` outer).
    pub fn points(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        (self.x1_min..=self.x1_max).flat_map(move |a| (self.x2_min..=self.x2_max).map(move |b| [a, b]))
    }

    /// `max |x|_inf` over the window.
    pub fn sup_radius(&self) -> i64 {
        [self.x1_min, self.x1_max, self.x2_min, self.x2_max].iter().map(|v| v.abs()).max().unwrap()
    }
}

/// Kernel values over a window.
#[derive(Clone, Debug)]
pub struct PropagatorField {
    pub params: Params,
    pub m: i32,
    pub t: f64,
    pub window: Window,
    /// Row-major, `x1` outer.
    pub values: Vec<f64>,
    pub grid_n: usize,
}

const MAGIC: &[u8; 4] = b"KGF1";

impl PropagatorField {
    pub fn get(&self, x: [i64; 2]) -> Option<f64> {
        self.window.index(x).map(|i| self.values[i])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest deviation from evenness `H(x) = H(-x)` over window points whose
    /// reflection is also in the window.
    pub fn parity_defect(&self) -> f64 {
        self.window
            .points()
            .filter_map(|x| Some((self.get(x)? - self.get([-x[0], -x[1]])?).abs()))
            .fold(0.0, f64::max)
    }

    /// CSV with header `x1,x2,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x1,x2,value")?;
        for (x, v) in self.window.points().zip(&self.values) {
            writeln!(w, "{},{},{:.16e}", x[0], x[1], v)?;
        }
        Ok(())
    }

    /// 32-byte header (`KGF1`, `m: i32`, `t: f64`, bounds as four `i16`,
    /// `grid_n: u32`, 4 reserved bytes) then the values as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let b = &self.window;
        let mut header = Vec::with_capacity(32);
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&self.m.to_le_bytes());
        header.extend_from_slice(&self.t.to_le_bytes());
        for v in [b.x1_min, b.x1_max, b.x2_min, b.x2_max] {
            let v = i16::try_from(v).map_err(|_| Error::Format(format!("window bound {v} does not fit in i16")))?;
            header.extend_from_slice(&v.to_le_bytes());
        }
        let n = u32::try_from(self.grid_n).map_err(|_| Error::Format("grid size does not fit in u32".into()))?;
        header.extend_from_slice(&n.to_le_bytes());
        header.extend_from_slice(&[0; 4]);
        w.write_all(&header)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a binary dump; the parameters are not stored in the file.
    pub fn read_binary<R: Read>(params: Params, mut r: R) -> Result<Self> {
        let mut h = [0u8; 32];
        r.read_exact(&mut h)?;
        if &h[0..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let m = i32::from_le_bytes(h[4..8].try_into().unwrap());
        let t = f64::from_le_bytes(h[8..16].try_into().unwrap());
        let b: Vec<i64> = (0..4).map(|i| i16::from_le_bytes([h[16 + 2 * i], h[17 + 2 * i]]) as i64).collect();
        let grid_n = u32::from_le_bytes(h[24..28].try_into().unwrap()) as usize;
        let window = Window::new(b[0], b[1], b[2], b[3])?;
        let mut buf = vec![0u8; 8 * window.len()];
        r.read_exact(&mut buf)?;
        let values = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { params, m, t, window, values, grid_n })
    }
}

/// `gamma^m e^{-i t gamma}` reduced to the part the kernel keeps:
/// the real part for `m = 0`, the imaginary part otherwise.
#[inline]
fn weight(m: i32, g: f64, t: f64) -> f64 {
    let (s, c) = (t * g).sin_cos();
    match m {
        0 => c,
        1 => -g * s,
        _ => {
            if g == 0.0 {
                -t
            } else {
                -s / g
            }
        }
    }
}

/// `4 sin^2(k / 2) = 2 (1 - cos k)` without cancellation near `k = 0`.
#[inline]
fn versine2(k: f64) -> f64 {
    let s = (0.5 * k).sin();
    4.0 * s * s
}

/// Smooth cutoff: 1 for `r <= rho / 2`, 0 for `r >= rho`.
fn chi(r: f64, rho: f64) -> f64 {
    let s = ((r - 0.5 * rho) / (0.5 * rho)).clamp(0.0, 1.0);
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    f(1.0 - s) / (f(1.0 - s) + f(s))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn check_m(m: i32) -> Result<()> {
    if (-1..=1).contains(&m) {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("kernel index m = {m} not in {{-1, 0, 1}}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    params: [u64; 3],
    m: i32,
    t: u64,
    x: [i64; 2],
}

/// Kernel evaluator for one parameter set, with a concurrent value cache.
#[derive(Debug)]
pub struct KernelEngine {
    params: Params,
    vmax: f64,
    max_grid: usize,
    /// Radius of the polar patch at `k = 0` in the massless case.
    rho: f64,
    cache: DashMap<CacheKey, (f64, usize)>,
}

impl KernelEngine {
    pub fn new(params: Params) -> Self {
        let rho = 0.5 * params.lambda1().min(params.lambda2()).sqrt();
        Self { params, vmax: max_group_speed(&params), max_grid: DEFAULT_MAX_GRID, rho, cache: DashMap::new() }
    }

    pub fn with_max_grid(mut self, max_grid: usize) -> Self {
        self.max_grid = max_grid;
        self
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn max_speed(&self) -> f64 {
        self.vmax
    }

    pub fn max_grid(&self) -> usize {
        self.max_grid
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    fn key(&self, m: i32, t: f64, x: [i64; 2]) -> CacheKey {
        let p = &self.params;
        CacheKey { params: [p.omega().to_bits(), p.lambda1().to_bits(), p.lambda2().to_bits()], m, t: t.to_bits(), x }
    }

    /// First grid size tried for points within sup-radius `r` at time `t`.
    pub fn initial_grid(&self, t: f64, r: i64) -> usize {
        let need = (self.vmax * t.abs() + r as f64 + ALIAS_MARGIN).max(2.0 * r as f64 + 2.0).max(64.0);
        (need.ceil() as usize).next_power_of_two()
    }

    /// Evaluates at doubling resolutions until two successive results agree.
    fn refine<F>(&self, n0: usize, mut eval: F) -> Result<(Vec<f64>, usize)>
    where
        F: FnMut(usize, u32) -> Vec<f64>,
    {
        if n0 > self.max_grid {
            return Err(Error::ResolutionCap { needed: n0, cap: self.max_grid });
        }
        let mut n = n0;
        let mut level = 0;
        let mut prev = eval(n, level);
        loop {
            n *= 2;
            level += 1;
            if n > self.max_grid {
                return Err(Error::ResolutionCap { needed: n, cap: self.max_grid });
            }
            let cur = eval(n, level);
            let diff = prev.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if diff < CONVERGENCE_TOL {
                return Ok((cur, n));
            }
            prev = cur;
        }
    }

    /// `H^(m)_t(x)`.
    pub fn kernel(&self, m: i32, t: f64, x: [i64; 2]) -> Result<f64> {
        Ok(self.kernels(m, t, &[x])?[0])
    }

    /// `H^(m)_t` at several points, sharing one quadrature grid per resolution.
    pub fn kernels(&self, m: i32, t: f64, xs: &[[i64; 2]]) -> Result<Vec<f64>> {
        check_m(m)?;
        if !t.is_finite() {
            return Err(Error::InvalidParams(format!("t = {t}")));
        }
        let missing: Vec<[i64; 2]> = xs.iter().copied().filter(|&x| !self.cache.contains_key(&self.key(m, t, x))).collect();
        if !missing.is_empty() {
            let r = missing.iter().map(|x| x[0].abs().max(x[1].abs())).max().unwrap();
            let (vals, n) = self.refine(self.initial_grid(t, r), |n, level| self.point_values(m, t, &missing, n, level))?;
            for (x, v) in missing.iter().zip(vals) {
                self.cache.insert(self.key(m, t, *x), (v, n));
            }
        }
        Ok(xs.iter().map(|&x| self.cache.get(&self.key(m, t, x)).unwrap().0).collect())
    }

    /// Values at one fixed resolution `n` (no refinement, no cache).
    pub fn kernels_at_resolution(&self, m: i32, t: f64, xs: &[[i64; 2]], n: usize) -> Result<Vec<f64>> {
        check_m(m)?;
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidParams(format!("grid size {n} must be even and >= 4")));
        }
        Ok(self.point_values(m, t, xs, n, 0))
    }

    fn point_values(&self, m: i32, t: f64, xs: &[[i64; 2]], n: usize, level: u32) -> Vec<f64> {
        let mut v = self.quarter_grid_sum(m, t, xs, n);
        if self.params.wave_mode() {
            for (a, b) in v.iter_mut().zip(self.polar_patch(m, t, xs, level)) {
                *a += b;
            }
        }
        v
    }

    /// Trapezoidal sum over `[0, pi]^2` with weights 1, 2, ..., 2, 1 per axis.
    fn quarter_grid_sum(&self, m: i32, t: f64, xs: &[[i64; 2]], n: usize) -> Vec<f64> {
        let p = &self.params;
        let h = n / 2;
        let k = |i: usize| 2.0 * PI * i as f64 / n as f64;
        let w = |i: usize| if i == 0 || i == h { 1.0 } else { 2.0 };
        let row_base: Vec<f64> = (0..=h).map(|i| p.omega().powi(2) + p.lambda1() * versine2(k(i))).collect();
        let col_base: Vec<f64> = (0..=h).map(|j| p.lambda2() * versine2(k(j))).collect();
        // exact phase reduction keeps cos(k x) accurate for large x
        let trig = |j: usize, x: i64| w(j) * k((j as i64 * x).rem_euclid(n as i64) as usize).cos();
        let c1: Vec<Vec<f64>> = xs.iter().map(|x| (0..=h).map(|i| trig(i, x[0])).collect()).collect();
        let c2: Vec<Vec<f64>> = xs.iter().map(|x| (0..=h).map(|j| trig(j, x[1])).collect()).collect();
        let wave = p.wave_mode();
        let (sl1, sl2) = (p.lambda1().sqrt(), p.lambda2().sqrt());
        let rows: Vec<Vec<f64>> = (0..=h)
            .into_par_iter()
            .map(|i| {
                let mut acc = vec![0.0; xs.len()];
                for j in 0..=h {
                    let g = (row_base[i] + col_base[j]).sqrt();
                    let mut val = weight(m, g, t);
                    if wave {
                        let cut = 1.0 - chi((sl1 * k(i)).hypot(sl2 * k(j)), self.rho);
                        if cut == 0.0 {
                            continue;
                        }
                        val *= cut;
                    }
                    for (a, c) in acc.iter_mut().zip(&c2) {
                        *a += c[j] * val;
                    }
                }
                acc.iter().zip(&c1).map(|(a, c)| a * c[i]).collect()
            })
            .collect();
        let scale = 1.0 / (n as f64 * n as f64);
        (0..xs.len()).map(|q| rows.iter().map(|r| r[q]).sum::<f64>() * scale).collect()
    }

    /// Integral of `chi(r) gamma^m e^{i(k.x - t gamma)}` over the patch around
    /// `k = 0`, in coordinates `k = (r cos th / sqrt(l1), r sin th / sqrt(l2))`.
    fn polar_patch(&self, m: i32, t: f64, xs: &[[i64; 2]], level: u32) -> Vec<f64> {
        let p = &self.params;
        let (sl1, sl2) = (p.lambda1().sqrt(), p.lambda2().sqrt());
        let sl = sl1.min(sl2);
        let rho = self.rho;
        let radius = xs.iter().map(|x| (x[0] as f64).hypot(x[1] as f64)).fold(0.0, f64::max);
        let scale = 1usize << level;
        let freq = 2.0 * t.abs() + radius / sl + 10.0;
        let panels = ((rho * freq / 3.0).ceil() as usize + 2) * scale;
        // full-circle node count, a multiple of 8
        let bandwidth = 1.5 * (rho * radius / sl + t.abs() * rho.powi(3) + 20.0);
        let m_theta = 8 * ((bandwidth / 8.0).ceil() as usize) * scale;
        let (gx, gw) = gauss_legendre(GL_ORDER);
        let nodes: Vec<(f64, f64)> = (0..panels)
            .flat_map(|q| {
                let (a, b) = (rho * q as f64 / panels as f64, rho * (q + 1) as f64 / panels as f64);
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                gx.iter().zip(&gw).map(move |(x, w)| (mid + half * x, half * w)).collect::<Vec<_>>()
            })
            .collect();
        let quarter = m_theta / 4;
        let dtheta = 2.0 * PI / m_theta as f64;
        let jac = 1.0 / (sl1 * sl2);
        let parts: Vec<Vec<f64>> = nodes
            .par_iter()
            .map(|&(r, wr)| {
                let mut acc = vec![0.0; xs.len()];
                let c = chi(r, rho);
                if c == 0.0 {
                    return acc;
                }
                for j in 0..=quarter {
                    let th = j as f64 * dtheta;
                    let wt = if j == 0 || j == quarter { 0.5 } else { 1.0 };
                    let (s, co) = th.sin_cos();
                    let (k1, k2) = (r * co / sl1, r * s / sl2);
                    let g = (p.lambda1() * versine2(k1) + p.lambda2() * versine2(k2)).sqrt();
                    let val = c * weight(m, g, t) * r * jac * wr * wt;
                    for (a, x) in acc.iter_mut().zip(xs) {
                        *a += val * (k1 * x[0] as f64).cos() * (k2 * x[1] as f64).cos();
                    }
                }
                acc
            })
            .collect();
        // four symmetric quarters of the circle, then the (2 pi)^-2 normalization
        let norm = 4.0 * dtheta / (4.0 * PI * PI);
        (0..xs.len()).map(|q| parts.iter().map(|v| v[q]).sum::<f64>() * norm).collect()
    }

    /// `H^(m)_t` on a window.
    pub fn field(&self, m: i32, t: f64, window: Window) -> Result<PropagatorField> {
        Ok(self.fields_for(&[m], t, window)?.pop().unwrap())
    }

    /// `[H^(-1), H^(0), H^(1)]` on a window from shared grids.
    pub fn fields(&self, t: f64, window: Window) -> Result<[PropagatorField; 3]> {
        let v = self.fields_for(&[-1, 0, 1], t, window)?;
        Ok(v.try_into().unwrap())
    }

    fn fields_for(&self, ms: &[i32], t: f64, window: Window) -> Result<Vec<PropagatorField>> {
        for &m in ms {
            check_m(m)?;
        }
        let len = window.len();
        let n0 = self.initial_grid(t, window.sup_radius());
        let (flat, n) = self.refine(n0, |n, level| {
            let mut out = self.fft_fields(ms, t, window, n);
            if self.params.wave_mode() {
                let pts: Vec<[i64; 2]> = window.points().collect();
                for (q, &m) in ms.iter().enumerate() {
                    let patch = self.polar_patch(m, t, &pts, level);
                    for (a, b) in out[q * len..(q + 1) * len].iter_mut().zip(patch) {
                        *a += b;
                    }
                }
            }
            out
        })?;
        Ok(ms
            .iter()
            .enumerate()
            .map(|(q, &m)| PropagatorField {
                params: self.params,
                m,
                t,
                window,
                values: flat[q * len..(q + 1) * len].to_vec(),
                grid_n: n,
            })
            .collect())
    }

    /// Window values for each `m` at resolution `n`, concatenated. Two real
    /// even integrands share one complex transform.
    fn fft_fields(&self, ms: &[i32], t: f64, window: Window, n: usize) -> Vec<f64> {
        let p = &self.params;
        let k = |i: usize| 2.0 * PI * i as f64 / n as f64;
        let row_base: Vec<f64> = (0..n).map(|i| p.omega().powi(2) + p.lambda1() * versine2(k(i))).collect();
        let col_base: Vec<f64> = (0..n).map(|j| p.lambda2() * versine2(k(j))).collect();
        let wave = p.wave_mode();
        let (sl1, sl2) = (p.lambda1().sqrt(), p.lambda2().sqrt());
        // signed frequency for the cutoff radius
        let kf = |i: usize| if i <= n / 2 { k(i) } else { k(i) - 2.0 * PI };
        let scale = 1.0 / (n as f64 * n as f64);
        let mut out = vec![0.0; ms.len() * window.len()];
        for (pair_idx, pair) in ms.chunks(2).enumerate() {
            let mut data = vec![Complex64::new(0.0, 0.0); n * n];
            data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                for (j, z) in row.iter_mut().enumerate() {
                    let g = (row_base[i] + col_base[j]).sqrt();
                    let cut = if wave { 1.0 - chi((sl1 * kf(i)).hypot(sl2 * kf(j)), self.rho) } else { 1.0 };
                    if cut == 0.0 {
                        continue;
                    }
                    let re = weight(pair[0], g, t) * cut;
                    let im = pair.get(1).map_or(0.0, |&m| weight(m, g, t) * cut);
                    *z = Complex64::new(re, im);
                }
            });
            fft2(&mut data, n, FftDirection::Inverse);
            let idx = |x: i64| x.rem_euclid(n as i64) as usize;
            for (q, &_m) in pair.iter().enumerate() {
                let slot = pair_idx * 2 + q;
                for (s, x) in window.points().enumerate() {
                    let z = data[idx(x[0]) * n + idx(x[1])];
                    out[slot * window.len() + s] = if q == 0 { z.re } else { z.im } * scale;
                }
            }
        }
        out
    }
}

/// `H^(m)_t(x)` with a fresh engine.
pub fn kernel(params: &Params, m: i32, t: f64, x: [i64; 2]) -> Result<f64> {
    KernelEngine::new(*params).kernel(m, t, x)
}

/// `H^(m)_t` over a window with a fresh engine.
pub fn kernel_field(params: &Params, m: i32, t: f64, window: Window) -> Result<PropagatorField> {
    KernelEngine::new(*params).field(m, t, window)
}
