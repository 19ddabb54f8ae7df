//! Decay measurements: kernel values along rays `x = vt`, envelope power-law
//! fits over dyadic windows, exponential fits outside the light cone, and
//! the per-region verification table.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::propagator::{KernelEngine, Window};
use crate::velocity::{Region, VelocityAtlas, VelocityPoint};
use crate::Params;

/// Values at or below this are treated as quadrature noise in exponential fits.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecaySample {
    pub t: f64,
    pub x_used: [i64; 2],
    /// `|H(t, x_used)|`.
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct DecaySeries {
    pub params: Params,
    pub m: i32,
    pub velocity: VelocityPoint,
    pub samples: Vec<DecaySample>,
    pub note: &'static str,
}

const SCAN_NOTE: &str = "x_used maximizes |H| over the lattice points within sup-distance < 1 of vt";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitMethod {
    /// Least squares of `log(envelope)` against `log t`.
    EnvelopeLogLog,
    /// Least squares of `log|value|` against a linear variable (time or distance).
    LinearInT,
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitMethod::EnvelopeLogLog => "envelope_loglog",
            FitMethod::LinearInT => "linear_in_t",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    /// Fitted slope.
    pub exponent: f64,
    /// Half-width of the 95% confidence interval of the slope.
    pub ci_halfwidth: f64,
    /// Range of the independent variable.
    pub window: (f64, f64),
    pub method: FitMethod,
    /// `exp(intercept)`.
    pub constant: f64,
    pub residual_rms: f64,
    pub points: usize,
}

/// `n` log-spaced times from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln();
    (0..n)
        .map(|j| if j + 1 == n { hi } else { lo * (r * j as f64 / (n - 1) as f64).exp() })
        .collect()
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid[0] <= 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("t grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// Lattice points within sup-distance < 1 of `c` (one per integral coordinate).
fn neighbours(c: [f64; 2]) -> Vec<[i64; 2]> {
    let opts = |v: f64| {
        let f = v.floor();
        if f == v {
            vec![f as i64]
        } else {
            vec![f as i64, f as i64 + 1]
        }
    };
    let (a, b) = (opts(c[0]), opts(c[1]));
    a.iter().flat_map(|&x| b.iter().map(move |&y| [x, y])).collect()
}

/// `|H^(m)_t|` along the ray `x = vt`.
pub fn decay_scan(engine: &KernelEngine, m: i32, v: VelocityPoint, t_grid: &[f64]) -> Result<DecaySeries> {
    check_grid(t_grid)?;
    let samples = t_grid
        .par_iter()
        .map(|&t| {
            let xs = neighbours([v[0] * t, v[1] * t]);
            let vals = engine.kernels(m, t, &xs)?;
            let (x_used, value) = xs
                .iter()
                .zip(vals)
                .map(|(x, v)| (*x, v.abs()))
                .fold(([0, 0], -1.0), |best, c| if c.1 > best.1 { c } else { best });
            Ok(DecaySample { t, x_used, value })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecaySeries { params: *engine.params(), m, velocity: v, samples, note: SCAN_NOTE })
}

/// Two-sided 97.5% Student-t quantiles for 1..=30 degrees of freedom.
const T975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
    2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];

fn t_quantile(dof: usize) -> f64 {
    T975.get(dof.wrapping_sub(1)).copied().unwrap_or(1.96)
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, ci(b), rms)`.
fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ssr: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let dof = x.len().saturating_sub(2);
    let se = if dof > 0 { (ssr / dof as f64 / sxx).sqrt() } else { f64::INFINITY };
    let ci = (t_quantile(dof) * se).max(f64::EPSILON);
    (b, a, ci, (ssr / n).sqrt())
}

/// Per dyadic window `[t0 2^j, t0 2^(j+1))` the sample with the largest value.
pub fn dyadic_envelope(samples: &[DecaySample]) -> Result<Vec<DecaySample>> {
    let t0 = samples.first().ok_or(Error::InsufficientData { needed: 4, got: 0 })?.t;
    let t1 = samples.last().unwrap().t;
    let windows = ((t1 / t0).log2() + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(windows);
    for j in 0..windows {
        let (lo, hi) = (t0 * 2f64.powi(j as i32), t0 * 2f64.powi(j as i32 + 1));
        let last = j + 1 == windows;
        let best = samples
            .iter()
            .filter(|s| s.t >= lo * (1.0 - 1e-12) && (s.t < hi || (last && s.t <= hi * (1.0 + 1e-12))))
            .max_by(|a, b| a.value.total_cmp(&b.value));
        if let Some(s) = best.filter(|s| s.value > 0.0) {
            out.push(*s);
        }
    }
    Ok(out)
}

/// Envelope power-law fit: slope of `log max|value|` per dyadic window
/// against `log t`. Needs at least four nonempty dyadic windows.
pub fn fit_power(series: &DecaySeries) -> Result<FitReport> {
    fit_power_samples(&series.samples)
}

pub fn fit_power_samples(samples: &[DecaySample]) -> Result<FitReport> {
    let env = dyadic_envelope(samples)?;
    if env.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: env.len() });
    }
    let x: Vec<f64> = env.iter().map(|s| s.t.ln()).collect();
    let y: Vec<f64> = env.iter().map(|s| s.value.ln()).collect();
    let (b, a, ci, rms) = least_squares(&x, &y);
    Ok(FitReport {
        exponent: b,
        ci_halfwidth: ci,
        window: (samples[0].t, samples.last().unwrap().t),
        method: FitMethod::EnvelopeLogLog,
        constant: a.exp(),
        residual_rms: rms,
        points: env.len(),
    })
}

/// Decay envelope `e^{-mu (|x| - v_mu t)}` with
/// `v_mu = (1 + 2 sqrt(l1 + l2) sinh(mu / 2)) / mu`.
pub fn exterior_envelope(params: &Params, mu: f64, x: [i64; 2], t: f64) -> f64 {
    let v_mu = (1.0 + 2.0 * (params.lambda1() + params.lambda2()).sqrt() * (0.5 * mu).sinh()) / mu;
    let r = (x[0] as f64).hypot(x[1] as f64);
    (-mu * (r - v_mu * t.abs())).exp()
}

#[derive(Clone, Debug)]
pub struct ExteriorSample {
    pub x: [i64; 2],
    /// `dist(x, t V1)`.
    pub dist: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct ExteriorReport {
    /// Slope of `log|H|` against `dist(x, t V1)`; the fitted rate is `-exponent`.
    pub fit: FitReport,
    /// Largest `mu` with `|H| <= e^{-mu dist}` at every sample above the noise floor.
    pub mu_bound: f64,
    /// The envelope with `mu = 1` holds at every sample.
    pub envelope_ok: bool,
    pub samples: Vec<ExteriorSample>,
}

impl ExteriorReport {
    pub fn mu(&self) -> f64 {
        -self.fit.exponent
    }
}

/// Exponential decay outside the light cone at fixed `t`: samples at integer
/// distances `s in [range.0, range.1]` along `direction`, all of which must
/// classify as exterior.
pub fn fit_exponential(
    engine: &KernelEngine,
    atlas: &VelocityAtlas,
    m: i32,
    t: f64,
    direction: [f64; 2],
    range: (f64, f64),
    delta: f64,
) -> Result<ExteriorReport> {
    let norm = direction[0].hypot(direction[1]);
    if norm == 0.0 || t <= 0.0 || range.0 > range.1 {
        return Err(Error::InvalidParams("need a nonzero direction, t > 0 and an ordered range".into()));
    }
    let u = [direction[0] / norm, direction[1] / norm];
    let mut xs: Vec<[i64; 2]> = Vec::new();
    for s in range.0.ceil() as i64..=range.1.floor() as i64 {
        let x = [(s as f64 * u[0]).round() as i64, (s as f64 * u[1]).round() as i64];
        if xs.last() != Some(&x) {
            xs.push(x);
        }
    }
    for &x in &xs {
        if atlas.classify_xt([x[0] as f64, x[1] as f64], t, delta).region != Region::Exterior {
            return Err(Error::RegionViolation { x1: x[0], x2: x[1] });
        }
    }
    let values = engine.kernels(m, t, &xs)?;
    let samples: Vec<ExteriorSample> = xs
        .iter()
        .zip(&values)
        .map(|(&x, v)| ExteriorSample { x, dist: atlas.dist_x_v1([x[0] as f64, x[1] as f64], t), value: v.abs() })
        .collect();
    let used: Vec<&ExteriorSample> = samples.iter().filter(|s| s.value > NOISE_FLOOR).collect();
    if used.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: used.len() });
    }
    let x: Vec<f64> = used.iter().map(|s| s.dist).collect();
    let y: Vec<f64> = used.iter().map(|s| s.value.ln()).collect();
    let (b, a, ci, rms) = least_squares(&x, &y);
    let mu_bound = used.iter().map(|s| -s.value.ln() / s.dist).fold(f64::INFINITY, f64::min);
    let envelope_ok = samples.iter().all(|s| s.value <= exterior_envelope(engine.params(), 1.0, s.x, t));
    Ok(ExteriorReport {
        fit: FitReport {
            exponent: b,
            ci_halfwidth: ci,
            window: (x[0], *x.last().unwrap()),
            method: FitMethod::LinearInT,
            constant: a.exp(),
            residual_rms: rms,
            points: used.len(),
        },
        mu_bound,
        envelope_ok,
        samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeSample {
    pub t: f64,
    /// `max_x sum_m |H^(m)_t(x)|` over the light-cone window.
    pub value: f64,
    pub argmax: [i64; 2],
}

/// Global maximum of `sum_m |H^(m)_t|` over `|x|_inf <= vmax t + 8`.
pub fn global_envelope(engine: &KernelEngine, t_grid: &[f64]) -> Result<Vec<EnvelopeSample>> {
    check_grid(t_grid)?;
    t_grid
        .iter()
        .map(|&t| {
            let r = (engine.max_speed() * t).ceil() as i64 + 8;
            let w = Window::square(r);
            let f = engine.fields(t, w)?;
            let (mut best, mut arg) = (-1.0, [0, 0]);
            for (i, x) in w.points().enumerate() {
                let s = f[0].values[i].abs() + f[1].values[i].abs() + f[2].values[i].abs();
                if s > best {
                    best = s;
                    arg = x;
                }
            }
            Ok(EnvelopeSample { t, value: best, argmax: arg })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct EnvelopeStability {
    pub rate: f64,
    /// `max value * t^rate` over the lower and upper half (split at the
    /// geometric midpoint of the time range).
    pub constants: [f64; 2],
    /// `|C_upper / C_lower - 1|`.
    pub relative_change: f64,
    pub fit: FitReport,
}

/// Checks `value <= C t^-rate` with the constant fitted separately on the two
/// halves of the time range.
pub fn envelope_stability(samples: &[EnvelopeSample], rate: f64) -> Result<EnvelopeStability> {
    let series: Vec<DecaySample> = samples.iter().map(|s| DecaySample { t: s.t, x_used: s.argmax, value: s.value }).collect();
    let fit = fit_power_samples(&series)?;
    let mid = (samples[0].t * samples.last().unwrap().t).sqrt();
    let c = |lower: bool| {
        samples
            .iter()
            .filter(|s| (s.t < mid) == lower)
            .map(|s| s.value * s.t.powf(rate))
            .fold(0.0, f64::max)
    };
    let constants = [c(true), c(false)];
    Ok(EnvelopeStability { rate, constants, relative_change: (constants[1] / constants[0] - 1.0).abs(), fit })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExpectedDecay {
    Power(f64),
    Exponential,
}

#[derive(Clone, Debug)]
pub struct RegionRow {
    pub label: &'static str,
    pub velocity: VelocityPoint,
    pub region: Region,
    pub expected: ExpectedDecay,
    pub fit: FitReport,
    pub bound_satisfied: bool,
}

/// Slack allowed on a fitted exponent before a power bound counts as violated.
pub const EXPONENT_SLACK: f64 = 0.05;

/// Decay scans and fits for one representative velocity per region: a cusp,
/// the middle of a `Psi2` arc, the axis point of `Psi1`, the origin and an
/// exterior ray at `1.3 vmax`.
pub fn verify_regions(
    engine: &KernelEngine,
    atlas: &VelocityAtlas,
    delta: f64,
    t_grid: &[f64],
    m: i32,
) -> Result<Vec<RegionRow>> {
    if delta <= 0.0 {
        return Err(Error::InvalidParams(format!("delta = {delta} must be positive")));
    }
    let psi1_axis = atlas.psi1.points.iter().copied().max_by(|a, b| a[0].total_cmp(&b[0])).unwrap();
    let cases = [
        ("cusp", atlas.v3[0], ExpectedDecay::Power(0.75)),
        ("mid_arc", atlas.psi2_mid_arc(), ExpectedDecay::Power(5.0 / 6.0)),
        ("psi1", psi1_axis, ExpectedDecay::Power(5.0 / 6.0)),
        ("origin", [0.0, 0.0], ExpectedDecay::Power(1.0)),
        ("exterior", [1.3 * atlas.max_speed, 0.0], ExpectedDecay::Exponential),
    ];
    cases
        .iter()
        .map(|&(label, v, expected)| {
            let series = decay_scan(engine, m, v, t_grid)?;
            let region = atlas.classify(v, delta).region;
            let (fit, ok) = match expected {
                ExpectedDecay::Power(rate) => {
                    let fit = fit_power(&series)?;
                    let ok = fit.exponent <= -rate + EXPONENT_SLACK;
                    (fit, ok)
                }
                ExpectedDecay::Exponential => {
                    let fit = log_linear_in_t(&series.samples);
                    let ok = series.samples.last().is_some_and(|s| s.value < NOISE_FLOOR);
                    (fit, ok)
                }
            };
            Ok(RegionRow { label, velocity: v, region, expected, fit, bound_satisfied: ok })
        })
        .collect()
}

/// Slope of `log|value|` against `t` over samples above the noise floor; the
/// exponent is `-inf` when fewer than two samples remain.
fn log_linear_in_t(samples: &[DecaySample]) -> FitReport {
    let used: Vec<&DecaySample> = samples.iter().filter(|s| s.value > NOISE_FLOOR).collect();
    let window = (samples.first().map_or(0.0, |s| s.t), samples.last().map_or(0.0, |s| s.t));
    if used.len() < 2 {
        return FitReport {
            exponent: f64::NEG_INFINITY,
            ci_halfwidth: f64::INFINITY,
            window,
            method: FitMethod::LinearInT,
            constant: 0.0,
            residual_rms: 0.0,
            points: used.len(),
        };
    }
    let x: Vec<f64> = used.iter().map(|s| s.t).collect();
    let y: Vec<f64> = used.iter().map(|s| s.value.ln()).collect();
    let (b, a, ci, rms) = least_squares(&x, &y);
    FitReport { exponent: b, ci_halfwidth: ci, window, method: FitMethod::LinearInT, constant: a.exp(), residual_rms: rms, points: used.len() }
}

/// CSV with header `region,exponent,ci,t_min,t_max`.
pub fn write_region_csv<W: Write>(rows: &[RegionRow], mut w: W) -> Result<()> {
    writeln!(w, "region,exponent,ci,t_min,t_max")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.label, r.fit.exponent, r.fit.ci_halfwidth, r.fit.window.0, r.fit.window.1
        )?;
    }
    Ok(())
}
