//! Finite-volume time-domain oracles on the periodic box `(-L, L]^2`:
//! exact spectral evolution, kick-drift-kick leapfrog, and the energy.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::fft2::fft2;
use crate::Params;

/// Displacement `u` and velocity `p` on the box `(-L, L]^2`, stored with
/// periodic indices `x mod 2L`, row-major with `x1` outer.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeState {
    pub half_width: usize,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

impl LatticeState {
    pub fn zeros(half_width: usize) -> Self {
        let n = 4 * half_width * half_width;
        Self { half_width, u: vec![0.0; n], p: vec![0.0; n] }
    }

    /// `u = delta_0`, `p = 0`.
    pub fn delta(half_width: usize) -> Self {
        let mut s = Self::zeros(half_width);
        s.u[0] = 1.0;
        s
    }

    pub fn side(&self) -> usize {
        2 * self.half_width
    }

    pub fn index(&self, x: [i64; 2]) -> usize {
        let n = self.side() as i64;
        (x[0].rem_euclid(n) * n + x[1].rem_euclid(n)) as usize
    }

    pub fn u_at(&self, x: [i64; 2]) -> f64 {
        self.u[self.index(x)]
    }

    pub fn p_at(&self, x: [i64; 2]) -> f64 {
        self.p[self.index(x)]
    }

    pub fn max_abs_diff(&self, other: &LatticeState) -> f64 {
        self.u.iter().zip(&other.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn check_box(state: &LatticeState) -> Result<()> {
    let l = state.half_width;
    if l < 64 || !l.is_power_of_two() {
        return Err(Error::InvalidParams(format!("half-width {l} must be a power of two >= 64")));
    }
    let n = 4 * l * l;
    if state.u.len() != n || state.p.len() != n {
        return Err(Error::InvalidParams("state arrays do not match the box".into()));
    }
    Ok(())
}

/// Exact evolution `u(t) = cos(t gamma) g + sin(t gamma)/gamma h`,
/// `u_t(t) = -gamma sin(t gamma) g + cos(t gamma) h` on the frequency grid
/// `pi j / L`. At `gamma = 0` the factor `sin(t gamma)/gamma` is `t`.
pub fn spectral_evolution(params: &Params, initial: &LatticeState, t: f64) -> Result<LatticeState> {
    check_box(initial)?;
    let n = initial.side();
    let to_c = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
    let (mut g, mut h) = (to_c(&initial.u), to_c(&initial.p));
    fft2(&mut g, n, FftDirection::Forward);
    fft2(&mut h, n, FftDirection::Forward);
    let base: Vec<f64> = (0..n).map(|i| 2.0 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos())).collect();
    let w2 = params.omega().powi(2);
    let (mut u, mut p) = (vec![Complex64::new(0.0, 0.0); n * n], vec![Complex64::new(0.0, 0.0); n * n]);
    for i in 0..n {
        for j in 0..n {
            let q = i * n + j;
            let gam = (w2 + params.lambda1() * base[i] + params.lambda2() * base[j]).sqrt();
            let (s, c) = (t * gam).sin_cos();
            let sinc = if gam == 0.0 { t } else { s / gam };
            u[q] = g[q] * c + h[q] * sinc;
            p[q] = -g[q] * (gam * s) + h[q] * c;
        }
    }
    fft2(&mut u, n, FftDirection::Inverse);
    fft2(&mut p, n, FftDirection::Inverse);
    let scale = 1.0 / (n * n) as f64;
    Ok(LatticeState {
        half_width: initial.half_width,
        u: u.iter().map(|z| z.re * scale).collect(),
        p: p.iter().map(|z| z.re * scale).collect(),
    })
}

/// `a = -omega^2 u + sum_j lambda_j (u(x + e_j) + u(x - e_j) - 2 u(x))`.
fn acceleration(params: &Params, n: usize, u: &[f64], out: &mut [f64]) {
    let (w2, l1, l2) = (params.omega().powi(2), params.lambda1(), params.lambda2());
    for i in 0..n {
        let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
        for j in 0..n {
            let (jp, jm) = ((j + 1) % n, (j + n - 1) % n);
            let c = u[i * n + j];
            out[i * n + j] = -w2 * c
                + l1 * (u[ip * n + j] + u[im * n + j] - 2.0 * c)
                + l2 * (u[i * n + jp] + u[i * n + jm] - 2.0 * c);
        }
    }
}

/// Kick-drift-kick integration with step `dt` (shortened so that it divides `t`).
/// Requires `dt < 2 / sqrt(omega^2 + 4 l1 + 4 l2)`.
pub fn leapfrog_evolution(params: &Params, initial: &LatticeState, t: f64, dt: f64) -> Result<LatticeState> {
    Ok(leapfrog_snapshots(params, initial, &[t], dt)?.pop().unwrap())
}

/// Leapfrog states at each of the increasing times `ts` from one run.
pub fn leapfrog_snapshots(params: &Params, initial: &LatticeState, ts: &[f64], dt: f64) -> Result<Vec<LatticeState>> {
    let limit = params.leapfrog_limit();
    if !(dt > 0.0 && dt < limit) {
        return Err(Error::Stability { dt, limit });
    }
    let n = initial.side();
    if initial.u.len() != n * n || initial.p.len() != n * n {
        return Err(Error::InvalidParams("state arrays do not match the box".into()));
    }
    let mut s = initial.clone();
    let mut a = vec![0.0; n * n];
    let mut out = Vec::with_capacity(ts.len());
    let mut now = 0.0;
    for &target in ts {
        let span = target - now;
        if span < 0.0 {
            return Err(Error::InvalidParams("snapshot times must be increasing and >= 0".into()));
        }
        let steps = (span / dt).ceil() as usize;
        if steps > 0 {
            let h = span / steps as f64;
            acceleration(params, n, &s.u, &mut a);
            for _ in 0..steps {
                for (p, a) in s.p.iter_mut().zip(&a) {
                    *p += 0.5 * h * a;
                }
                for (u, p) in s.u.iter_mut().zip(&s.p) {
                    *u += h * p;
                }
                acceleration(params, n, &s.u, &mut a);
                for (p, a) in s.p.iter_mut().zip(&a) {
                    *p += 0.5 * h * a;
                }
            }
        }
        now = target;
        out.push(s.clone());
    }
    Ok(out)
}

/// `(1/2) sum_x [p^2 + omega^2 u^2 + sum_j lambda_j (u(x + e_j) - u(x))^2]`
/// with periodic wrap.
pub fn energy(params: &Params, state: &LatticeState) -> f64 {
    let n = state.side();
    let (w2, l1, l2) = (params.omega().powi(2), params.lambda1(), params.lambda2());
    let u = &state.u;
    let mut e = 0.0;
    for i in 0..n {
        let ip = (i + 1) % n;
        for j in 0..n {
            let jp = (j + 1) % n;
            let c = u[i * n + j];
            let d1 = u[ip * n + j] - c;
            let d2 = u[i * n + jp] - c;
            e += state.p[i * n + j].powi(2) + w2 * c * c + l1 * d1 * d1 + l2 * d2 * d2;
        }
    }
    0.5 * e
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Params {
        Params::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn delta_energy_by_bond_count() {
        assert_eq!(energy(&unit(), &LatticeState::delta(8)), 2.5);
        assert_eq!(energy(&unit(), &LatticeState::zeros(8)), 0.0);
    }

    #[test]
    fn spectral_identity_and_conservation() {
        let p = Params::new(0.8, 1.2, 0.5).unwrap();
        let mut s = LatticeState::zeros(64);
        for (k, x) in [[0, 0], [1, 3], [-5, 2]].iter().enumerate() {
            let i = s.index(*x);
            s.u[i] = 1.0 + k as f64;
            s.p[i] = 0.5 - k as f64;
        }
        let s0 = spectral_evolution(&p, &s, 0.0).unwrap();
        assert!(s0.max_abs_diff(&s) < 1e-15);
        let e0 = energy(&p, &s);
        let s1 = spectral_evolution(&p, &s, 13.7).unwrap();
        assert!((energy(&p, &s1) - e0).abs() / e0 < 1e-12);
    }

    #[test]
    fn spectral_velocity_is_time_derivative() {
        let p = unit();
        let s = LatticeState::delta(64);
        let h = 1e-4;
        let (a, b) = (spectral_evolution(&p, &s, 3.0 + h).unwrap(), spectral_evolution(&p, &s, 3.0 - h).unwrap());
        let mid = spectral_evolution(&p, &s, 3.0).unwrap();
        let err = (0..a.u.len()).map(|q| ((a.u[q] - b.u[q]) / (2.0 * h) - mid.p[q]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn massless_zero_mode_moves_linearly() {
        let p = Params::new(0.0, 1.0, 1.0).unwrap();
        let mut s = LatticeState::zeros(64);
        s.p.iter_mut().for_each(|v| *v = 1.0);
        let out = spectral_evolution(&p, &s, 2.5).unwrap();
        assert!(out.u.iter().all(|&u| (u - 2.5).abs() < 1e-12));
    }

    #[test]
    fn leapfrog_stability_guard() {
        let p = unit();
        let s = LatticeState::delta(64);
        assert!(matches!(leapfrog_evolution(&p, &s, 1.0, 1.0), Err(Error::Stability { .. })));
        assert_eq!(leapfrog_evolution(&p, &s, 0.0, 0.01).unwrap(), s);
    }
}
