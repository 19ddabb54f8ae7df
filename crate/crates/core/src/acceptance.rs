//! The acceptance suite: ten end-to-end checks with runtime budgets.

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::fmt;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::curves::trace_phi1;
use crate::decay::{
    decay_scan, envelope_stability, fit_exponential, fit_power, global_envelope, log_grid, DecaySeries,
};
use crate::error::Result;
use crate::evolution::{energy, leapfrog_snapshots, spectral_evolution, LatticeState};
use crate::phase::{f_value, g_value, grad_gamma};
use crate::propagator::{KernelEngine, Window, DEFAULT_MAX_GRID};
use crate::quantum::{apply_tt, commutator_norm, lr_verify, symplectic_form, ComplexLatticeFunction};
use crate::singular::{
    classify_k, find_astar, k3_discriminant, kstar_points, newton_distance, taylor_table, KClass, COEFF_CUTOFF,
    TOL_DET, TOL_THIRD,
};
use crate::velocity::{psi_curves, v3_massless, v3_points, VelocityAtlas, ATLAS_POINTS};
use crate::{Params, Rational, Torus};

/// Seed for every random draw in the suite.
pub const SEED: u64 = 20_240_917;

#[derive(Clone, Copy, Debug)]
pub struct AcceptanceOptions {
    pub max_grid: usize,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        Self { max_grid: DEFAULT_MAX_GRID }
    }
}

type Check = fn(&AcceptanceOptions) -> Result<(bool, String)>;

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub budget: Duration,
    check: Check,
}

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {} ({:.1} s of {} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            self.detail
        )
    }
}

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "newton distances", budget: secs(10), check: newton_distances },
        Criterion { id: 2, name: "degenerate point geometry", budget: secs(1), check: degenerate_points },
        Criterion { id: 3, name: "massless cusp closed form", budget: secs(10), check: massless_cusps },
        Criterion { id: 4, name: "decay exponents", budget: secs(600), check: decay_exponents },
        Criterion { id: 5, name: "exponential exterior", budget: secs(120), check: exterior },
        Criterion { id: 6, name: "oracle equivalence", budget: secs(180), check: oracles },
        Criterion { id: 7, name: "conservation and kernel identities", budget: secs(120), check: identities },
        Criterion { id: 8, name: "quantum layer", budget: secs(300), check: quantum_layer },
        Criterion { id: 9, name: "massless rate", budget: secs(600), check: massless_rate },
        Criterion { id: 10, name: "stability sweep", budget: secs(120), check: stability_sweep },
    ]
}

impl Criterion {
    pub fn run(&self, opts: &AcceptanceOptions) -> CriterionResult {
        let start = Instant::now();
        let outcome = (self.check)(opts);
        let elapsed = start.elapsed();
        let (passed, mut detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        let in_time = elapsed <= self.budget;
        if !in_time {
            detail.push_str("; over the time budget");
        }
        CriterionResult { id: self.id, name: self.name, passed: passed && in_time, detail, elapsed, budget: self.budget }
    }
}

pub fn run_criterion(id: u32, opts: &AcceptanceOptions) -> Option<CriterionResult> {
    criteria().into_iter().find(|c| c.id == id).map(|c| c.run(opts))
}

pub fn run_all(opts: &AcceptanceOptions) -> Vec<CriterionResult> {
    criteria().iter().map(|c| c.run(opts)).collect()
}

fn params(w: f64, l1: f64, l2: f64) -> Params {
    Params::new(w, l1, l2).expect("suite parameters are valid")
}

fn engine(p: Params, opts: &AcceptanceOptions) -> KernelEngine {
    KernelEngine::new(p).with_max_grid(opts.max_grid)
}

fn in_range(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn newton_distances(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let mut ok = true;
    let mut detail = Vec::new();
    for p in [params(1.0, 1.0, 1.0), params(1.0, 1.0, 2.0)] {
        let nd = |k: Torus| -> Result<Rational> { newton_distance(&taylor_table(&p, k, 6)?, COEFF_CUTOFF) };
        let origin = nd(Torus::new(0.0, 0.0))?;
        // the traced vertex farthest from every cusp point
        let ks = kstar_points(&p)?;
        let (_, pi_loop) = trace_phi1(&p, 256)?;
        let fold = pi_loop
            .points
            .iter()
            .map(|q| Torus::new(q[0], q[1]))
            .max_by(|a, b| {
                let d = |k: &Torus| ks.iter().map(|s| (k.k1 - s.k1).hypot(k.k2 - s.k2)).fold(f64::INFINITY, f64::min);
                d(a).total_cmp(&d(b))
            })
            .unwrap();
        let fold_class = classify_k(&p, fold, TOL_DET, TOL_THIRD).class;
        let fold_nd = nd(fold)?;
        let cusp_nd: Vec<Rational> = ks.iter().map(|&k| nd(k)).collect::<Result<_>>()?;
        ok &= origin == Rational::from(1)
            && fold_class == KClass::K2
            && fold_nd == Rational::new(6, 5)
            && cusp_nd.iter().all(|&d| d == Rational::new(4, 3));
        detail.push(format!(
            "({}, {}, {}): origin {origin}, fold {fold_nd} ({fold_class:?}), cusps {}",
            p.omega(),
            p.lambda1(),
            p.lambda2(),
            cusp_nd.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ")
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn degenerate_points(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let p = params(1.0, 1.0, 1.0);
    let s = find_astar(&p)?;
    let ks = kstar_points(&p)?;
    let expected = [[FRAC_PI_2, FRAC_PI_2], [-FRAC_PI_2, FRAC_PI_2], [-FRAC_PI_2, -FRAC_PI_2], [FRAC_PI_2, -FRAC_PI_2]];
    let k_err = expected
        .iter()
        .map(|e| ks.iter().map(|k| (k.k1 - e[0]).abs().max((k.k2 - e[1]).abs())).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let equal_ok = s.a.abs() <= 1e-10 && s.b.abs() <= 1e-10 && k_err <= 1e-10;
    let q = params(1.0, 1.0, 2.0);
    let t = find_astar(&q)?;
    let (rf, rg) = (f_value(&q, t).abs(), g_value(&q, t).abs());
    let skew_ok = t.a < 0.0 && 0.0 < t.b && rf < 1e-12 && rg < 1e-12;
    Ok((
        equal_ok && skew_ok,
        format!(
            "(1,1,1): (a*, b*) = ({:.1e}, {:.1e}), K* error {k_err:.1e}; (1,1,2): a* = {:.12}, b* = {:.12}, |F| = {rf:.1e}, |G| = {rg:.1e}",
            s.a, s.b, t.a, t.b
        ),
    ))
}

fn massless_cusps(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let v3 = v3_points(&params(0.0, 1.0, 1.0))?;
    let err = v3.iter().map(|v| (v[0].abs() - 0.5).abs().max((v[1].abs() - 0.5).abs())).fold(0.0, f64::max);
    let quadrants_ok = v3.iter().map(|v| (v[0].signum() as i32, v[1].signum() as i32)).collect::<std::collections::HashSet<_>>().len() == 4;
    let diameter = (v3[0][0] - v3[2][0]).hypot(v3[0][1] - v3[2][1]);
    let closed = v3_massless(1.0, 4.0)?;
    let num = grad_gamma(&params(0.0, 1.0, 4.0), kstar_points(&params(0.0, 1.0, 4.0))?[0])?;
    let skew = (num[0] - closed[0]).abs().max((num[1] - closed[1]).abs());
    Ok((
        err <= 1e-10 && quadrants_ok && (diameter - SQRT_2).abs() <= 1e-9 && skew <= 1e-8,
        format!(
            "V3 error {err:.1e}, diameter - sqrt 2 = {:.1e}, (1,4) closed form ({:.10}, {:.10}) vs numeric error {skew:.1e}",
            diameter - SQRT_2,
            closed[0],
            closed[1]
        ),
    ))
}

/// Samples per ray in the decay fits.
pub const RAY_SAMPLES: usize = 1024;
/// Time samples for the global envelope.
pub const ENVELOPE_SAMPLES: usize = 24;

fn decay_exponents(opts: &AcceptanceOptions) -> Result<(bool, String)> {
    let p = params(1.0, 1.0, 1.0);
    let atlas = VelocityAtlas::new(&p, ATLAS_POINTS)?;
    let e = engine(p, opts);
    let grid = log_grid(50.0, 800.0, RAY_SAMPLES);
    let rays = [
        ("cusp", atlas.v3[0], (-0.80, -0.70)),
        ("mid-arc", atlas.psi2_mid_arc(), (-0.90, -0.78)),
        ("interior", [0.0, 0.0], (-1.07, -0.93)),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, v, (lo, hi)) in rays {
        let series: DecaySeries = decay_scan(&e, 0, v, &grid)?;
        let fit = fit_power(&series)?;
        ok &= in_range(fit.exponent, lo, hi);
        detail.push(format!("{name} {:.3} +- {:.3}", fit.exponent, fit.ci_halfwidth));
    }
    let env = global_envelope(&e, &log_grid(50.0, 800.0, ENVELOPE_SAMPLES))?;
    let st = envelope_stability(&env, 0.75)?;
    ok &= st.relative_change <= 0.25;
    detail.push(format!(
        "global max C = {:.4} / {:.4} ({:.1}% change), fitted {:.3}",
        st.constants[0],
        st.constants[1],
        100.0 * st.relative_change,
        st.fit.exponent
    ));
    Ok((ok, detail.join(", ")))
}

fn exterior(opts: &AcceptanceOptions) -> Result<(bool, String)> {
    let p = params(1.0, 1.0, 1.0);
    let atlas = VelocityAtlas::new(&p, ATLAS_POINTS)?;
    let e = engine(p, opts);
    let t = 40.0;
    let start = 1.2 * atlas.max_speed * t;
    let r = fit_exponential(&e, &atlas, 0, t, [1.0, 0.0], (start, start + 40.0), 0.05)?;
    let ok = r.mu() > 0.3 && r.mu_bound > 0.3 && r.envelope_ok;
    Ok((
        ok,
        format!(
            "fitted mu {:.3}, largest mu with |H| <= e^(-mu dist) at all {} samples: {:.3}, mu = 1 envelope {}",
            r.mu(),
            r.fit.points,
            r.mu_bound,
            if r.envelope_ok { "holds" } else { "violated" }
        ),
    ))
}

fn oracles(opts: &AcceptanceOptions) -> Result<(bool, String)> {
    let p = params(1.0, 1.0, 1.0);
    let e = engine(p, opts);
    let ts = [5.0, 10.0, 20.0];
    let init = LatticeState::delta(256);
    let window = Window::square(30);
    let mut kernel_err: f64 = 0.0;
    let mut spectral = Vec::new();
    for &t in &ts {
        let s = spectral_evolution(&p, &init, t)?;
        let f = e.field(0, t, window)?;
        for (x, v) in window.points().zip(&f.values) {
            kernel_err = kernel_err.max((s.u_at(x) - v).abs());
        }
        spectral.push(s);
    }
    let errs = |dt: f64| -> Result<f64> {
        let snaps = leapfrog_snapshots(&p, &init, &ts, dt)?;
        Ok(snaps.iter().zip(&spectral).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max))
    };
    let (coarse, fine) = (errs(0.01)?, errs(0.005)?);
    let ratio = coarse / fine;
    Ok((
        kernel_err <= 1e-8 && fine <= 1e-4 && in_range(ratio, 3.6, 4.4),
        format!("kernel vs spectral {kernel_err:.1e}; leapfrog vs spectral {fine:.1e} at dt 0.005, error ratio {ratio:.3}"),
    ))
}

fn identities(opts: &AcceptanceOptions) -> Result<(bool, String)> {
    let p = params(1.0, 1.0, 1.0);
    let init = LatticeState::delta(64);
    let e0 = energy(&p, &init);
    let spec_drift = [25.0, 100.0]
        .iter()
        .map(|&t| Ok((energy(&p, &spectral_evolution(&p, &init, t)?) - e0).abs() / e0))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let times: Vec<f64> = (1..=20).map(|j| 5.0 * j as f64).collect();
    let lf_drift = leapfrog_snapshots(&p, &init, &times, 0.01)?
        .iter()
        .map(|s| (energy(&p, s) - e0).abs() / e0)
        .fold(0.0, f64::max);

    let e = engine(p, opts);
    let h = 5e-4;
    let mut worst: f64 = 0.0;
    for t in [3.7, 12.1] {
        for x in [[0i64, 0i64], [2, -1], [5, 3]] {
            let k = |m: i32, s: f64, y: [i64; 2]| e.kernel(m, s, y);
            let dm = (k(-1, t + h, x)? - k(-1, t - h, x)?) / (2.0 * h);
            let d0 = (k(0, t + h, x)? - k(0, t - h, x)?) / (2.0 * h);
            let h0 = k(0, t, x)?;
            worst = worst.max((dm + h0).abs()).max((d0 - k(1, t, x)?).abs());
            let dd = (k(0, t + h, x)? - 2.0 * h0 + k(0, t - h, x)?) / (h * h);
            let mut lap = 0.0;
            for (j, l) in [p.lambda1(), p.lambda2()].into_iter().enumerate() {
                let mut up = x;
                let mut dn = x;
                up[j] += 1;
                dn[j] -= 1;
                lap += l * (k(0, t, up)? + k(0, t, dn)? - 2.0 * h0);
            }
            worst = worst.max((dd + p.omega().powi(2) * h0 - lap).abs());
        }
    }
    Ok((
        spec_drift <= 1e-12 && lf_drift < 1e-4 && worst <= 1e-5,
        format!("spectral energy drift {spec_drift:.1e}, leapfrog drift {lf_drift:.1e} (dt 0.01, t 100), worst identity residual {worst:.1e}"),
    ))
}

fn random_block(rng: &mut StdRng, origin: [i64; 2]) -> ComplexLatticeFunction {
    ComplexLatticeFunction::from_pairs((0..25).map(|i| {
        ([origin[0] + i / 5, origin[1] + i % 5], Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }))
}

fn quantum_layer(opts: &AcceptanceOptions) -> Result<(bool, String)> {
    let p = params(1.0, 1.0, 1.0);
    let e = engine(p, opts);
    let mut rng = StdRng::seed_from_u64(SEED);
    let f = random_block(&mut rng, [0, 0]);
    let g = random_block(&mut rng, [3, -2]);
    let identity = apply_tt(&e, &f, 0.0, None)?.max_abs_diff(&f);
    let sigma0 = symplectic_form(&f, &g);
    let mut sym: f64 = 0.0;
    let mut evolved = Vec::new();
    for t in [5.0, 25.0] {
        let (tf, tg) = (apply_tt(&e, &f, t, None)?, apply_tt(&e, &g, t, None)?);
        sym = sym.max((symplectic_form(&tf, &tg) - sigma0).abs());
        evolved.push(tf);
    }
    let t30 = apply_tt(&e, &f, 30.0, None)?;
    let group = apply_tt(&e, &evolved[1], 5.0, None)?
        .max_abs_diff(&t30)
        .max(apply_tt(&e, &evolved[0], 25.0, None)?.max_abs_diff(&t30));

    let atlas = VelocityAtlas::new(&p, ATLAS_POINTS)?;
    let origin_f = ComplexLatticeFunction::delta([0, 0], Complex64::new(1.0, 0.0));
    let origin_g = ComplexLatticeFunction::delta([0, 0], Complex64::new(0.0, 1.0));
    let lr = lr_verify(&e, &atlas, &origin_f, &origin_g, &log_grid(50.0, 800.0, 256), 0.05)?;
    let mut capped = lr.samples.iter().all(|s| s.result.obeys_cap());
    for t in [0.0, 5.0, 25.0] {
        capped &= commutator_norm(&e, &f, &g, t)?.obeys_cap();
    }
    let exponent = lr.fit.as_ref().map_or(f64::NAN, |f| f.exponent);
    Ok((
        identity <= 1e-12 && sym <= 1e-8 && group <= 1e-6 && capped && exponent <= -0.70,
        format!(
            "T0 error {identity:.1e}, symplectic defect {sym:.1e}, group law {group:.1e}, cap {}, origin envelope exponent {exponent:.3}",
            if capped { "holds" } else { "violated" }
        ),
    ))
}

/// Samples on the massless light-cone ray.
pub const MASSLESS_SAMPLES: usize = 64;

fn massless_rate(opts: &AcceptanceOptions) -> Result<(bool, String)> {
    let p = params(0.0, 1.0, 1.0);
    let e = engine(p, opts);
    let series = decay_scan(&e, -1, [1.0, 0.0], &log_grid(100.0, 1600.0, MASSLESS_SAMPLES))?;
    let fit = fit_power(&series)?;
    Ok((
        in_range(fit.exponent, -0.73, -0.60),
        format!("m = -1 along v = (1, 0): exponent {:.3} +- {:.3}", fit.exponent, fit.ci_halfwidth),
    ))
}

fn stability_sweep(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut ok = true;
    let mut min_disc = f64::INFINITY;
    let mut cusp_counts = Vec::new();
    for _ in 0..10 {
        let p = params(rng.gen_range(0.2..5.0), rng.gen_range(0.2..5.0), rng.gen_range(0.2..5.0));
        let d = k3_discriminant(&p)?;
        let (_, psi2) = psi_curves(&p, ATLAS_POINTS)?;
        let cusps = psi2.cusp_vertices().len();
        ok &= d.abs() > 1e-6 && cusps == 4;
        min_disc = min_disc.min(d.abs());
        cusp_counts.push(cusps);
    }
    Ok((ok, format!("min |k3 discriminant| {min_disc:.3e}, cusp counts {cusp_counts:?}")))
}
