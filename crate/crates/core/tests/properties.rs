use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;

use kgwave::decay::{fit_power_samples, log_grid, DecaySample};
use kgwave::phase::{f_value, gamma, grad_gamma, hessian_gamma};
use kgwave::propagator::KernelEngine;
use kgwave::quantum::{apply_tt, symplectic_form, ComplexLatticeFunction, WeylCommutatorResult};
use kgwave::singular::{find_astar, kstar_points, newton_distance, taylor_table, COEFF_CUTOFF};
use kgwave::velocity::{VelocityAtlas, ATLAS_POINTS};
use kgwave::{Params, Torus};

fn params() -> impl Strategy<Value = Params> {
    (0.2..3.0f64, 0.2..3.0f64, 0.2..3.0f64).prop_map(|(w, a, b)| Params::new(w, a, b).unwrap())
}

fn angle() -> impl Strategy<Value = f64> {
    -PI..PI
}

fn unit_atlas() -> &'static VelocityAtlas {
    static A: OnceLock<VelocityAtlas> = OnceLock::new();
    A.get_or_init(|| VelocityAtlas::new(&Params::new(1.0, 1.0, 2.0).unwrap(), ATLAS_POINTS).unwrap())
}

fn unit_engine() -> &'static KernelEngine {
    static E: OnceLock<KernelEngine> = OnceLock::new();
    E.get_or_init(|| KernelEngine::new(Params::new(1.0, 1.0, 1.0).unwrap()))
}

fn lattice_function() -> impl Strategy<Value = ComplexLatticeFunction> {
    prop::collection::vec(((-3i64..=3, -3i64..=3), -1.0..1.0f64, -1.0..1.0f64), 1..6).prop_map(|v| {
        ComplexLatticeFunction::from_pairs(v.into_iter().map(|((a, b), re, im)| ([a, b], Complex64::new(re, im))))
    })
}

proptest! {
    #[test]
    fn gamma_even_and_bounded(p in params(), k1 in angle(), k2 in angle()) {
        let g = gamma(&p, Torus::new(k1, k2));
        for (s1, s2) in [(-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
            prop_assert!((gamma(&p, Torus::new(s1 * k1, s2 * k2)) - g).abs() <= 1e-14);
        }
        prop_assert!(p.omega() <= g + 1e-14 && g <= p.gamma_max() + 1e-14);
    }

    #[test]
    fn derivatives_match_differences(p in params(), k1 in angle(), k2 in angle()) {
        let k = Torus::new(k1, k2);
        let h = 1e-5;
        let at = |a: f64, b: f64| gamma(&p, Torus::new(k1 + a, k2 + b));
        let grad = grad_gamma(&p, k).unwrap();
        prop_assert!((grad[0] - (at(h, 0.0) - at(-h, 0.0)) / (2.0 * h)).abs() <= 1e-6);
        prop_assert!((grad[1] - (at(0.0, h) - at(0.0, -h)) / (2.0 * h)).abs() <= 1e-6);
        let hs = hessian_gamma(&p, k).unwrap();
        let h = 1e-4;
        let fd11 = (at(h, 0.0) - 2.0 * at(0.0, 0.0) + at(-h, 0.0)) / (h * h);
        let fd12 = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
        prop_assert!((hs.m11 - fd11).abs() <= 1e-5 && (hs.m12 - fd12).abs() <= 1e-5);
        prop_assert!(hs.max_abs() > 0.0);
    }

    #[test]
    fn hessian_sign_follows_f(p in params(), k1 in angle(), k2 in angle()) {
        let k = Torus::new(k1, k2);
        let f = f_value(&p, k.ab());
        prop_assume!(f.abs() > 1e-6);
        prop_assert_eq!(hessian_gamma(&p, k).unwrap().det() > 0.0, f > 0.0);
    }

    #[test]
    fn astar_quadrant(w in 0.2..3.0f64, l1 in 0.2..3.0f64, r in 1.05..3.0f64) {
        let s = find_astar(&Params::new(w, l1, l1 * r).unwrap()).unwrap();
        prop_assert!(s.a < 0.0 && s.b > 0.0);
        let t = find_astar(&Params::new(w, l1 * r, l1).unwrap()).unwrap();
        prop_assert!(t.a > 0.0 && t.b < 0.0);
    }

    #[test]
    fn newton_distance_swap_invariant(p in params()) {
        let q = p.swapped();
        let ks = kstar_points(&p).unwrap();
        let kq = kstar_points(&q).unwrap();
        for k in ks {
            let mirrored = kq.iter().copied().min_by(|a, b| {
                ((a.k1 - k.k2).abs() + (a.k2 - k.k1).abs()).total_cmp(&((b.k1 - k.k2).abs() + (b.k2 - k.k1).abs()))
            }).unwrap();
            let d = newton_distance(&taylor_table(&p, k, 6).unwrap(), COEFF_CUTOFF).unwrap();
            let e = newton_distance(&taylor_table(&q, mirrored, 6).unwrap(), COEFF_CUTOFF).unwrap();
            prop_assert_eq!(d, e);
        }
    }

    #[test]
    fn region_classification_symmetric(v1 in -1.0..1.0f64, v2 in -1.0..1.0f64) {
        let atlas = unit_atlas();
        let base = atlas.classify([v1, v2], 0.05);
        prop_assume!((base.dist_psi - 0.05).abs() > 1e-6 && (base.dist_v3 - 0.05).abs() > 1e-6 && base.dist_psi > 1e-6);
        for (s1, s2) in [(-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
            prop_assert_eq!(atlas.classify([s1 * v1, s2 * v2], 0.05).region, base.region);
        }
    }

    #[test]
    fn commutator_norm_cap(theta in -50.0..50.0f64) {
        prop_assert!(WeylCommutatorResult::from_phase(theta).obeys_cap());
    }

    #[test]
    fn symplectic_form_antisymmetric(f in lattice_function(), g in lattice_function()) {
        prop_assert!((symplectic_form(&f, &g) + symplectic_form(&g, &f)).abs() <= 1e-14);
        prop_assert_eq!(symplectic_form(&f, &f), 0.0);
    }

    #[test]
    fn fit_recovers_synthetic_power(alpha in -1.2..-0.3f64, c in 0.1..10.0f64) {
        let samples: Vec<DecaySample> = log_grid(50.0, 800.0, 64)
            .into_iter()
            .map(|t| DecaySample { t, x_used: [0, 0], value: c * t.powf(alpha) })
            .collect();
        let fit = fit_power_samples(&samples).unwrap();
        prop_assert!((fit.exponent - alpha).abs() <= 0.02, "{} vs {}", fit.exponent, alpha);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kernel_parity(x1 in -12i64..=12, x2 in -12i64..=12, t in 0.5..15.0f64) {
        let e = unit_engine();
        for m in -1..=1 {
            let h = e.kernel(m, t, [x1, x2]).unwrap();
            prop_assert!((e.kernel(m, t, [-x1, -x2]).unwrap() - h).abs() <= 1e-13);
            prop_assert!((e.kernel(m, t, [x2, -x1]).unwrap() - h).abs() <= 1e-13);
            let sign = if m == 0 { 1.0 } else { -1.0 };
            prop_assert!((e.kernel(m, -t, [x1, x2]).unwrap() - sign * h).abs() <= 1e-13);
        }
    }

    #[test]
    fn evolution_real_linear(f in lattice_function(), g in lattice_function(), c in -2.0..2.0f64, t in 1.0..8.0f64) {
        let e = unit_engine();
        let tt = |h: &ComplexLatticeFunction| apply_tt(e, h, t, None).unwrap();
        prop_assert!(tt(&f.add(&g)).max_abs_diff(&tt(&f).add(&tt(&g))) <= 1e-10);
        let real = Complex64::new(c, 0.0);
        prop_assert!(tt(&f.scale(real)).max_abs_diff(&tt(&f).scale(real)) <= 1e-10);
        let i = Complex64::new(0.0, 1.0);
        prop_assert!(tt(&f.scale(i)).max_abs_diff(&tt(&f).scale(i)) > 1e-6);
    }
}

#[test]
fn v3_on_psi2_and_caustics_disjoint() {
    let atlas = unit_atlas();
    for v in atlas.v3 {
        assert!(atlas.psi2.distance_to(v) <= 1e-9);
    }
    assert!(atlas.psi1.min_distance_to(&atlas.psi2) > 1e-3);
}
