//! Velocity-space picture: the images `Psi1`, `Psi2` of the degenerate loops
//! under the group velocity map, the cusp velocities `V3`, and region
//! classification of velocities `v = x / t`.

use std::f64::consts::PI;

use crate::curves::{trace_phi1, CurveLabel, CurvePolyline};
use crate::error::Result;
use crate::phase::grad_gamma;
use crate::singular::{astar_massless, kstar_points};
use crate::{Params, Torus};

/// Default vertex count for traced velocity curves.
pub const ATLAS_POINTS: usize = 1024;

pub type VelocityPoint = [f64; 2];

/// `(Psi1, Psi2)`, each with `n_points` vertices. `Psi2` has the four
/// cusp velocities as vertices. In the massless case `Psi1` is the ellipse
/// `(sqrt(l1) cos s, sqrt(l2) sin s)` of long-wave limits.
pub fn psi_curves(p: &Params, n_points: usize) -> Result<(CurvePolyline, CurvePolyline)> {
    let (origin, pi_loop) = trace_phi1(p, n_points)?;
    let psi1 = if p.wave_mode() {
        let (r1, r2) = (p.lambda1().sqrt(), p.lambda2().sqrt());
        (0..n_points)
            .map(|j| {
                let s = 2.0 * PI * j as f64 / n_points as f64;
                [r1 * s.cos(), r2 * s.sin()]
            })
            .collect()
    } else {
        image(p, &origin.points)?
    };
    let psi2 = image(p, &pi_loop.points)?;
    Ok((
        CurvePolyline::new(CurveLabel::Psi1, psi1, true),
        CurvePolyline::new(CurveLabel::Psi2, psi2, true),
    ))
}

fn image(p: &Params, pts: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    pts.iter().map(|q| grad_gamma(p, Torus::new(q[0], q[1]))).collect()
}

/// `grad gamma` at the four cusp points.
pub fn v3_points(p: &Params) -> Result<[VelocityPoint; 4]> {
    let ks = kstar_points(p)?;
    let mut out = [[0.0; 2]; 4];
    for (o, k) in out.iter_mut().zip(ks) {
        *o = grad_gamma(p, k)?;
    }
    Ok(out)
}

/// Closed-form first-quadrant cusp velocity for `omega = 0`:
/// `(sqrt(l1 (1 + 3a*)) / 2, sqrt(l2 (1 + 3b*)) / 2)`.
pub fn v3_massless(lambda1: f64, lambda2: f64) -> Result<VelocityPoint> {
    let s = astar_massless(lambda1, lambda2)?;
    Ok([(lambda1 * (1.0 + 3.0 * s.a)).sqrt() / 2.0, (lambda2 * (1.0 + 3.0 * s.b)).sqrt() / 2.0])
}

fn speed(p: &Params, k: [f64; 2]) -> f64 {
    match grad_gamma(p, Torus::new(k[0], k[1])) {
        Ok(v) => v[0].hypot(v[1]),
        Err(_) => 0.0,
    }
}

/// `max |grad gamma|` over the torus: grid scan then compass refinement.
/// In the massless case the supremum may be the long-wave limit `max sqrt(l_j)`.
pub fn max_group_speed(p: &Params) -> f64 {
    // by symmetry it suffices to scan [0, pi]^2
    let n = 200;
    let h = PI / n as f64;
    let mut best = ([h, h], 0.0);
    for i in 0..=n {
        for j in 0..=n {
            let k = [i as f64 * h, j as f64 * h];
            let s = speed(p, k);
            if s > best.1 {
                best = (k, s);
            }
        }
    }
    let (mut k, mut s) = best;
    let mut step = h;
    while step > 1e-13 {
        let mut moved = false;
        for d in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]] {
            let c = [k[0] + step * d[0], k[1] + step * d[1]];
            let sc = speed(p, c);
            if sc > s {
                k = c;
                s = sc;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    if p.wave_mode() {
        s = s.max(p.lambda1().sqrt()).max(p.lambda2().sqrt());
    }
    s
}

/// Ordered from slowest to fastest expected decay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    NearV3,
    NearV2,
    Interior,
    Exterior,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::NearV3 => "near_v3",
            Region::NearV2 => "near_v2",
            Region::Interior => "interior",
            Region::Exterior => "exterior",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RegionTag {
    pub region: Region,
    /// Distance to the nearest cusp velocity.
    pub dist_v3: f64,
    /// Distance to `Psi1 u Psi2`.
    pub dist_psi: f64,
    /// Distance to the closed region bounded by `Psi1` (zero inside).
    pub dist_v1: f64,
}

/// Traced velocity curves kept for repeated region and distance queries.
#[derive(Clone, Debug)]
pub struct VelocityAtlas {
    pub params: Params,
    pub psi1: CurvePolyline,
    pub psi2: CurvePolyline,
    pub v3: [VelocityPoint; 4],
    pub max_speed: f64,
}

impl VelocityAtlas {
    pub fn new(p: &Params, n_points: usize) -> Result<Self> {
        let (psi1, psi2) = psi_curves(p, n_points)?;
        Ok(Self { params: *p, psi1, psi2, v3: v3_points(p)?, max_speed: max_group_speed(p) })
    }

    pub fn dist_v3(&self, v: VelocityPoint) -> f64 {
        self.v3.iter().map(|c| (v[0] - c[0]).hypot(v[1] - c[1])).fold(f64::INFINITY, f64::min)
    }

    pub fn dist_psi(&self, v: VelocityPoint) -> f64 {
        self.psi1.distance_to(v).min(self.psi2.distance_to(v))
    }

    /// Euclidean distance to the closure of the region bounded by `Psi1`.
    pub fn dist_v1(&self, v: VelocityPoint) -> f64 {
        if self.psi1.contains(v) {
            0.0
        } else {
            self.psi1.distance_to(v)
        }
    }

    /// `dist(x, t V1)` for a lattice point at time `t > 0`.
    pub fn dist_x_v1(&self, x: [f64; 2], t: f64) -> f64 {
        t * self.dist_v1([x[0] / t, x[1] / t])
    }

    pub fn classify(&self, v: VelocityPoint, delta: f64) -> RegionTag {
        let dist_v3 = self.dist_v3(v);
        let dist_psi = self.dist_psi(v);
        let dist_v1 = self.dist_v1(v);
        let region = if dist_v3 <= delta {
            Region::NearV3
        } else if dist_psi <= delta {
            Region::NearV2
        } else if self.psi1.contains(v) || self.psi2.contains(v) {
            Region::Interior
        } else {
            Region::Exterior
        };
        RegionTag { region, dist_v3, dist_psi, dist_v1 }
    }

    /// Classification of the space-time point `(x, t)`, `t != 0`.
    pub fn classify_xt(&self, x: [f64; 2], t: f64, delta: f64) -> RegionTag {
        assert!(t != 0.0, "classification needs t != 0");
        self.classify([x[0] / t, x[1] / t], delta)
    }

    /// The vertex of `Psi2` midway (by index) between the first two cusps.
    pub fn psi2_mid_arc(&self) -> VelocityPoint {
        let cusps = self.psi2.cusp_vertices();
        let n = self.psi2.len();
        if cusps.len() < 2 {
            return self.psi2.points[0];
        }
        let (i, j) = (cusps[0], cusps[1]);
        self.psi2.points[((i + j) / 2) % n]
    }
}

/// Standalone classification (traces the curves on every call).
pub fn classify_velocity(p: &Params, v: VelocityPoint, delta: f64) -> Result<RegionTag> {
    Ok(VelocityAtlas::new(p, ATLAS_POINTS)?.classify(v, delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(w: f64, l1: f64, l2: f64) -> Params {
        Params::new(w, l1, l2).unwrap()
    }

    #[test]
    fn unit_lattice_reference_velocities() {
        let p = params(1.0, 1.0, 1.0);
        let v3 = v3_points(&p).unwrap();
        for v in v3 {
            assert!((v[0].abs() - 1.0 / 5f64.sqrt()).abs() < 1e-14);
            assert!((v[0].abs() - v[1].abs()).abs() < 1e-14);
        }
        let vmax = max_group_speed(&p);
        assert!((vmax - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3, "{vmax}");
    }

    #[test]
    fn massless_cusps() {
        let v = v3_massless(1.0, 1.0).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15);
        let p = params(0.0, 1.0, 4.0);
        let closed = v3_massless(1.0, 4.0).unwrap();
        let num = v3_points(&p).unwrap()[0];
        assert!((num[0] - closed[0]).abs() < 1e-8 && (num[1] - closed[1]).abs() < 1e-8);
    }

    #[test]
    fn psi_curves_shape() {
        let p = params(1.0, 1.0, 1.0);
        let atlas = VelocityAtlas::new(&p, 512).unwrap();
        let turns = atlas.psi1.turn_signs();
        assert!(turns.iter().all(|&t| t > 0.0) || turns.iter().all(|&t| t < 0.0));
        assert_eq!(atlas.psi2.cusp_vertices().len(), 4);
        assert_eq!(atlas.psi2.winding_number([0.0, 0.0]).abs(), 1);
        assert!(atlas.psi1.min_distance_to(&atlas.psi2) > 0.0);
        let reach = atlas.psi1.points.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
        assert!((reach - atlas.max_speed).abs() < 1e-6);
        // Psi1 meets the v1 axis at the golden ratio conjugate
        let axis = atlas.psi1.points.iter().filter(|v| v[1].abs() < 1e-12).map(|v| v[0].abs()).fold(0.0, f64::max);
        assert!((axis - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-9, "{axis}");
    }

    #[test]
    fn classification_examples() {
        let p = params(1.0, 1.0, 1.0);
        let atlas = VelocityAtlas::new(&p, 512).unwrap();
        assert_eq!(atlas.classify([0.0, 0.0], 0.05).region, Region::Interior);
        assert_eq!(atlas.classify([1.5 * atlas.max_speed, 0.0], 0.05).region, Region::Exterior);
        assert_eq!(atlas.classify(atlas.v3[2], 1e-6).region, Region::NearV3);
        let mid = atlas.psi2_mid_arc();
        assert_eq!(atlas.classify(mid, 0.01).region, Region::NearV2);
    }
}
