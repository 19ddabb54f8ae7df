//! Newton polyhedra of bivariate power series and their Newton distance,
//! in exact rational arithmetic.

use num_rational::Ratio;
use num_traits::Zero;

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// `conv(support + R^2_+)` described by its vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonPolyhedron {
    /// Exponent pairs `(n1, n2)` with a nonzero coefficient, sorted.
    pub support: Vec<(u32, u32)>,
    /// Vertices of the boundary chain, by increasing `n1` (decreasing `n2`).
    pub hull_vertices: Vec<(u32, u32)>,
    /// `inf { t : (t, t) in the polyhedron }`.
    pub newton_distance: Rational,
}

/// A facet line `alpha n1 + beta n2 = c` with coprime nonnegative integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaceLine {
    pub alpha: i64,
    pub beta: i64,
    pub c: i64,
}

impl NewtonPolyhedron {
    pub fn from_support(mut support: Vec<(u32, u32)>) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        if support.is_empty() {
            return Err(Error::EmptySupport);
        }
        let hull_vertices = lower_chain(&support);
        let newton_distance = diagonal_hit(&hull_vertices);
        Ok(Self { support, hull_vertices, newton_distance })
    }

    /// Bounded edges of the boundary chain.
    pub fn compact_faces(&self) -> Vec<((u32, u32), (u32, u32))> {
        self.hull_vertices.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// The face containing the diagonal point `(d, d)`: a compact edge if the
    /// diagonal crosses one, otherwise the vertical or horizontal ray (or a
    /// vertex, reported as `None`).
    pub fn principal_face(&self) -> Option<FaceLine> {
        let d = self.newton_distance;
        let first = self.hull_vertices[0];
        let last = *self.hull_vertices.last().unwrap();
        if Rational::from(first.0 as i64) == d && Rational::from(first.1 as i64) < d {
            return Some(FaceLine { alpha: 1, beta: 0, c: first.0 as i64 });
        }
        if Rational::from(last.1 as i64) == d && Rational::from(last.0 as i64) < d {
            return Some(FaceLine { alpha: 0, beta: 1, c: last.1 as i64 });
        }
        for (p, q) in self.compact_faces() {
            let (x1, y1, x2, y2) = (p.0 as i64, p.1 as i64, q.0 as i64, q.1 as i64);
            if Rational::from(x1) < d && d < Rational::from(x2) {
                let (alpha, beta) = (y1 - y2, x2 - x1);
                let g = gcd(alpha, beta);
                let (alpha, beta) = (alpha / g, beta / g);
                return Some(FaceLine { alpha, beta, c: alpha * x1 + beta * y1 });
            }
        }
        None
    }

    /// Support points lying on a face line.
    pub fn points_on(&self, face: FaceLine) -> Vec<(u32, u32)> {
        self.support
            .iter()
            .copied()
            .filter(|&(a, b)| face.alpha * a as i64 + face.beta * b as i64 == face.c)
            .collect()
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Lower-left convex chain of the minimal elements of `support`.
fn lower_chain(support: &[(u32, u32)]) -> Vec<(u32, u32)> {
    // one candidate per column: the lowest point, kept only while the column
    // minimum strictly decreases (others are dominated)
    let mut cand: Vec<(i64, i64)> = Vec::new();
    for &(a, b) in support {
        let (a, b) = (a as i64, b as i64);
        match cand.last() {
            Some(&(pa, _)) if pa == a => {}
            Some(&(_, pb)) if b >= pb => {}
            _ => cand.push((a, b)),
        }
    }
    let mut chain: Vec<(i64, i64)> = Vec::new();
    for p in cand {
        while chain.len() >= 2 {
            let o = chain[chain.len() - 2];
            let a = chain[chain.len() - 1];
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0 {
                chain.pop();
            } else {
                break;
            }
        }
        chain.push(p);
    }
    chain.into_iter().map(|(a, b)| (a as u32, b as u32)).collect()
}

fn diagonal_hit(chain: &[(u32, u32)]) -> Rational {
    let r = |x: u32| Rational::from(x as i64);
    let first = chain[0];
    if first.0 >= first.1 {
        return r(first.0);
    }
    let last = chain[chain.len() - 1];
    if last.1 >= last.0 {
        return r(last.1);
    }
    for w in chain.windows(2) {
        let ((x1, y1), (x2, y2)) = (w[0], w[1]);
        // edge crosses the diagonal between its endpoints
        if x1 < y1 && x2 >= y2 {
            let (x1, y1, x2, y2) = (x1 as i64, y1 as i64, x2 as i64, y2 as i64);
            let num = (y2 - y1) * x1 - (x2 - x1) * y1;
            let den = (y2 - y1) - (x2 - x1);
            debug_assert!(!den.is_zero());
            return Rational::new(num, den);
        }
    }
    unreachable!("chain starts above and ends below the diagonal")
}
