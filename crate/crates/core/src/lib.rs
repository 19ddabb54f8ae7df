//! Discrete Klein-Gordon propagation on the square lattice.
//!
//! The phase-level code ([`phase`], [`jet`]) is generic over [`Scalar`];
//! everything built on top of it works in `f64` through the aliases below.

pub mod acceptance;
pub mod curves;
pub mod decay;
pub mod error;
pub mod evolution;
mod fft2;
pub mod jet;
pub mod newton;
pub mod phase;
pub mod propagator;
pub mod quantum;
pub mod roots;
pub mod scalar;
pub mod singular;
pub mod velocity;

pub use error::{Error, Result};
pub use newton::{NewtonPolyhedron, Rational};
pub use phase::{ABPoint, LatticeParams, SymMatrix2, TorusPoint};
pub use scalar::Scalar;

/// Double-precision parameters.
pub type Params = LatticeParams<f64>;
/// Double-precision torus point.
pub type Torus = TorusPoint<f64>;
/// Double-precision `(cos k1, cos k2)` point.
pub type AB = ABPoint<f64>;
