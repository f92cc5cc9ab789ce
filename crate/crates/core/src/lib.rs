//! Numerical realization of a coding argument for the rotating planar
//! equation `z' = R e^{it} (conj(z)^2 - 1) + f(t, z)`.
//!
//! The crate integrates the equation in several co-rotating frames, codes
//! orbits into 0/1 itineraries through time-dependent isolating sets,
//! shoots connecting orbits with exit-side bisection, certifies the scalar
//! boundary inequalities with interval arithmetic, and provides shift-space
//! and distributional-chaos utilities.

pub mod certify;
pub mod coding;
pub mod connect;
pub mod dcstats;
pub mod flow;
pub mod geometry;
pub mod model;
pub mod mp;
pub mod shifts;

pub use num_complex::Complex64;
