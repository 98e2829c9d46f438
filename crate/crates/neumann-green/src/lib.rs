//! Finite-element laboratory for Neumann Green's functions of second-order
//! parabolic systems in divergence form with bounded measurable coefficients.
//!
//! The crate builds mollified Neumann Green's functions on 1D intervals and 2D
//! polygons, time-integrates them into elliptic Neumann functions, and verifies
//! the quantitative estimates the construction is supposed to satisfy:
//! conservation, forward/backward duality, pointwise and L^p growth near the
//! pole, Gaussian off-diagonal decay via exponential-weight conjugation, and
//! the logarithmic bound of the two-dimensional elliptic Neumann function.

pub mod coeffs;
pub mod config;
pub mod elliptic;
pub mod error;
pub mod estimates;
pub mod fem;
pub mod green;
pub mod mesh;
pub mod parabolic;
pub mod runner;
pub mod sparse;

pub use error::{Error, Result};
