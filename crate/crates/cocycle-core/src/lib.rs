//! Numerical laboratory for quasi-periodic Schrödinger cocycles
//! `A_E(θ) = [[0, 1], [−1, λ²v(θ) − E]]` over an irrational rotation.
//!
//! The crate computes the invariant unstable and stable directions `ψ^u_E`,
//! `ψ^s_E` near the lowest spectral edge `E₀`, locates the edge, and measures
//! how the minimum distance `δ(E)` between the directions and their `C¹` norms
//! behave as `E ↗ E₀`.
//!
//! All numerical routines are generic over a [`Real`] scalar (`f32` or `f64`);
//! the `*64` aliases below fix the usual double-precision instantiation.

// Guards are written as `!(x > 0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arcs;
pub mod asymptotics;
pub mod checks;
pub mod cocycle;
pub mod curves;
pub mod error;
pub mod ladder;
pub mod potential;
pub mod rotation;
pub mod scalar;

pub use error::{LabError, Result};
pub use scalar::Real;

/// Double-precision cocycle parameters.
pub type Params64 = cocycle::CocycleParams<f64>;
/// Double-precision rotation number.
pub type Rotation64 = rotation::RotationNumber<f64>;
/// Double-precision potential.
pub type Potential64 = potential::PotentialSpec<f64>;
