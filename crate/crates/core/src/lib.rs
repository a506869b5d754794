//! Spectral laboratory for energy-admissible flow construction on the flat
//! torus: periodic field kernels, prescribed density evolution, feasible
//! kinetic-energy profiles, relaxed subsolutions, oscillatory refinement
//! stages, weak-form admissibility audits and dissipation comparison.
//!
//! All numerics are generic over the scalar type ([`scalar::Real`], `f32` or
//! `f64`); the aliases below fix the default `f64` instantiation used by the
//! command-line driver.

pub mod error;
pub mod scalar;

pub mod eig;
pub mod fft;
pub mod field;
pub mod energy;
pub mod grid;
pub mod oscillation;
pub mod pressure;
pub mod schedule;
pub mod smoothstep;
pub mod sparse;
pub mod subsolution;
pub mod spline;

pub use error::{CoreError, Result};
pub use grid::PeriodicGrid;
pub use scalar::Real;

/// Default scalar for the command-line driver and tests.
pub type Scalar = f64;
/// Scalar field samples over the torus grid at the default scalar.
pub type ScalarField = field::ScalarField<Scalar>;
/// Vector field at the default scalar.
pub type VectorField = field::VectorField<Scalar>;
/// Symmetric tensor field at the default scalar.
pub type SymTensorField = field::SymTensorField<Scalar>;
