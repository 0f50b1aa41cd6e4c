//! Numerical laboratory for directional maximal operators.
//!
//! The crate builds direction sets on the sphere, computes the hyperplane
//! proximity counts that drive almost-orthogonality recursions, applies
//! directional Fourier multiplier operators on periodic grids, and runs
//! scaling-law experiments against closed-form ball oracles.

pub mod certifier;
pub mod cone_counts;
pub mod error;
pub mod experiment;
pub mod field_ops;
pub mod maximal_ops;
pub mod sphere_nets;

pub use error::DirmaxError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, DirmaxError>;
