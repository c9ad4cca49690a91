//! Optical binding of point scatterers in a single-mode waveguide.
//!
//! The crate computes the self-consistent guided fields of a transversely
//! pumped 1D particle array, the resulting optical forces, zero-force
//! configurations, the linearized collective modes around them and the full
//! nonlinear dynamics.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod eigen;
pub mod equilibrium;
pub mod error;
pub mod exec;
pub mod oracles;
pub mod params;
pub mod scatter;
pub mod stability;

pub use error::{Error, Result};
pub use exec::Execution;
pub use num_complex::Complex64;
pub use params::{ParticleConfiguration, SystemParams};
pub use scatter::{FieldState, ForceVector, TransferMatrix};
