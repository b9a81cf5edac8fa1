//! Two-dimensional autonomous spectral submanifolds (SSMs) of nonlinear
//! mechanical systems.
//!
//! The crate takes a second-order model `M ÿ + C ẏ + K y + f(y, ẏ) = 0`
//! with polynomial `f`, diagonalizes its linear part, and solves the
//! invariance equation of a two-dimensional modal subspace order by order
//! using the parameterization method. From the resulting expansion it
//! extracts the reduced dynamics in polar form, the backbone curve, and a
//! trajectory-based invariance error.
//!
//! Everything here is `no_std` + `alloc`; file formats, the CLI and
//! threaded drivers live in the `ssmkit` crate.
//!
//! Pipeline:
//!
//! 1. [`model`]: build a [`MechanicalSystem`] and convert it to a
//!    [`FirstOrderSystem`].
//! 2. [`spectral`]: [`decompose`] into a [`ModalSystem`]; scan for
//!    resonances.
//! 3. [`ssm`]: [`compute_ssm`] to the requested order.
//! 4. [`reduced`]: polar dynamics, amplitudes and backbone curves.
//! 5. [`validation`]: invariance error and invariance residual.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::needless_range_loop))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod beam;
mod bipoly;
pub mod error;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod poly;
pub mod reduced;
pub mod scalar;
pub mod spectral;
pub mod ssm;
pub mod validation;

pub use error::{ErrorKind, SsmError};
pub use model::{build_first_order, make_shaw_pierre, FirstOrderSystem, ForceTerm, MechanicalSystem, ShawPierre};
pub use poly::{MonomialKey, PolyMap};
pub use reduced::{amplitude, backbone, to_polar, BackboneCurve, PolarDynamics};
pub use spectral::{decompose, resonance_scan, spectral_quotients, ModalSystem, ModeSelector, ResonanceReport};
pub use ssm::{compute_ssm, memory_estimate, MemoryEstimate, SsmExpansion};
pub use validation::{invariance_error, invariance_residual, InvarianceOptions, InvarianceResult};

pub use num_complex::Complex64;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, SsmError>;
