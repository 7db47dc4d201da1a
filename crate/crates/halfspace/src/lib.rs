//! Semi-analytic solver for the linearized Beris-Edwards system on the
//! half-space.
//!
//! The crate is organised around one tangential Fourier mode at a time:
//! [`symbols`] computes the decay rates of a mode, [`assembly`] solves for
//! the amplitudes of its exponential profile, and [`profile`] evaluates the
//! profile and the residual of the mode ODE system. [`resolvent`] and
//! [`evolution`] assemble full fields from many modes, [`verify`] scans the
//! scalar bounds the solution formulas depend on, and [`oracle`] is an
//! independent finite-difference reference.

// Tensor code indexes several arrays with the same component indices, and
// `!(x > y)` is used on purpose so that NaN fails the check.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod evolution;
pub mod field;
pub mod kernel;
pub mod linalg;
pub mod oracle;
pub mod params;
pub mod profile;
pub mod resolvent;
pub mod sample;
pub mod scalars;
pub mod symbols;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use params::ModelParams;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Schema version stamped into every JSON report.
pub const SCHEMA_VERSION: u32 = 1;
