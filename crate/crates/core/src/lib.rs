//! Sensing matrices built from Wigner D-functions and spherical harmonics on
//! spherical sampling grids.
//!
//! - [`specfun`]: Legendre, Jacobi, Wigner d/D and spherical harmonics.
//! - [`wigner3j`]: 3j symbols in floating point and exact rational form.
//! - [`grids`]: mode enumeration and equispaced-elevation grids.
//! - [`coherence`]: sensing matrices, mutual coherence and its lower bounds.
//! - [`identities`]: closed forms and checks for equispaced Legendre sums.
//! - [`optimize`]: gradient descent on sampling angles.

pub mod coherence;
pub mod error;
pub mod grids;
pub mod identities;
pub mod optimize;
pub mod specfun;
pub mod wigner3j;

pub use error::{Error, Result};
pub use grids::{BasisKind, Grid, ModeIndex};
pub use num_complex::Complex64;
