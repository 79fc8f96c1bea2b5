//! Floquet multiplier sets of doubly periodic Dirac operators on tori.
//!
//! The crate assembles truncated Fourier discretizations of the operator
//! D = [[U, ∂], [−∂̄, Ū]], computes zero-level multiplier sets, builds
//! infinitesimal Darboux deformations and the conformal flow of the associated
//! immersed tori, and provides 1D reductions (NLS and Hill operators).

pub mod conformal;
pub mod darboux;
pub mod dirac2d;
pub mod error;
pub mod fft;
pub mod field;
pub mod fixtures;
pub mod format;
pub mod lattice;
pub mod linalg;
pub mod quasi;
pub mod spectral1d;
pub mod weierstrass;

pub use error::{Error, Result};
pub use field::{solve_shifted, Direction, PeriodicField};
pub use lattice::{dual_basis, multipliers_of, ExponentPair, Lattice};
pub use num_complex::Complex64 as C64;
pub use quasi::QuasiPeriodicFunction;
