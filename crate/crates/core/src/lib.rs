//! Spectral density and resolvent-fluctuation kernels of selfadjoint
//! polynomials `P(W, D)` in a Wigner matrix `W` and a deterministic diagonal
//! matrix `D`.
//!
//! The pipeline is:
//!
//! 1. [`ncpoly`] — parse and evaluate noncommutative polynomials in `x, y`;
//! 2. [`linearize`] — build a selfadjoint linear pencil `γ₀ + γ₁x + γ₂y`;
//! 3. [`freeconv`] — solve the matrix-valued subordination fixed point,
//!    giving the Cauchy transform and the limiting density;
//! 4. [`kernel`] — assemble the transfer operators and the covariance
//!    kernel of the centred resolvent traces;
//! 5. [`sim`] — Monte Carlo sampling of `Tr (z − P(W, D))⁻¹` and comparison
//!    of empirical covariances with the kernel.
//!
//! The crate is `no_std` (with `alloc`); randomness comes from explicitly
//! seeded generators passed in by the caller.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod freeconv;
pub mod kernel;
pub mod linalg;
pub mod linearize;
pub mod ncpoly;
pub mod oracle;
pub mod sim;

pub use error::{Error, Result};
pub use freeconv::{
    cauchy_transform, density, omega_derivative, omega_derivative_at, solve_omega, ModelParams, SolverConfig,
    SpectralMeasure, StageRecord, SubordinationPoint,
};
pub use kernel::{build_operators, covariance_value, gamma_value, log_term, spectral_radius, KernelOperator, KernelValue};
pub use linearize::{build_linearization, build_linearization_with, verify_corner, Linearization, Strategy};
pub use ncpoly::{parse, Letter, NcPolynomial, Word};
pub use num_complex::Complex64;
