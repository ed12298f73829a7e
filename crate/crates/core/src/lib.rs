//! Numerical laboratory for the nonlocal diffusion equation with absorption
//!
//! ```text
//!     u_t = J * u - u - |u|^{p-1} u,      u(x, 0) = u_0(x),
//! ```
//!
//! where `J` is a compactly supported, radially symmetric probability kernel
//! and the bounded datum `u_0` carries a power-law tail `|x|^alpha u_0 -> A`.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernel`]: admissible kernels, their moments and Fourier symbols.
//! - [`grid`]: periodic grids, fields, fast convolution and the norms used by
//!   the long-time estimates.
//! - [`semigroup`]: exact spectral evaluation of the nonlocal semigroup, the
//!   regular part `W` of its fundamental solution and the heat semigroup.
//! - [`profile`]: the self-similar heat profile of `A|x|^{-alpha}` and the
//!   logarithmic constant used when `alpha = N`.
//! - [`solver`]: Strang splitting with exact sub-flows, a Picard fixed-point
//!   solver for cross-validation, and Duhamel residuals.
//! - [`asymptotics`]: rescaled error curves and log-log rate fits.

// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod profile;
pub mod quadrature;
pub mod semigroup;
pub mod solver;
mod spectral;

pub use error::{Error, Result};
pub use grid::{Field, Grid, InitialDatum, ParabolaWindow};
pub use kernel::{DiscreteKernel, Kernel, KernelShape, KernelSpec};
