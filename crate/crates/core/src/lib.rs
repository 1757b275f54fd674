//! Solvers for irreversibly constrained variational problems.
//!
//! Three general purpose solvers operate on quadratic energy models and
//! symmetric pencils:
//!
//! - [`hybrid`]: first-order equilibrium under bound constraints (a variational
//!   inequality), solved by alternate minimization followed by reduced-space
//!   Newton steps.
//! - [`bifurcation`]: the lower spectrum of a symmetric pencil restricted to the
//!   inactive constraints, with Schur-complement handling of a singular metric.
//! - [`stability`]: the smallest eigenvalue of a pencil over a convex cone,
//!   computed by projection and scaling.
//!
//! [`fem1d`] and [`models`] provide the 1D P1 finite element forms and the
//! energy models used by the Rayleigh-quotient benchmark, and [`harness`] holds
//! the closed-form references and parameter sweeps used to verify the solvers.
//!
//! The crate is `no_std` and needs only `alloc`.
#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod bifurcation;
mod error;
pub mod fem1d;
pub mod harness;
pub mod hybrid;
pub mod linalg;
pub mod models;
pub mod qp;
pub mod stability;

pub use error::{Error, Result};
