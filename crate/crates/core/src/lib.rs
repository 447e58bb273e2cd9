//! Numerical laboratory for the clamped Euler–Bernoulli beam with structural
//! damping localized on `(ℓ₀, ℓ)`.
//!
//! The beam is split at the interface `ℓ₀` into an undamped segment carrying
//! `(v, V)` and a damped segment carrying `(w, W)`. The crate discretizes the
//! first-order generator
//!
//! ```text
//! A (v, V, w, W) = (V, −v_xxxx, W, −w_xxxx + W_xx)
//! ```
//!
//! with its clamped ends and transmission conditions, and provides the tools
//! to inspect it: spectra, resolvent norms along the imaginary axis, an exact
//! inverse, an exact characteristic determinant and energy-exact time stepping.

// NaN-rejecting `!(x > 0.0)` guards are deliberate throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub mod checks;
pub mod cli;
pub mod config;
pub mod discretization;
pub mod evolution;
pub mod exec;
pub mod grid;
pub mod inverse_oracle;
pub mod legendre;
pub mod linalg;
pub mod output;
pub mod resolvent;
pub mod samples;
pub mod spectral_oracle;
pub mod spectrum;
pub mod state;

pub type C64 = Complex<f64>;
pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub use config::{BeamGeometry, ConfigError, RunConfig};
pub use discretization::{assemble_generator, DiscreteOperator};
pub use state::{check_domain_membership, Membership, StateVector};
