//! Pseudo-spectral laboratory for Hall-MHD systems on the torus.
//!
//! Two jobs:
//! * numerically verify exact cancellation identities satisfied by the Hall
//!   term, term by term, on arbitrary divergence-free (and deliberately
//!   non-divergence-free) band-limited fields, in 2-D and 3-D;
//! * evolve 2.5-D electron MHD and Hall-MHD with anisotropic fractional
//!   dissipation while monitoring energy budgets, Sobolev norms, regularity
//!   criterion surrogates and scaling invariance.
//!
//! All fields are band-limited trigonometric polynomials with real samples;
//! products are evaluated on padded grids sized so that no aliasing error
//! enters any reported quantity.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod fields;
pub mod ledger;
pub mod nonlinear;
pub mod snapshot;
pub mod spectral;
pub mod tolerances;

pub use error::{HmhdError, Result};
