//! Anisotropy estimation and isotropy testing for stationary Gaussian random
//! fields observed through a single level set or excursion set.
//!
//! The crate is organised as a pipeline:
//!
//! * [`field_sim`] synthesises anisotropic squared-exponential fields on a grid.
//! * [`contour`] extracts level sets by marching squares and resamples them by
//!   arc length, attaching unit normals.
//! * [`palm`] integrates functions of the normal along the contours (length,
//!   cosine and sine integrals, normal covariance, per-cell integrals) and
//!   provides the Palm densities of the normal used as oracles.
//! * [`elliptic`] holds the complete elliptic integrals and the link functions
//!   `g` and `R` with their inverses.
//! * [`inversion_hd`] maps normal-covariance eigenvalues back to anisotropy
//!   parameters in any dimension through a strongly convex program.
//! * [`lkc`] computes area, perimeter and Euler characteristic of the excursion
//!   set and the curvature-based estimator.
//! * [`estimators`] and [`isotropy_test`] are the user-facing estimators and the
//!   chi-squared isotropy test.

// Argument checks are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contour;
pub mod elliptic;
pub mod error;
pub mod estimators;
pub mod field_sim;
pub mod grid;
pub mod inversion_hd;
pub mod io;
pub mod isotropy_test;
pub mod lkc;
pub mod palm;
pub mod pipeline;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod sphere;

pub use error::{Error, Result};
pub use grid::{BinaryMask, FieldGrid, Window};
