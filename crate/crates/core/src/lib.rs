//! Hypoelliptic kinetic geometry, control trajectories and Poincaré-inequality numerics
//! for Kolmogorov-type equations
//!
//! `∂_t f + (Bx)·∇_x f = ∇_v·(A ∇_v f)` on layered phase space `x = (x^(0), …, x^(κ))`.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: system description, the matrix `B`, group law, dilations, cylinders.
//! * [`control`]: power-law control functions and their derivatives.
//! * [`wronskian`]: Wronskian matrices, closed-form determinants, transport and scaling matrices.
//! * [`trajectory`]: boundary-value control solves and the affine maps built from them.
//! * [`lab`]: fundamental solution, finite-difference solver, SDE simulator, rough coefficients.
//! * [`poincare`]: both sides of the Poincaré inequality and ensemble estimates.
//!
//! Linear algebra that is sensitive to the conditioning of the Wronskian is done in
//! double-double arithmetic ([`precise`]) and rounded to `f64` at the public boundary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lab;
pub mod linalg;
pub mod poincare;
pub mod precise;
pub mod quadrature;
pub mod rng;
pub mod trajectory;
pub mod wronskian;

pub use control::ControlBasis;
pub use error::{Error, Result};
pub use geometry::{Cylinder, CylinderLayout, KineticPoint, SystemSpec};
pub use trajectory::{AffineMap, TrajectoryBundle};
pub use wronskian::WronskianBundle;
