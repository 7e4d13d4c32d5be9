//! Porous medium equation `u_t = Δ(u^m)` for radial data on spherically
//! symmetric Cartan–Hadamard manifolds.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: warp functions ψ, model manifolds and their curvatures,
//!   the radial Laplace–Beltrami operator.
//! * [`comparison`]: auxiliary warps built from curvature bounds and
//!   certificates for two-sided bounds on the radial Laplacian coefficient.
//! * [`barriers`]: explicit super/subsolutions, the uniqueness barrier η,
//!   the harmonic shell and the weighted sup norms.
//! * [`profile`]: the stationary blow-up profile and its growth exponent.
//! * [`solver`]: an implicit finite-volume solver on truncated balls,
//!   comparison and blow-up experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN.

pub mod barriers;
pub mod comparison;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod ode;
pub mod profile;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{CurvatureBounds, ModelManifold, WarpFunction, WarpKind};
pub use grid::RadialGrid;
