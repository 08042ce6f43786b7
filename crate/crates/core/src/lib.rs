//! Finite element solver for the capacitive interface problem
//!
//! ```text
//! -div(sigma grad u + eps grad u_t) = f   in (0, T) x Omega
//! ```
//!
//! with piecewise-constant `sigma`, `eps` on a square domain containing a
//! circular inclusion. Space is discretized by P1 Lagrange elements on an
//! interface-fitted triangulation, time by backward Euler. The initial state
//! is the discrete elliptic projection of the initial datum.
//!
//! The crate is organized bottom-up:
//!
//! * [`mesh`] - interface-fitted triangulations, validation and mesh files
//! * [`quadrature`], [`sparse`], [`assembly`] - P1 forms, loads and error norms
//! * [`solver`] - conjugate gradients plus dense and banded direct solvers
//! * [`projection`] - the elliptic initialization operator
//! * [`pulses`] - time profiles for pulsed forcing
//! * [`timestepping`] - the fully discrete scheme and an order-4 reference
//! * [`verification`] - manufactured solutions and convergence studies
//! * [`vtk`] - snapshot and probe output

#![allow(
    clippy::needless_range_loop,
    clippy::excessive_precision,
    clippy::neg_cmp_op_on_partial_ord
)]

pub mod assembly;
pub mod mesh;
pub mod projection;
pub mod pulses;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod timestepping;
pub mod verification;
pub mod vtk;

/// A point in the plane.
pub type Point = [f64; 2];

/// Scalar field on the plane, shared between assembly passes.
pub type SpatialFn = std::sync::Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Vector field on the plane.
pub type GradientFn = std::sync::Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// Scalar field on space-time.
pub type SpaceTimeFn = std::sync::Arc<dyn Fn(f64, Point) -> f64 + Send + Sync>;

/// Scalar function of time.
pub type TimeFn = std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub use assembly::{CoefficientField, Discretization, DofMap};
pub use mesh::{GeometrySpec, Mesh, Subdomain};
pub use solver::SolverConfig;
pub use timestepping::{TimeGrid, Trajectory};
