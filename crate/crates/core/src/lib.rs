//! A numerical laboratory for planar convex billiards built around the
//! integrable ellipse.
//!
//! The crate provides, bottom to top:
//!
//! - [`specfun`]: incomplete elliptic integrals and the Jacobi amplitude,
//!   including the analytic continuation to modulus `k > 1` used by
//!   hyperbolic (libration) caustics.
//! - [`boundary`]: geometry of ellipses and of normal deformations
//!   `Ω = ℰ + μ(s)·n(s)`, with exact derivatives of the deformation field.
//! - [`billiard`]: the billiard map, rotation numbers, confocal caustics and
//!   closed-form periodic orbits tangent to them.
//! - [`variational`]: the length functional on q-point configurations, its
//!   gradient, cyclic-tridiagonal Hessian, degenerate third derivative and
//!   the Poincaré-map determinant identity.
//! - [`orbitfinder`]: Newton refinement of periodic orbits and stray-orbit
//!   scans near a target length.
//! - [`mather`]: Mather's β-function of the ellipse and its invariants.
//! - [`resonance`]: eccentricities at which two caustic families share one
//!   length (length spectral resonances).
//! - [`deform`]: construction and certification of controllable multiscale
//!   deformations that freeze chosen orbits, prescribe their Hessian data
//!   and destroy stray orbits.
//! - [`bbz`]: leading-order wave invariants, Maslov phase classes and the
//!   cubic-graph combinatorial weights.
//! - [`cancel`]: the reduced cancellation system, its Vandermonde Jacobian
//!   and the fixed-point iteration absorbing remainder perturbations.

pub mod bbz;
pub mod billiard;
pub mod boundary;
pub mod cancel;
pub mod deform;
pub mod mather;
pub mod numerics;
pub mod orbitfinder;
pub mod resonance;
pub mod specfun;
pub mod variational;

pub use boundary::{Boundary, DeformationField, Ellipse};
pub use billiard::{CausticKind, CausticParam, PhasePoint};
pub use variational::{Configuration, HessianData, OrbitClass, OrbitConfig};
