//! Special central configurations of the curved N-body problem on the unit
//! sphere.
//!
//! Bodies live on the sphere S^n in R^{n+1} and interact through the
//! cotangent force function U = sum m_i m_j cot d_ij, where d_ij is geodesic
//! distance. A special central configuration (SCC) is a critical point of U
//! restricted to the product of spheres. This crate provides:
//!
//! * [`geometry`]: configurations, pairwise distance tables, signed minors
//!   and the closed-hemisphere test;
//! * [`potential`]: the force function, its tangential gradient and the
//!   stationarity report;
//! * [`dziobek`]: the determinant criterion for configurations of N bodies
//!   spanning R^{N-1}, mass recovery and the shape-equation systems;
//! * [`families`]: explicit SCC families (odd polygons, complementary
//!   circles, scalene triangles, tetrahedron and pentatope curves);
//! * [`solver`]: Newton refinement, seeded multistart search and isometry
//!   classes;
//! * [`dynamics`]: constrained equations of motion and a fixed-step RK4
//!   integrator with drift reporting.

pub mod dynamics;
pub mod dziobek;
pub mod error;
pub mod families;
pub mod geometry;
pub mod potential;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::Configuration;
pub use potential::MassVector;
