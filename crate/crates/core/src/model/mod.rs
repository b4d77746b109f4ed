//! Shared domain types: vectors, the clipped velocity grid, the sphere rule,
//! sampled distribution fields and the kernel selector.

mod field;
mod grid;
mod kernel;
mod sphere;
mod vec3;

pub use field::{BallIndicator, DistributionField, Field, FnField};
pub use grid::{make_velocity_grid, GridNode, VelocityGrid};
pub use kernel::{AngularTable, KernelSpec, Regime};
pub use sphere::{gauss_legendre, make_sphere_quadrature, SphereNode, SphereQuadrature};
pub use vec3::Vec3;
