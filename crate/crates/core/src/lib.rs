//! Gain-term-only Boltzmann dynamics and finite-time blowup checks.
//!
//! The crate builds the positive part `Q+` of the Boltzmann collision
//! operator, with the loss term deleted, for classical hard spheres and for
//! relativistic kernels. On top of it sit:
//!
//! * [`classical`] and [`relativistic`]: collision maps, kernels and
//!   invariants;
//! * [`gain`]: grid quadrature of `Q+`, the lower-bound constant `delta`
//!   and the truncated operator `Q_R`;
//! * [`dynamics`]: homogeneous time stepping with blowup detection against
//!   the comparison solution `rho0 / (1 - delta rho0 t)`;
//! * [`mild`]: Picard iterates of the inhomogeneous problem along
//!   characteristics and the reduction to the homogeneous case;
//! * [`oracle`]: seeded Monte Carlo estimators used to cross-check the
//!   deterministic quadratures.
//!
//! ```
//! use std::sync::Arc;
//! use kinetic_blowup::{GainOperator, KernelSpec, SphereQuadrature, VelocityGrid};
//!
//! let grid = Arc::new(VelocityGrid::new(1.0, 8).unwrap());
//! let op = GainOperator::new(KernelSpec::ClassicalHardSphere, SphereQuadrature::new(8).unwrap()).unwrap();
//! let est = op.estimate_delta(&grid, 1.0).unwrap();
//! assert!(est.delta > 0.0);
//! ```

// `!(x > 0.0)` style guards deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod dynamics;
pub mod error;
pub mod gain;
pub mod mild;
pub mod model;
pub mod oracle;
pub mod relativistic;
pub mod sum;
pub mod symmetry;

pub use dynamics::{
    check_domination, comparison_solution, evolve_full_homogeneous, evolve_truncated, BlowupReport,
    ComparisonState, Controls, Trajectory,
};
pub use error::{Error, Result};
pub use gain::{check_monotone, estimate_delta, gain_apply, q_r_apply, DeltaEstimate, GainOperator, GainTensor};
pub use mild::{
    check_shrinking_ball, eval_phi, reduced_homogeneous_blowup, BlowupBranch, InhomogeneousConfig,
    PicardEvaluator, ReductionReport,
};
pub use model::{
    AngularTable, BallIndicator, DistributionField, Field, FnField, KernelSpec, Regime, SphereQuadrature, Vec3,
    VelocityGrid,
};
pub use oracle::{mc_delta, mc_form_equivalence, mc_gain, McEstimate};

/// Library version string.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/collisions.md")]
    mod collisions {}
    #[doc = include_str!("../../../book/src/gain.md")]
    mod gain {}
    #[doc = include_str!("../../../book/src/blowup.md")]
    mod blowup {}
    #[doc = include_str!("../../../book/src/inhomogeneous.md")]
    mod inhomogeneous {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
