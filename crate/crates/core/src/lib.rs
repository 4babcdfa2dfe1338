//! Convex Broyden class quasi-Newton updates, the quadratic and general
//! quasi-Newton schemes built on them, and an instrumentation layer that
//! checks the identities, inequalities and rate envelopes of their theory
//! against measured trajectories.

pub mod bounds;
pub mod broyden;
pub mod error;
pub mod operator;
pub mod potentials;
pub mod problems;
pub mod quadrature;
pub mod runner;
pub mod sampling;
pub mod solver;

pub use broyden::{broyd, broyd_det_ratio, broyd_inverse, broyd_with_inverse, nu, phi_tau, TauParam, UpdateResult};
pub use error::{Error, Result};
pub use operator::{DualVector, EigenRange, PrimalVector, Role, SpdOperator};
pub use problems::{InstanceSpec, LogSumExpProblem, ProblemInstance, ProblemKind, QuadraticProblem};
