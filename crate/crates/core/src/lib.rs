//! Polyconvex, invariant-based neural constitutive models for finite-strain
//! electro-elasticity, together with the data generators and the
//! calibration/verification pipeline built around them.
//!
//! The crate is organized along the pipeline:
//!
//! - [`tensor`]: exact 3x3 kinematics (cofactor, tensor cross product,
//!   polar and isochoric-volumetric decompositions);
//! - [`invariants`]: electro-mechanical invariants with analytic first
//!   derivatives, including structural tensors for transversely isotropic
//!   and cubic symmetry;
//! - [`network`]: softplus networks with exact gradients, including the
//!   second-order path used to train energies through their stresses;
//! - [`constitutive`]: the assembled energy model and its stress/field
//!   evaluation, scaling utilities, and the polyconvexity test surface;
//! - [`analytic`]: the closed-form transversely isotropic benchmark
//!   potential used as ground truth;
//! - [`sampling`]: concentric deformation-space sampling and electric
//!   sphere sampling;
//! - [`laminate`]: analytical rank-one laminate homogenization with the
//!   Newton solver for the interface amplitude vectors;
//! - [`training`]: weighted MSE calibration with projected ADAM;
//! - [`io`]: dataset CSV and model checkpoint formats;
//! - [`verify`]: the property suites behind the `verify` CLI command.

pub mod analytic;
pub mod constitutive;
pub mod dataset;
pub mod error;
pub mod invariants;
pub mod io;
pub mod laminate;
pub mod network;
pub mod sampling;
pub mod tensor;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
