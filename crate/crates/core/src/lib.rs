//! Prediction of POD bases for parametric dynamical systems by regression on
//! the Grassmann manifold.
//!
//! The crate is organised bottom-up:
//!
//! - [`pde`] generates snapshot matrices from a 2-D advection-diffusion solver,
//!   and [`dataset`] stores them on disk.
//! - [`pod`] extracts truncated POD bases with a deterministic sign convention.
//! - [`grassmann`] holds subspace geometry: the lift frame, the coordinate maps,
//!   Exp/Log and principal angles.
//! - [`interp`] is the classical tangent-space interpolation of POD bases.
//! - [`pgp`] is the projected Gaussian process regressor with hyperparameter
//!   estimation and sampling-based uncertainty.
//! - [`metrics`] scores predicted bases and compares methods.
//! - [`study`] bundles the desk-scale experiment presets.

pub mod dataset;
pub mod error;
pub mod grassmann;
pub mod interp;
pub(crate) mod linalg;
pub mod metrics;
pub mod pde;
pub mod pgp;
pub mod pod;
pub mod study;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use grassmann::{HorizontalLift, LiftFrame, SubspacePoint, TangentCoordinates};
pub use pde::{ParameterPoint, SnapshotMatrix, SolverConfig, Standardization};
pub use pod::{PodResult, StiefelBasis};
