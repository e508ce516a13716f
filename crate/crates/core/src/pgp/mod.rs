//! Projected Gaussian process regression of subspaces.
//!
//! A Gaussian process on frame coordinates at a fixed basepoint, pushed to
//! the Grassmann manifold through the lift and the exponential map.

mod archive;
mod fit;
mod kernel;
mod model;
mod uq;

pub use archive::{load_model, save_model, ModelMetadata, MODEL_FILE};
pub use fit::{fit_hyperparameters, fit_on, gamma_sweep, log_marginal_likelihood, FitOptions, FitResult, LikelihoodData};
pub use kernel::{kernel_eval, KernelSpec};
pub use model::{
    shrink_to_injectivity, BasepointChoice, PgpModel, PredictiveDistribution, TrainingBases, JITTER,
    KERNEL_CONDITION_LIMIT,
};
pub use uq::{sample_subspaces, uncertainty_stddev, SubspaceSample};
