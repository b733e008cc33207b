//! Bayesian covariate-dependent anti-logistic circadian models for
//! multi-subject rest-activity data.
//!
//! The crate covers the full workflow: preprocessing actigraphy counts,
//! eliciting l1-ball prior hyperparameters, simulating cohorts, sampling the
//! posterior with NUTS, and summarizing draws (selection, metrics, group
//! differences, bridge-sampling marginal likelihoods).

pub mod density;
pub mod elicitation;
pub mod error;
pub mod l1ball;
pub mod math;
pub mod model;
pub mod pipeline;
pub mod sampler;
pub mod simulation;
pub mod summaries;

pub use density::{LogDensity, PosteriorModel};
pub use error::{Error, Result};
