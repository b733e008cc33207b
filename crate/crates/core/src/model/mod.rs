//! Mean function, priors, transforms and joint log-posterior of the circadian
//! models, together with the single-subject baselines.

mod baseline;
mod calc;
pub mod init;
mod kernel;
mod predictive;
mod priors;
mod types;

pub use baseline::BaselineModel;
pub use calc::{CalcLayout, CalcModel, CalcParams, CalcState, ParameterState};
pub use predictive::posterior_predictive_draw;
pub use types::{
    circadian_mean, circadian_mean_unchecked, link_amplitude, link_phase, ColumnScaling, CosineForm,
    CovariateMatrix, HyperParams, ModelSpec, NormalPrior, SubjectParams, SubjectSeries, Variant, OMEGA,
    PERIOD_HOURS,
};

use crate::density::{LogDensity, PosteriorModel};
use crate::error::Result;

/// Any of the supported model variants behind one interface.
#[derive(Debug, Clone)]
pub enum Model {
    Calc(CalcModel),
    Baseline(BaselineModel),
}

impl Model {
    /// Builds the model for `spec.variant`; baselines ignore `x`.
    pub fn build(subjects: Vec<SubjectSeries>, x: Option<CovariateMatrix>, spec: ModelSpec) -> Result<Self> {
        if spec.variant.is_calc() {
            let x = x.ok_or_else(|| {
                crate::Error::InvalidArgument("covariate models need a covariate matrix".into())
            })?;
            Ok(Model::Calc(CalcModel::new(subjects, x, spec)?))
        } else {
            Ok(Model::Baseline(BaselineModel::new(subjects, spec)?))
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        match self {
            Model::Calc(m) => m.spec(),
            Model::Baseline(m) => m.spec(),
        }
    }

    pub fn subjects(&self) -> &[SubjectSeries] {
        match self {
            Model::Calc(m) => m.subjects(),
            Model::Baseline(m) => m.subjects(),
        }
    }

    /// Decoded parameters of subject `i` at an unconstrained position.
    pub fn subject_params(&self, z: &[f64], i: usize) -> SubjectParams {
        match self {
            Model::Calc(m) => m.decode(z).expect("position matches model dimension").constrained.subjects[i],
            Model::Baseline(m) => m.subject_params(z, i),
        }
    }
}

impl LogDensity for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Calc(m) => m.dim(),
            Model::Baseline(m) => m.dim(),
        }
    }

    fn log_density_grad(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            Model::Calc(m) => m.log_density_grad(z, grad),
            Model::Baseline(m) => m.log_density_grad(z, grad),
        }
    }
}

impl PosteriorModel for Model {
    fn constrained_names(&self) -> Vec<String> {
        match self {
            Model::Calc(m) => m.constrained_names(),
            Model::Baseline(m) => m.constrained_names(),
        }
    }

    fn constrain(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Model::Calc(m) => m.constrain(z),
            Model::Baseline(m) => m.constrain(z),
        }
    }

    fn unconstrain(&self, c: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Calc(m) => m.unconstrain(c),
            Model::Baseline(m) => m.unconstrain(c),
        }
    }

    fn initial_point(&self) -> Vec<f64> {
        match self {
            Model::Calc(m) => m.initial_point(),
            Model::Baseline(m) => m.initial_point(),
        }
    }
}
