//! Synthetic cohorts: mixed discrete/continuous covariates, subject-level
//! parameters drawn from normal laws, and series from the anti-logistic mean
//! plus Gaussian noise.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{circadian_mean_unchecked, CosineForm, CovariateMatrix, ModelSpec, SubjectParams, SubjectSeries, Variant, PERIOD_HOURS};
use crate::sampler::rng::purpose_rng;

/// How the covariate matrix is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateScheme {
    /// The full mixed recipe; needs at least ten columns.
    Paper,
    /// The same recipe truncated to however many columns are requested.
    PaperPrefix,
    /// A matrix provided by the caller.
    Supplied,
}

/// Whether the second parameter of a subject law is a standard deviation or
/// a variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawScale {
    #[default]
    Sd,
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalLaw {
    pub mean: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubjectLaws {
    pub m: NormalLaw,
    pub beta: NormalLaw,
    pub alpha: NormalLaw,
    pub scale: LawScale,
}

impl Default for SubjectLaws {
    fn default() -> Self {
        Self {
            m: NormalLaw { mean: 3.0, spread: 0.5 },
            beta: NormalLaw { mean: 10.0, spread: 0.5 },
            alpha: NormalLaw { mean: -0.3, spread: 0.1 },
            scale: LawScale::Sd,
        }
    }
}

impl SubjectLaws {
    fn normal(&self, law: NormalLaw) -> Result<Normal<f64>> {
        let sd = match self.scale {
            LawScale::Sd => law.spread,
            LawScale::Variance => law.spread.sqrt(),
        };
        Normal::new(law.mean, sd).map_err(|e| Error::InvalidArgument(format!("invalid subject law: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub n_subjects: usize,
    /// Observations per subject.
    pub t_len: usize,
    /// Optional per-subject lengths overriding `t_len`.
    pub t_lengths: Option<Vec<usize>>,
    pub epochs_per_hour: u32,
    /// Residual standard deviation shared by all subjects.
    pub sigma: f64,
    pub covariate_scheme: CovariateScheme,
    /// Prepend a column of ones; the scheme then fills the remaining columns.
    pub intercept: bool,
    pub eta_a: Vec<f64>,
    pub eta_phi: Vec<f64>,
    pub laws: SubjectLaws,
    pub cosine_form: CosineForm,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        let mut eta_a = vec![0.0; 15];
        eta_a[0] = 0.6;
        eta_a[3] = 0.5;
        eta_a[4] = -0.6;
        eta_a[6] = 0.1;
        let mut eta_phi = vec![0.0; 15];
        eta_phi[0] = 1.0;
        eta_phi[1] = 0.9;
        eta_phi[2] = 0.01;
        Self {
            n_subjects: 30,
            t_len: 1000,
            t_lengths: None,
            epochs_per_hour: 12,
            sigma: 0.5,
            covariate_scheme: CovariateScheme::Paper,
            intercept: false,
            eta_a,
            eta_phi,
            laws: SubjectLaws::default(),
            cosine_form: CosineForm::AsPrinted,
            seed: 1,
        }
    }
}

impl ScenarioSpec {
    /// Ten subjects with 300 observations and eight covariates; two amplitude
    /// effects (+0.6, -0.6) and two phase effects (1.0, 0.9).
    pub fn desk_scale() -> Self {
        let mut eta_a = vec![0.0; 8];
        eta_a[0] = 0.6;
        eta_a[3] = -0.6;
        let mut eta_phi = vec![0.0; 8];
        eta_phi[0] = 1.0;
        eta_phi[1] = 0.9;
        Self {
            n_subjects: 10,
            t_len: 300,
            covariate_scheme: CovariateScheme::PaperPrefix,
            eta_a,
            eta_phi,
            ..Self::default()
        }
    }

    pub fn q(&self) -> usize {
        self.eta_a.len()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.t_lengths.clone().unwrap_or_else(|| vec![self.t_len; self.n_subjects])
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::InvalidArgument("scenario needs at least one subject".into()));
        }
        if self.eta_a.len() != self.eta_phi.len() || self.eta_a.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "eta_a has {} entries and eta_phi {}; both must equal Q >= 1",
                self.eta_a.len(),
                self.eta_phi.len()
            )));
        }
        if let Some(t) = &self.t_lengths {
            if t.len() != self.n_subjects {
                return Err(Error::DimensionMismatch("t_lengths must have one entry per subject".into()));
            }
        }
        if self.lengths().contains(&0) {
            return Err(Error::InvalidArgument("every subject needs at least one observation".into()));
        }
        if self.epochs_per_hour == 0 {
            return Err(Error::InvalidArgument("epochs_per_hour must be positive".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        let generated = self.q() - self.intercept as usize;
        if self.covariate_scheme == CovariateScheme::Paper && generated < 10 {
            return Err(Error::InvalidArgument(format!(
                "the paper covariate scheme needs at least 10 generated columns, got {generated}"
            )));
        }
        Ok(())
    }
}

/// Everything needed to score a fit against the generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario: ScenarioSpec,
    pub subject_ids: Vec<String>,
    pub subjects: Vec<SubjectParams>,
    pub eta_a: Vec<f64>,
    pub eta_phi: Vec<f64>,
    pub covariate_names: Vec<String>,
    /// Alpha draws rejected for falling outside (-1, 1).
    pub alpha_resamples: usize,
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub series: Vec<SubjectSeries>,
    /// Standardized design used for fitting.
    pub x: CovariateMatrix,
    /// Design before standardization.
    pub x_raw: CovariateMatrix,
    pub truth: GroundTruth,
}

/// Raw (unstandardized) covariates following the mixed recipe: column 1 is 1
/// for the first half of subjects, columns 2 and 3 are two-component normal
/// mixtures with each component used by exactly half the subjects in random
/// order, columns 7 and 10 are Bernoulli(1/2), the rest standard normal.
pub fn generate_covariates<R: Rng + ?Sized>(scheme: CovariateScheme, n: usize, q: usize, rng: &mut R) -> Result<CovariateMatrix> {
    match scheme {
        CovariateScheme::Supplied => {
            return Err(Error::InvalidArgument("supplied covariates cannot be generated".into()));
        }
        CovariateScheme::Paper if q < 10 => {
            return Err(Error::InvalidArgument(format!("the paper covariate scheme needs Q >= 10, got {q}")));
        }
        _ => {}
    }
    if n == 0 || q == 0 {
        return Err(Error::InvalidArgument("covariate matrix needs at least one row and column".into()));
    }
    let mix_sd = 2f64.sqrt();
    let mut values = vec![0.0; n * q];
    let first_half = n.div_ceil(2);
    for j in 0..q {
        let column: Vec<f64> = match j {
            0 => (0..n).map(|i| if i < first_half { 1.0 } else { 0.0 }).collect(),
            1 | 2 => {
                let (hi, lo) = if j == 1 { (180.0, 160.0) } else { (75.0, 55.0) };
                let mut high: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
                high.shuffle(rng);
                high.iter()
                    .map(|&h| {
                        let mu = if h { hi } else { lo };
                        mu + mix_sd * rng.sample::<f64, _>(StandardNormal)
                    })
                    .collect()
            }
            6 | 9 => (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect(),
            _ => (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        };
        for (i, v) in column.into_iter().enumerate() {
            values[i * q + j] = v;
        }
    }
    let names = (1..=q).map(|j| format!("x{j}")).collect();
    CovariateMatrix::new(n, q, values, names)
}

/// Draws a cohort. Fails with the offending subject when a generated
/// acrophase falls outside [0, 24] or an amplitude overflows.
pub fn generate_cohort(spec: &ScenarioSpec, supplied_x: Option<&CovariateMatrix>) -> Result<Cohort> {
    spec.validate()?;
    let n = spec.n_subjects;
    let q = spec.q();
    let x_raw = match spec.covariate_scheme {
        CovariateScheme::Supplied => {
            let x = supplied_x
                .ok_or_else(|| Error::InvalidArgument("scenario uses supplied covariates but none were given".into()))?;
            if x.rows() != n || x.cols() != q {
                return Err(Error::DimensionMismatch(format!(
                    "supplied covariates are {}x{}, scenario needs {n}x{q}",
                    x.rows(),
                    x.cols()
                )));
            }
            x.clone()
        }
        scheme => {
            let mut rng = purpose_rng(spec.seed, "simulate/covariates");
            let generated = generate_covariates(scheme, n, q - spec.intercept as usize, &mut rng)?;
            if spec.intercept {
                let mut values = Vec::with_capacity(n * q);
                for i in 0..n {
                    values.push(1.0);
                    values.extend_from_slice(generated.row(i));
                }
                let mut names = vec!["intercept".to_string()];
                names.extend((1..q).map(|j| format!("x{j}")));
                CovariateMatrix::new(n, q, values, names)?
            } else {
                generated
            }
        }
    };
    let x = x_raw.standardized()?;

    let m_law = spec.laws.normal(spec.laws.m)?;
    let beta_law = spec.laws.normal(spec.laws.beta)?;
    let alpha_law = spec.laws.normal(spec.laws.alpha)?;
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let model_spec = ModelSpec {
        cosine_form: spec.cosine_form,
        ..ModelSpec::new(Variant::CalcL1ball, spec.epochs_per_hour)
    };

    let lengths = spec.lengths();
    let mut series = Vec::with_capacity(n);
    let mut params = Vec::with_capacity(n);
    let mut alpha_resamples = 0;
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = purpose_rng(spec.seed, &format!("simulate/subject/{i}"));
        let id = format!("s{:03}", i + 1);
        let mut draw_positive = |law: &Normal<f64>, what: &str| -> Result<f64> {
            for _ in 0..1000 {
                let v = law.sample(&mut rng);
                if v > 0.0 {
                    return Ok(v);
                }
            }
            Err(Error::InvalidParameter(format!("subject {id}: could not draw a positive {what}")))
        };
        let m = draw_positive(&m_law, "m")?;
        let beta = draw_positive(&beta_law, "beta")?;
        let mut alpha = alpha_law.sample(&mut rng);
        let mut tries = 0;
        while !(alpha > -1.0 && alpha < 1.0) {
            alpha_resamples += 1;
            tries += 1;
            if tries > 1000 {
                return Err(Error::InvalidParameter(format!("subject {id}: alpha law puts no mass on (-1, 1)")));
            }
            alpha = alpha_law.sample(&mut rng);
        }
        let amplitude = x.linear_predictor(i, &spec.eta_a).exp();
        let phase = x.linear_predictor(i, &spec.eta_phi).exp();
        if !amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!("subject {id}: amplitude overflows")));
        }
        if !(0.0..=PERIOD_HOURS).contains(&phase) {
            return Err(Error::InvalidParameter(format!(
                "subject {id}: generated acrophase {phase:.4} lies outside [0, 24]"
            )));
        }
        let sp = SubjectParams {
            m,
            alpha,
            beta,
            sigma: spec.sigma,
            amplitude,
            phase,
        };
        let t_index: Vec<u32> = (1..=lengths[i] as u32).collect();
        let y = t_index
            .iter()
            .map(|&t| circadian_mean_unchecked(model_spec.hours(t), &sp, &model_spec) + noise.sample(&mut rng))
            .collect();
        series.push(SubjectSeries::new(id.clone(), t_index, y)?);
        params.push(sp);
        ids.push(id);
    }
    Ok(Cohort {
        series,
        truth: GroundTruth {
            scenario: spec.clone(),
            subject_ids: ids,
            subjects: params,
            eta_a: spec.eta_a.clone(),
            eta_phi: spec.eta_phi.clone(),
            covariate_names: x.column_names.clone(),
            alpha_resamples,
        },
        x,
        x_raw,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure1Panel {
    A,
    B,
    C,
    D,
}

/// Published illustration parameter sets (unit residual variance). Panel b's
/// minimum of 0 is stored as 1e-8 to respect `m > 0`.
pub fn figure1_preset(panel: Figure1Panel) -> SubjectParams {
    let (m, amplitude, alpha, beta, phase) = match panel {
        Figure1Panel::A => (1.0, 4.0, 0.0, 10.0, 12.0),
        Figure1Panel::B => (1e-8, 4.0, -0.99, 10.0, 4.0),
        Figure1Panel::C => (1.0, 3.0, 0.99, 3.0, 8.0),
        Figure1Panel::D => (1.0, 3.0, 0.0, 3.0, 8.0),
    };
    SubjectParams {
        m,
        alpha,
        beta,
        sigma: 1.0,
        amplitude,
        phase,
    }
}
