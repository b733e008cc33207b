use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{expit, mean, sd};

/// Hours in one circadian period.
pub const PERIOD_HOURS: f64 = 24.0;
/// Angular frequency of the 24 h cycle, in radians per hour.
pub const OMEGA: f64 = 2.0 * std::f64::consts::PI / PERIOD_HOURS;

/// One subject's time-indexed activity observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSeries {
    pub subject_id: String,
    /// Epoch indices, strictly increasing; hours are `t / R`.
    pub t_index: Vec<u32>,
    pub y: Vec<f64>,
}

impl SubjectSeries {
    pub fn new(subject_id: impl Into<String>, t_index: Vec<u32>, y: Vec<f64>) -> Result<Self> {
        let s = Self {
            subject_id: subject_id.into(),
            t_index,
            y,
        };
        s.validate()?;
        Ok(s)
    }

    /// Series observed at consecutive epochs `1..=y.len()`.
    pub fn contiguous(subject_id: impl Into<String>, y: Vec<f64>) -> Result<Self> {
        let t = (1..=y.len() as u32).collect();
        Self::new(subject_id, t, y)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.is_empty() {
            return Err(Error::InvalidArgument(format!("subject {} has no observations", self.subject_id)));
        }
        if self.t_index.len() != self.y.len() {
            return Err(Error::DimensionMismatch(format!(
                "subject {}: {} epochs but {} values",
                self.subject_id,
                self.t_index.len(),
                self.y.len()
            )));
        }
        if self.t_index.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "subject {}: epoch indices must be strictly increasing",
                self.subject_id
            )));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("subject {}: non-finite observation", self.subject_id)));
        }
        Ok(())
    }
}

/// Per-column standardization applied to a covariate matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub mean: f64,
    pub sd: f64,
}

/// N x Q design matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    pub column_names: Vec<String>,
    pub standardization: Vec<Option<ColumnScaling>>,
    pub intercept_column: Option<usize>,
}

impl CovariateMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "covariate matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if column_names.len() != cols {
            return Err(Error::DimensionMismatch(format!(
                "{} column names for {cols} columns",
                column_names.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "covariate matrix has missing or non-finite values".into(),
            ));
        }
        let intercept_column = (0..cols).find(|&j| (0..rows).all(|i| values[i * cols + j] == 1.0) && rows > 1);
        Ok(Self {
            rows,
            cols,
            values,
            column_names,
            standardization: vec![None; cols],
            intercept_column,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], column_names: Vec<String>) -> Result<Self> {
        let cols = column_names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!("row {bad} has {} values, expected {cols}", rows[bad].len())));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), cols, values, column_names)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        let names = (1..=cols).map(|j| format!("x{j}")).collect();
        Self::new(rows, cols, vec![0.0; rows * cols], names).expect("consistent dimensions")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// A column is binary when every entry is exactly 0 or 1 and both occur.
    pub fn is_binary(&self, j: usize) -> bool {
        let col = self.column(j);
        col.iter().all(|&v| v == 0.0 || v == 1.0) && col.contains(&0.0) && col.contains(&1.0)
    }

    /// Standardizes every non-binary, non-intercept column to mean 0 and unit
    /// sample variance, recording the applied scaling.
    pub fn standardized(&self) -> Result<Self> {
        let mut out = self.clone();
        for j in 0..self.cols {
            if Some(j) == self.intercept_column || self.is_binary(j) {
                continue;
            }
            let col = self.column(j);
            let m = mean(&col);
            let s = sd(&col);
            if !(s > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "covariate column '{}' is constant and cannot be standardized",
                    self.column_names[j]
                )));
            }
            for i in 0..self.rows {
                out.values[i * self.cols + j] = (col[i] - m) / s;
            }
            out.standardization[j] = Some(ColumnScaling { mean: m, sd: s });
        }
        Ok(out)
    }

    /// Linear predictor `x_i' eta`.
    #[inline]
    pub fn linear_predictor(&self, i: usize, eta: &[f64]) -> f64 {
        self.row(i).iter().zip(eta).map(|(x, e)| x * e).sum()
    }
}

/// Subject-level parameters in constrained space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectParams {
    /// Minimum expected activity, `m > 0`.
    pub m: f64,
    /// Rest-versus-active balance, `alpha` in (-1, 1).
    pub alpha: f64,
    /// Transition sharpness, `beta > 0`.
    pub beta: f64,
    /// Residual standard deviation.
    pub sigma: f64,
    /// Amplitude `a >= 0`.
    pub amplitude: f64,
    /// Acrophase in hours, within [0, 24].
    pub phase: f64,
}

impl SubjectParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.m > 0.0
            && self.alpha > -1.0
            && self.alpha < 1.0
            && self.beta > 0.0
            && self.sigma >= 0.0
            && self.amplitude >= 0.0
            && (0.0..=PERIOD_HOURS).contains(&self.phase)
            && [self.m, self.alpha, self.beta, self.sigma, self.amplitude, self.phase]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("subject parameters out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Covariate-dependent anti-logistic model with l1-ball sparsity.
    CalcL1ball,
    /// Same mean model with double-exponential (Bayesian lasso) coefficients.
    CalcBlasso,
    /// Per-subject standard cosinor.
    Cosinor,
    /// Per-subject extended (anti-logistic) cosinor without covariates.
    Rar,
}

impl Variant {
    pub fn is_calc(self) -> bool {
        matches!(self, Variant::CalcL1ball | Variant::CalcBlasso)
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::CalcL1ball => "calc_l1ball",
            Variant::CalcBlasso => "calc_blasso",
            Variant::Cosinor => "cosinor",
            Variant::Rar => "rar",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calc_l1ball" | "calc-l1ball" | "l1ball" => Ok(Variant::CalcL1ball),
            "calc_blasso" | "calc-blasso" | "blasso" => Ok(Variant::CalcBlasso),
            "cosinor" => Ok(Variant::Cosinor),
            "rar" => Ok(Variant::Rar),
            other => Err(Error::InvalidArgument(format!("unknown model variant '{other}'"))),
        }
    }
}

/// Placement of `alpha` inside the anti-logistic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CosineForm {
    /// `expit(beta * cos(.) - alpha)`
    #[default]
    AsPrinted,
    /// `expit(beta * (cos(.) - alpha))`
    Marler,
}

/// Normal prior given by mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl NormalPrior {
    #[inline]
    pub fn log_density(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        -crate::math::HALF_LN_2PI - self.sd.ln() - 0.5 * z * z
    }

    #[inline]
    pub fn dlog_density(&self, x: f64) -> f64 {
        -(x - self.mean) / (self.sd * self.sd)
    }
}

/// Prior hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    /// Prior on the population log-mean of `m`; N(0, 10) with 10 read as a variance.
    pub lmu_m: NormalPrior,
    /// Prior on the population log-mean of `beta`; N(5, 3) with 3 read as a variance.
    pub lmu_beta: NormalPrior,
    /// Half-Cauchy scale for the population log-sd of `m`.
    pub sigma_m_scale: f64,
    /// Half-Cauchy scale for the population log-sd of `beta`.
    pub sigma_beta_scale: f64,
    /// Beta shape parameters for `(alpha + 1) / 2`.
    pub beta_prior_a: f64,
    pub beta_prior_b: f64,
    /// Half-Cauchy scale for each residual sd.
    pub gamma_sigma: f64,
    pub tau_a: f64,
    pub tau_phi: f64,
    pub lambda_a: f64,
    pub lambda_phi: f64,
    /// Prior on log-amplitude for the single-subject baselines.
    pub log_amplitude: NormalPrior,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            lmu_m: NormalPrior {
                mean: 0.0,
                sd: 10f64.sqrt(),
            },
            lmu_beta: NormalPrior {
                mean: 5.0,
                sd: 3f64.sqrt(),
            },
            sigma_m_scale: 1.0,
            sigma_beta_scale: 1.0,
            beta_prior_a: 1.0,
            beta_prior_b: 1.0,
            gamma_sigma: 1.0,
            tau_a: 1.0,
            tau_phi: 1.0,
            lambda_a: 1.0,
            lambda_phi: 1.0,
            log_amplitude: NormalPrior {
                mean: 0.0,
                sd: 10f64.sqrt(),
            },
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lmu_m.sd", self.lmu_m.sd),
            ("lmu_beta.sd", self.lmu_beta.sd),
            ("sigma_m_scale", self.sigma_m_scale),
            ("sigma_beta_scale", self.sigma_beta_scale),
            ("beta_prior_a", self.beta_prior_a),
            ("beta_prior_b", self.beta_prior_b),
            ("gamma_sigma", self.gamma_sigma),
            ("tau_a", self.tau_a),
            ("tau_phi", self.tau_phi),
            ("lambda_a", self.lambda_a),
            ("lambda_phi", self.lambda_phi),
            ("log_amplitude.sd", self.log_amplitude.sd),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("hyperparameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Epochs per hour.
    pub epochs_per_hour: u32,
    pub hyper: HyperParams,
    pub cosine_form: CosineForm,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::new(Variant::CalcL1ball, 12)
    }
}

impl ModelSpec {
    pub fn new(variant: Variant, epochs_per_hour: u32) -> Self {
        Self {
            variant,
            epochs_per_hour,
            hyper: HyperParams::default(),
            cosine_form: CosineForm::AsPrinted,
        }
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        if self.epochs_per_hour == 0 {
            return Err(Error::InvalidArgument("epochs per hour must be positive".into()));
        }
        if self.variant.is_calc() && q == 0 {
            return Err(Error::InvalidArgument("covariate models need at least one covariate".into()));
        }
        self.hyper.validate()
    }

    #[inline]
    pub fn hours(&self, t: u32) -> f64 {
        t as f64 / self.epochs_per_hour as f64
    }
}

/// Argument of the anti-logistic term given the cosine value.
#[inline]
pub(crate) fn antilogistic_arg(form: CosineForm, cosine: f64, alpha: f64, beta: f64) -> f64 {
    match form {
        CosineForm::AsPrinted => beta * cosine - alpha,
        CosineForm::Marler => beta * (cosine - alpha),
    }
}

/// Expected activity at epoch `t`.
pub fn circadian_mean(t: u32, sp: &SubjectParams, spec: &ModelSpec) -> Result<f64> {
    sp.validate()?;
    Ok(circadian_mean_unchecked(spec.hours(t), sp, spec))
}

/// Expected activity at `hours` without parameter validation.
pub fn circadian_mean_unchecked(hours: f64, sp: &SubjectParams, spec: &ModelSpec) -> f64 {
    let c = ((hours - sp.phase) * OMEGA).cos();
    match spec.variant {
        Variant::Cosinor => {
            let half = 0.5 * sp.amplitude;
            sp.m + half + half * c
        }
        _ => sp.m + sp.amplitude * expit(antilogistic_arg(spec.cosine_form, c, sp.alpha, sp.beta)),
    }
}

/// `exp(x' eta)`; reports an invalid parameter when the result overflows.
pub fn link_amplitude(x: &[f64], eta_a: &[f64]) -> Result<f64> {
    log_link(x, eta_a)
}

/// `exp(x' eta)` for the acrophase. Range checks belong to the caller.
pub fn link_phase(x: &[f64], eta_phi: &[f64]) -> Result<f64> {
    log_link(x, eta_phi)
}

fn log_link(x: &[f64], eta: &[f64]) -> Result<f64> {
    if x.len() != eta.len() {
        return Err(Error::DimensionMismatch(format!(
            "covariate row has {} entries, coefficients {}",
            x.len(),
            eta.len()
        )));
    }
    let v = x.iter().zip(eta).map(|(a, b)| a * b).sum::<f64>().exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter("linear predictor overflowed".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m: f64, a: f64, alpha: f64, beta: f64, phase: f64) -> SubjectParams {
        SubjectParams {
            m,
            alpha,
            beta,
            sigma: 1.0,
            amplitude: a,
            phase,
        }
    }

    #[test]
    fn flat_curve_when_beta_is_zero() {
        let spec = ModelSpec::new(Variant::CalcL1ball, 12);
        let sp = SubjectParams {
            beta: 1e-300,
            ..params(1.0, 4.0, 0.0, 1.0, 7.0)
        };
        for t in [1, 50, 200] {
            assert!((circadian_mean(t, &sp, &spec).unwrap() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn peak_value_at_acrophase() {
        let spec = ModelSpec::new(Variant::CalcL1ball, 12);
        let sp = params(1.0, 4.0, 0.0, 10.0, 12.0);
        let v = circadian_mean(144, &sp, &spec).unwrap();
        assert!((v - (1.0 + 4.0 * expit(10.0))).abs() < 1e-12);
        assert!((v - 4.999_818_408_525_19).abs() < 1e-9);
        // Floor near m at the antiphase.
        let low = circadian_mean(1, &sp, &spec).unwrap();
        assert!(low < 1.001);
    }

    #[test]
    fn periodicity_all_variants() {
        for variant in [Variant::CalcL1ball, Variant::CalcBlasso, Variant::Cosinor, Variant::Rar] {
            for form in [CosineForm::AsPrinted, CosineForm::Marler] {
                let mut spec = ModelSpec::new(variant, 12);
                spec.cosine_form = form;
                let sp = params(0.7, 2.5, -0.4, 6.0, 9.3);
                for t in 1..300u32 {
                    let a = circadian_mean(t, &sp, &spec).unwrap();
                    let b = circadian_mean(t + 24 * 12, &sp, &spec).unwrap();
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn phase_shift_by_period_is_invisible_to_the_curve() {
        let spec = ModelSpec::new(Variant::CalcL1ball, 12);
        let sp = params(1.0, 2.0, 0.1, 5.0, 3.0);
        for t in 1..100u32 {
            let h = spec.hours(t);
            let shifted = SubjectParams { phase: 27.0, ..sp };
            let a = circadian_mean_unchecked(h, &sp, &spec);
            let b = circadian_mean_unchecked(h, &shifted, &spec);
            assert!((a - b).abs() < 1e-12);
        }
        assert!(shifted_is_rejected());
    }

    fn shifted_is_rejected() -> bool {
        let spec = ModelSpec::new(Variant::CalcL1ball, 12);
        circadian_mean(1, &params(1.0, 2.0, 0.1, 5.0, 27.0), &spec).is_err()
    }

    #[test]
    fn increasing_beta_raises_the_peak() {
        let spec = ModelSpec::new(Variant::CalcL1ball, 12);
        let mut prev = f64::NEG_INFINITY;
        for k in 1..40 {
            let sp = params(1.0, 4.0, 0.0, 0.5 * k as f64, 12.0);
            let v = circadian_mean(144, &sp, &spec).unwrap();
            assert!(v > prev && v < 5.0);
            prev = v;
        }
    }

    #[test]
    fn cosinor_range_is_m_to_m_plus_a() {
        let spec = ModelSpec::new(Variant::Cosinor, 12);
        let sp = params(1.0, 4.0, 0.0, 1.0, 6.0);
        assert!((circadian_mean(72, &sp, &spec).unwrap() - 5.0).abs() < 1e-12);
        assert!((circadian_mean(216, &sp, &spec).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn links() {
        assert_eq!(link_amplitude(&[0.3, -2.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!((link_amplitude(&[1.0, 0.0], &[0.6, 0.0]).unwrap() - 1.822_118_800_390_509).abs() < 1e-12);
        assert!((link_phase(&[1.0], &[12f64.ln()]).unwrap() - 12.0).abs() < 1e-12);
        assert!(link_amplitude(&[1.0], &[1e4]).is_err());
        assert!(link_phase(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn invalid_parameters_are_reported() {
        let spec = ModelSpec::new(Variant::CalcL1ball, 12);
        assert!(circadian_mean(1, &params(-1.0, 1.0, 0.0, 1.0, 1.0), &spec).is_err());
        assert!(circadian_mean(1, &params(1.0, 1.0, 1.0, 1.0, 1.0), &spec).is_err());
        assert!(circadian_mean(1, &params(1.0, 1.0, 0.0, 0.0, 1.0), &spec).is_err());
    }

    #[test]
    fn standardization_contract() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![1.0, (i % 2) as f64, (i as f64).powf(1.3), 5.0 - 0.1 * i as f64])
            .collect();
        let names = ["int", "bin", "c1", "c2"].iter().map(|s| s.to_string()).collect();
        let x = CovariateMatrix::from_rows(&rows, names).unwrap();
        assert_eq!(x.intercept_column, Some(0));
        let s = x.standardized().unwrap();
        assert_eq!(s.column(0), x.column(0));
        assert_eq!(s.column(1), x.column(1));
        for j in [2, 3] {
            let c = s.column(j);
            assert!(mean(&c).abs() < 1e-10);
            assert!((crate::math::variance(&c) - 1.0).abs() < 1e-8);
            assert!(s.standardization[j].is_some());
        }
        // Standardizing twice leaves the result unchanged.
        let again = s.standardized().unwrap();
        for (a, b) in again.values().iter().zip(s.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_continuous_column_is_an_error() {
        let rows: Vec<Vec<f64>> = (0..5).map(|_| vec![2.5]).collect();
        let x = CovariateMatrix::from_rows(&rows, vec!["c".into()]).unwrap();
        assert!(x.standardized().is_err());
    }

    #[test]
    fn missing_values_rejected() {
        assert!(CovariateMatrix::new(1, 2, vec![1.0, f64::NAN], vec!["a".into(), "b".into()]).is_err());
    }
}
