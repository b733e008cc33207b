//! Everything downstream of posterior draws: interval estimates, inclusion
//! probabilities, classification and estimation metrics, group contrasts,
//! correlation tables and bridge-sampling marginal likelihoods.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::LogDensity;
use crate::error::{Error, Result};
use crate::math::{mean, median, pearson, quantile_sorted, sd, HALF_LN_2PI};
use crate::model::{BaselineModel, Model};
use crate::sampler::{ess_bulk, ess_mean, rhat, PosteriorDraws};

/// Fraction of draws that are exactly nonzero.
pub fn ppi(draws: &[f64]) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::InvalidArgument("inclusion probability needs at least one draw".into()));
    }
    Ok(draws.iter().filter(|v| **v != 0.0).count() as f64 / draws.len() as f64)
}

/// Equal-tailed interval holding `level` of the draws.
pub fn equal_tailed_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if draws.is_empty() {
        return Err(Error::InvalidArgument("interval needs at least one draw".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("interval level must lie in (0, 1), got {level}")));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    Ok((quantile_sorted(&sorted, tail), quantile_sorted(&sorted, 1.0 - tail)))
}

/// How coefficients are declared selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Inclusion probability at or above the threshold.
    #[default]
    Ppi,
    /// 95% interval excludes zero. Used for the lasso prior, whose draws are
    /// never exactly zero.
    Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub names: Vec<String>,
    pub ppi: Vec<f64>,
    pub selected: Vec<bool>,
    pub threshold: f64,
    pub rule: SelectionRule,
    pub median: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SelectionReport {
    /// Summarizes every parameter whose name starts with one of `prefixes`.
    pub fn from_draws(draws: &PosteriorDraws, prefixes: &[&str], rule: SelectionRule, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidArgument(format!("threshold must lie in [0, 1], got {threshold}")));
        }
        let mut report = Self {
            names: Vec::new(),
            ppi: Vec::new(),
            selected: Vec::new(),
            threshold,
            rule,
            median: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
        };
        for (j, name) in draws.names.iter().enumerate() {
            if !prefixes.iter().any(|p| name.starts_with(&format!("{p}["))) {
                continue;
            }
            let v = draws.pooled(j);
            let p = ppi(&v)?;
            let (lo, hi) = equal_tailed_interval(&v, 0.95)?;
            let selected = match rule {
                SelectionRule::Ppi => p >= threshold,
                SelectionRule::Interval => lo > 0.0 || hi < 0.0,
            };
            report.names.push(name.clone());
            report.ppi.push(p);
            report.selected.push(selected);
            report.median.push(median(&v));
            report.lower.push(lo);
            report.upper.push(hi);
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    /// Tallies selections against the true support.
    pub fn from_selection(truth_nonzero: &[bool], selected: &[bool]) -> Result<Self> {
        if truth_nonzero.len() != selected.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} truths but {} selections",
                truth_nonzero.len(),
                selected.len()
            )));
        }
        let mut c = Self::default();
        for (&t, &s) in truth_nonzero.iter().zip(selected) {
            match (t, s) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &Self) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Classification metrics; `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub acc: Option<f64>,
    /// `TN / (TN + FP)`. This is the specificity, kept under the name used
    /// by the selection literature this crate reproduces.
    pub prec: Option<f64>,
    /// Set to 0 when undefined, with `mcc_defined` false.
    pub mcc: f64,
    pub mcc_defined: bool,
    pub f1: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

pub fn confusion_metrics(c: &ConfusionCounts) -> ConfusionMetrics {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let mcc_den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = ratio(tp * tn - fp * fn_, mcc_den);
    ConfusionMetrics {
        acc: ratio(tp + tn, tp + tn + fp + fn_),
        prec: ratio(tn, tn + fp),
        mcc: mcc.unwrap_or(0.0),
        mcc_defined: mcc.is_some(),
        f1: ratio(2.0 * tp, 2.0 * tp + fp + fn_),
    }
}

/// Mean squared error and mean absolute error of coefficient estimates.
///
/// The first value carries no square root: it is the mean of squared
/// errors, reported under the name RMSE for comparability with published
/// tables.
pub fn rmse_rmae(eta_true: &[f64], eta_hat: &[f64]) -> Result<(f64, f64)> {
    if eta_true.len() != eta_hat.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} true coefficients but {} estimates",
            eta_true.len(),
            eta_hat.len()
        )));
    }
    if eta_true.is_empty() {
        return Err(Error::InvalidArgument("no coefficients to score".into()));
    }
    let q = eta_true.len() as f64;
    let sq = eta_true.iter().zip(eta_hat).map(|(t, h)| (t - h) * (t - h)).sum::<f64>() / q;
    let ab = eta_true.iter().zip(eta_hat).map(|(t, h)| (t - h).abs()).sum::<f64>() / q;
    Ok((sq, ab))
}

/// Fraction of closed intervals that contain their true value.
pub fn coverage(intervals: &[(f64, f64)], truths: &[f64]) -> Result<f64> {
    if intervals.len() != truths.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} intervals but {} truths",
            intervals.len(),
            truths.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::InvalidArgument("no intervals to score".into()));
    }
    let hits = intervals.iter().zip(truths).filter(|((lo, hi), t)| lo <= *t && *t <= hi).count();
    Ok(hits as f64 / truths.len() as f64)
}

/// Subject grouping for contrasts.
#[derive(Debug, Clone, PartialEq)]
pub enum Grouping {
    /// `true` marks the first group.
    Labels(Vec<bool>),
    /// Split at the empirical median; values strictly above it form the
    /// first group.
    Continuous(Vec<f64>),
}

impl Grouping {
    pub fn labels(&self) -> Vec<bool> {
        match self {
            Grouping::Labels(l) => l.clone(),
            Grouping::Continuous(v) => {
                let m = median(v);
                v.iter().map(|x| *x > m).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupDifference {
    /// Posterior mean of (mean of first group) minus (mean of second group).
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    /// The 95% interval excludes zero.
    pub significant: bool,
    pub n_first: usize,
    pub n_second: usize,
}

/// Per-draw difference of group means of a subject-level quantity.
/// `subject_draws[i]` holds the draws of subject `i`.
pub fn group_difference(subject_draws: &[Vec<f64>], grouping: &Grouping) -> Result<GroupDifference> {
    let labels = grouping.labels();
    if labels.len() != subject_draws.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} group labels for {} subjects",
            labels.len(),
            subject_draws.len()
        )));
    }
    let n_first = labels.iter().filter(|l| **l).count();
    let n_second = labels.len() - n_first;
    if n_first < 2 || n_second < 2 {
        return Err(Error::InvalidArgument(format!(
            "each group needs at least 2 subjects (got {n_first} and {n_second})"
        )));
    }
    let n_draws = subject_draws[0].len();
    if n_draws == 0 || subject_draws.iter().any(|d| d.len() != n_draws) {
        return Err(Error::DimensionMismatch("subjects must share a non-zero number of draws".into()));
    }
    let diffs: Vec<f64> = (0..n_draws)
        .map(|s| {
            let (mut a, mut b) = (0.0, 0.0);
            for (d, &first) in subject_draws.iter().zip(&labels) {
                if first {
                    a += d[s];
                } else {
                    b += d[s];
                }
            }
            a / n_first as f64 - b / n_second as f64
        })
        .collect();
    let (lower, upper) = equal_tailed_interval(&diffs, 0.95)?;
    Ok(GroupDifference {
        mean: mean(&diffs),
        lower,
        upper,
        significant: lower > 0.0 || upper < 0.0,
        n_first,
        n_second,
    })
}

/// Pearson correlations between named columns; `None` where a column is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn pairwise_correlations(columns: &[(String, Vec<f64>)]) -> Result<CorrelationTable> {
    let n = columns.first().map_or(0, |c| c.1.len());
    if n < 3 {
        return Err(Error::InvalidArgument(format!("correlations need at least 3 subjects, got {n}")));
    }
    if columns.iter().any(|c| c.1.len() != n) {
        return Err(Error::DimensionMismatch("columns differ in length".into()));
    }
    let values = columns
        .iter()
        .map(|(_, x)| columns.iter().map(|(_, y)| pearson(x, y)).collect())
        .collect();
    Ok(CorrelationTable {
        names: columns.iter().map(|c| c.0.clone()).collect(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub rhat: f64,
    pub ess_bulk: f64,
}

/// Mean, median, 95% interval and convergence diagnostics per parameter.
pub fn summarize_parameters(draws: &PosteriorDraws) -> Result<Vec<ParameterSummary>> {
    (0..draws.dim())
        .map(|j| {
            let series = draws.param_chains(j);
            let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
            let pooled = draws.pooled(j);
            let (lower, upper) = equal_tailed_interval(&pooled, 0.95)?;
            Ok(ParameterSummary {
                name: draws.names[j].clone(),
                mean: mean(&pooled),
                sd: sd(&pooled),
                median: median(&pooled),
                lower,
                upper,
                rhat: rhat(&refs)?.value,
                ess_bulk: ess_bulk(&refs)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BridgeConfig {
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeEstimate {
    pub log_ml: f64,
    /// Approximate standard error of `log_ml`.
    pub mc_error: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Proposal and posterior barely overlap; the estimate should not be trusted.
    pub unreliable: bool,
}

/// Multivariate normal matched to the first moments of a sample.
struct Proposal {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_det_half: f64,
}

impl Proposal {
    fn fit(rows: &[&[f64]]) -> Result<Self> {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mu = DVector::zeros(d);
        for r in rows {
            mu += DVector::from_column_slice(r);
        }
        mu /= n;
        let mut cov = DMatrix::zeros(d, d);
        for r in rows {
            let c = DVector::from_column_slice(r) - &mu;
            cov += &c * c.transpose();
        }
        cov /= (n - 1.0).max(1.0);
        let mut jitter = 0.0;
        for _ in 0..20 {
            let mut m = cov.clone();
            for i in 0..d {
                m[(i, i)] += jitter;
            }
            if let Some(ch) = m.cholesky() {
                let chol = ch.l();
                let log_det_half = chol.diagonal().iter().map(|v| v.ln()).sum();
                return Ok(Self { mean: mu, chol, log_det_half });
            }
            jitter = if jitter == 0.0 { 1e-10 * cov.diagonal().max().max(1e-300) } else { jitter * 10.0 };
        }
        Err(Error::FitFailure("proposal covariance is not positive definite".into()))
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let c = DVector::from_column_slice(x) - &self.mean;
        let z = self.chol.solve_lower_triangular(&c).expect("positive Cholesky diagonal");
        -(self.mean.len() as f64) * HALF_LN_2PI - self.log_det_half - 0.5 * z.norm_squared()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_iterator(self.mean.len(), (0..self.mean.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (&self.mean + &self.chol * z).iter().copied().collect()
    }
}

/// Log marginal likelihood of `density` by the iterative optimal bridge
/// estimator. `positions` are unconstrained draws, chains x iterations x dim;
/// the first half of every chain fits a normal proposal and the second half
/// enters the estimator.
pub fn bridge_logml<D, R>(density: &D, positions: &[Vec<Vec<f64>>], config: &BridgeConfig, rng: &mut R) -> Result<BridgeEstimate>
where
    D: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    let n_iter = positions.first().map_or(0, |c| c.len());
    if n_iter < 4 || positions.iter().any(|c| c.len() != n_iter) {
        return Err(Error::InvalidArgument("bridge sampling needs equal-length chains of at least 4 draws".into()));
    }
    if positions.iter().flatten().any(|p| p.len() != density.dim()) {
        return Err(Error::DimensionMismatch("draw width differs from the model dimension".into()));
    }
    let half = n_iter / 2;
    let fit_rows: Vec<&[f64]> = positions.iter().flat_map(|c| c[..half].iter().map(|p| p.as_slice())).collect();
    let proposal = Proposal::fit(&fit_rows)?;

    // Log ratio of unnormalized posterior to proposal at the held-out draws,
    // kept per chain for the autocorrelation correction.
    let l1: Vec<Vec<f64>> = positions
        .iter()
        .map(|c| c[half..].iter().map(|p| density.log_density(p) - proposal.log_density(p)).collect())
        .collect();
    let n1 = l1.iter().map(|c| c.len()).sum::<usize>();
    let n2 = n1;
    let l2: Vec<f64> = (0..n2)
        .map(|_| {
            let x = proposal.sample(rng);
            let lp = density.log_density(&x);
            let lp = if lp.is_nan() { f64::NEG_INFINITY } else { lp };
            lp - proposal.log_density(&x)
        })
        .collect();
    let l1_flat: Vec<f64> = l1.iter().flatten().copied().collect();
    if l1_flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("posterior draws with non-finite log density".into()));
    }

    let s1 = n1 as f64 / (n1 + n2) as f64;
    let s2 = n2 as f64 / (n1 + n2) as f64;
    // Work relative to a common offset to keep exponentials in range.
    let shift = median(&l1_flat);
    let e1: Vec<f64> = l1_flat.iter().map(|v| (v - shift).exp()).collect();
    let e2: Vec<f64> = l2.iter().map(|v| (v - shift).exp()).collect();

    let mut r = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        iterations += 1;
        let num = e2.iter().map(|e| e / (s1 * e + s2 * r)).sum::<f64>() / n2 as f64;
        let den = e1.iter().map(|e| 1.0 / (s1 * e + s2 * r)).sum::<f64>() / n1 as f64;
        let next = num / den;
        if !next.is_finite() || next <= 0.0 {
            r = next;
            break;
        }
        let change = ((next - r) / next).abs();
        r = next;
        if change < config.tolerance {
            converged = true;
            break;
        }
    }
    if !(r.is_finite() && r > 0.0) {
        return Ok(BridgeEstimate {
            log_ml: f64::NAN,
            mc_error: f64::NAN,
            iterations,
            converged: false,
            unreliable: true,
        });
    }

    // Relative mean-squared error approximation; the posterior-side term is
    // inflated by the autocorrelation of the held-out draws.
    let f_prop: Vec<f64> = e2.iter().map(|e| e / (s1 * e + s2 * r)).collect();
    let f_post: Vec<Vec<f64>> = l1
        .iter()
        .map(|c| c.iter().map(|v| 1.0 / (s1 * (v - shift).exp() + s2 * r)).collect())
        .collect();
    let f_post_flat: Vec<f64> = f_post.iter().flatten().copied().collect();
    let rel_var = |f: &[f64]| {
        let m = mean(f);
        crate::math::variance(f) / (m * m)
    };
    let refs: Vec<&[f64]> = f_post.iter().map(|c| c.as_slice()).collect();
    let ess_post = ess_mean(&refs).ok().filter(|e| e.is_finite() && *e > 0.0).unwrap_or(n1 as f64);
    let re2 = rel_var(&f_prop) / n2 as f64 + rel_var(&f_post_flat) / ess_post;

    let finite_share = l2.iter().filter(|v| v.is_finite()).count() as f64 / n2 as f64;
    let log_ml = shift + r.ln();
    Ok(BridgeEstimate {
        log_ml,
        mc_error: re2.sqrt(),
        iterations,
        converged,
        unreliable: !converged || finite_share < 0.1 || !re2.is_finite() || re2.sqrt() > 1.0,
    })
}

/// Sum of independent per-subject bridge estimates of a baseline model.
pub fn baseline_logml<R: Rng + ?Sized>(
    model: &BaselineModel,
    positions: &[Vec<Vec<f64>>],
    config: &BridgeConfig,
    rng: &mut R,
) -> Result<BridgeEstimate> {
    let mut total = BridgeEstimate {
        log_ml: 0.0,
        mc_error: 0.0,
        iterations: 0,
        converged: true,
        unreliable: false,
    };
    let mut var = 0.0;
    for i in 0..model.subjects().len() {
        let block = model.subject_block(i);
        let sub: Vec<Vec<Vec<f64>>> = positions
            .iter()
            .map(|c| c.iter().map(|p| p[block.clone()].to_vec()).collect())
            .collect();
        let est = bridge_logml(&model.subject_model(i), &sub, config, rng)?;
        total.log_ml += est.log_ml;
        var += est.mc_error * est.mc_error;
        total.iterations = total.iterations.max(est.iterations);
        total.converged &= est.converged;
        total.unreliable |= est.unreliable;
    }
    total.mc_error = var.sqrt();
    Ok(total)
}

/// Bridge estimate for any model variant; baselines are handled per subject.
pub fn model_logml<R: Rng + ?Sized>(
    model: &Model,
    draws: &PosteriorDraws,
    config: &BridgeConfig,
    rng: &mut R,
) -> Result<BridgeEstimate> {
    let positions = draws.positions(model)?;
    match model {
        Model::Calc(m) => bridge_logml(m, &positions, config, rng),
        Model::Baseline(m) => baseline_logml(m, &positions, config, rng),
    }
}
